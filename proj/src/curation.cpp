#include "oscos/curation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>

#include "oscos/png_encode.hpp"

namespace oscos {

std::vector<std::uint8_t> render_slice(const VolumeImage& vol, std::size_t z, double window_low, double window_high)
{
    if (z >= vol.dims().nz)
        throw NotFoundError("slice " + std::to_string(z) + " outside 0.." + std::to_string(vol.dims().nz - 1));
    if (!(window_low < window_high))
        throw ValidationError("window low must be below window high");
    const auto src = vol.slice(z);
    std::vector<std::uint8_t> out(src.size());
    const double scale = 255.0 / (window_high - window_low);
    for (std::size_t i = 0; i < src.size(); ++i) {
        const double g = std::round((static_cast<double>(src[i]) - window_low) * scale);
        out[i] = static_cast<std::uint8_t>(std::clamp(g, 0.0, 255.0));
    }
    return out;
}

Session::Session(VolumeImage volume, DetectionParams params, unsigned threads)
    : volume_(std::move(volume)), initial_params_(std::move(params)), threads_(threads)
{
    validate(initial_params_);
    const auto v = volume_.voxels();
    if (!v.empty()) {
        const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
        min_intensity_ = *lo;
        max_intensity_ = *hi;
    }
    state_.params = initial_params_;
    state_.labels = LabelMap(volume_.dims());
}

std::unique_ptr<Session> Session::replay(VolumeImage volume, DetectionParams initial_params,
                                         const std::vector<EditEntry>& log, unsigned threads)
{
    auto s = std::make_unique<Session>(std::move(volume), std::move(initial_params), threads);
    for (const auto& e : log) {
        switch (e.kind) {
        case EditEntry::Kind::Add:
            s->add_object(e.position.x, e.position.y, e.position.z);
            break;
        case EditEntry::Kind::Delete:
            s->delete_object(e.id);
            break;
        case EditEntry::Kind::Rerun:
            s->rerun(e.params);
            break;
        }
    }
    return s;
}

SessionMeta Session::meta() const
{
    std::shared_lock lock(state_mutex_);
    return {volume_.dims(), volume_.spacing(), min_intensity_, max_intensity_,
            state_.params, state_.objects.size(), state_.version};
}

SessionState Session::state() const
{
    std::shared_lock lock(state_mutex_);
    return state_;
}

std::vector<EditEntry> Session::edit_log() const
{
    std::shared_lock lock(state_mutex_);
    return log_;
}

std::uint64_t Session::version() const
{
    std::shared_lock lock(state_mutex_);
    return state_.version;
}

std::vector<std::uint8_t> Session::slice_png(std::size_t z, double window_low, double window_high) const
{
    const auto gray = render_slice(volume_, z, window_low, window_high);
    return encode_png_gray8(gray, volume_.dims().nx, volume_.dims().ny);
}

std::vector<OverlayObject> Session::list_objects(std::optional<std::size_t> z) const
{
    std::shared_lock lock(state_mutex_);
    std::vector<OverlayObject> out;
    for (const auto& o : state_.objects) {
        if (z && (static_cast<std::int64_t>(*z) < o.bbox.zmin || static_cast<std::int64_t>(*z) > o.bbox.zmax))
            continue;
        out.push_back({o, std::cbrt(3.0 * static_cast<double>(o.size) / (4.0 * std::numbers::pi))});
    }
    return out;
}

NNReport Session::nn_report() const
{
    std::shared_lock lock(state_mutex_);
    return nearest_neighbor_distances(state_.objects, volume_.spacing(), state_.params.use_physical_distance);
}

std::vector<DetectedObject> Session::objects() const
{
    std::shared_lock lock(state_mutex_);
    return state_.objects;
}

void Session::check_version(std::optional<std::uint64_t> expected) const
{
    if (expected && *expected != state_.version)
        throw VersionConflict("state version is " + std::to_string(state_.version) + ", request expected " +
                              std::to_string(*expected));
}

DetectedObject Session::add_object(std::int64_t x, std::int64_t y, std::int64_t z,
                                   std::optional<std::uint64_t> expected_version)
{
    std::lock_guard writer(writer_mutex_);
    if (!volume_.dims().contains(x, y, z))
        throw ValidationError("position (" + std::to_string(x) + "," + std::to_string(y) + "," + std::to_string(z) +
                              ") lies outside the volume");
    std::unique_lock lock(state_mutex_);
    check_version(expected_version);
    return apply_add({x, y, z});
}

void Session::delete_object(std::uint32_t id, std::optional<std::uint64_t> expected_version)
{
    std::lock_guard writer(writer_mutex_);
    std::unique_lock lock(state_mutex_);
    check_version(expected_version);
    apply_delete(id);
}

RerunSummary Session::rerun(const DetectionParams& params, std::optional<std::uint64_t> expected_version)
{
    std::lock_guard writer(writer_mutex_);
    validate(params);
    {
        std::shared_lock lock(state_mutex_);
        check_version(expected_version);
    }
    // Only this thread mutates while the writer lock is held, so readers keep
    // seeing the previous state until the swap below.
    const auto t0 = std::chrono::steady_clock::now();
    Segmentation seg = detect_objects(volume_, params, threads_);
    const double runtime = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    std::unique_lock lock(state_mutex_);
    apply_rerun(params, std::move(seg));
    RerunSummary summary;
    summary.object_count = state_.objects.size();
    summary.manual_count = static_cast<std::size_t>(std::count_if(
        state_.objects.begin(), state_.objects.end(), [](const auto& o) { return o.category == Category::Manual; }));
    summary.automatic_count = summary.object_count - summary.manual_count;
    summary.runtime_seconds = runtime;
    summary.state_version = state_.version;
    return summary;
}

DetectedObject Session::apply_add(const Voxel& v)
{
    DetectedObject o;
    o.id = state_.next_id++;
    o.size = 1;
    o.centroid = {static_cast<double>(v.x), static_cast<double>(v.y), static_cast<double>(v.z)};
    o.bbox = {v.x, v.x, v.y, v.y, v.z, v.z};
    o.peak_intensity = volume_.at(static_cast<std::size_t>(v.x), static_cast<std::size_t>(v.y), static_cast<std::size_t>(v.z));
    o.mean_intensity = o.peak_intensity;
    o.total_intensity = o.peak_intensity;
    o.category = Category::Manual;
    state_.objects.push_back(o);
    ++state_.version;
    log_.push_back({EditEntry::Kind::Add, v, o.id, {}, std::chrono::system_clock::now()});
    return o;
}

void Session::apply_delete(std::uint32_t id)
{
    auto it = std::find_if(state_.objects.begin(), state_.objects.end(), [id](const auto& o) { return o.id == id; });
    if (it == state_.objects.end())
        throw NotFoundError("no object with id " + std::to_string(id));
    if (it->category != Category::Manual) {
        auto labels = state_.labels.labels();
        const auto& b = it->bbox;
        const Dimensions& d = volume_.dims();
        for (auto z = b.zmin; z <= b.zmax; ++z)
            for (auto y = b.ymin; y <= b.ymax; ++y)
                for (auto x = b.xmin; x <= b.xmax; ++x) {
                    auto& l = labels[d.index(static_cast<std::size_t>(x), static_cast<std::size_t>(y), static_cast<std::size_t>(z))];
                    if (l == id)
                        l = 0;
                }
    }
    state_.objects.erase(it);
    ++state_.version;
    log_.push_back({EditEntry::Kind::Delete, {}, id, {}, std::chrono::system_clock::now()});
}

void Session::apply_rerun(const DetectionParams& params, Segmentation seg)
{
    // Fresh automatic objects take ids above everything issued so far, so ids of
    // manual objects (and of anything a client still holds) never get reused.
    const std::uint32_t offset = state_.next_id - 1;
    for (auto& l : seg.labels.labels())
        if (l != 0)
            l += offset;
    std::vector<DetectedObject> objects;
    for (const auto& o : state_.objects)
        if (o.category == Category::Manual)
            objects.push_back(o);
    for (auto o : seg.objects) {
        o.id += offset;
        objects.push_back(o);
    }
    std::sort(objects.begin(), objects.end(), [](const auto& a, const auto& b) { return a.id < b.id; });

    state_.next_id = offset + static_cast<std::uint32_t>(seg.objects.size()) + 1;
    state_.params = params;
    state_.objects = std::move(objects);
    state_.labels = std::move(seg.labels);
    ++state_.version;
    log_.push_back({EditEntry::Kind::Rerun, {}, 0, params, std::chrono::system_clock::now()});
}

} // namespace oscos
