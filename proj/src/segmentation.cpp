#include "oscos/segmentation.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numeric>

#include "oscos/parallel.hpp"

namespace oscos {

double DistanceMetric::operator()(const Point3& a, const Point3& b) const
{
    const double dx = (a.x - b.x) * scale_x;
    const double dy = (a.y - b.y) * scale_y;
    const double dz = (a.z - b.z) * scale_z;
    return std::sqrt(dx * dx + dy * dy + dz * dz);
}

double DistanceMetric::operator()(const Voxel& a, const Voxel& b) const
{
    return (*this)(Point3{static_cast<double>(a.x), static_cast<double>(a.y), static_cast<double>(a.z)},
                   Point3{static_cast<double>(b.x), static_cast<double>(b.y), static_cast<double>(b.z)});
}

std::string_view to_string(Category c)
{
    switch (c) {
    case Category::Normal: return "Normal";
    case Category::Big: return "Big";
    case Category::Sub: return "Sub";
    case Category::Undersized: return "Undersized";
    case Category::Manual: return "Manual";
    }
    return "Normal";
}

Category parse_category(std::string_view name)
{
    for (Category c : {Category::Normal, Category::Big, Category::Sub, Category::Undersized, Category::Manual})
        if (to_string(c) == name)
            return c;
    throw ValidationError("unknown object category '" + std::string(name) + "'");
}

void validate(const DetectionParams& p)
{
    validate(p.preprocess);
    if (p.min_size < 1)
        throw ValidationError("min_size must be >= 1");
    if (p.obj_size < p.min_size)
        throw ValidationError("obj_size must be >= min_size");
    if (!(p.min_dist > 0.0) || !std::isfinite(p.min_dist))
        throw ValidationError("min_dist must be positive");
    if (p.merge_dist && !(*p.merge_dist > 0.0))
        throw ValidationError("merge_dist must be positive");
}

namespace {

struct Offset {
    int dx, dy, dz;
};

// The 13 neighbors preceding a voxel in scan order.
constexpr std::array<Offset, 13> kBackwardNeighbors = {{
    {-1, -1, -1}, {0, -1, -1}, {1, -1, -1}, {-1, 0, -1}, {0, 0, -1}, {1, 0, -1}, {-1, 1, -1},
    {0, 1, -1}, {1, 1, -1}, {-1, -1, 0}, {0, -1, 0}, {1, -1, 0}, {-1, 0, 0},
}};

constexpr std::array<Offset, 26> make_full_neighborhood()
{
    std::array<Offset, 26> out{};
    std::size_t i = 0;
    for (int dz = -1; dz <= 1; ++dz)
        for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx)
                if (dx || dy || dz)
                    out[i++] = {dx, dy, dz};
    return out;
}
constexpr auto kNeighbors26 = make_full_neighborhood();

class DisjointSet {
public:
    std::uint32_t add()
    {
        parent_.push_back(static_cast<std::uint32_t>(parent_.size()));
        return parent_.back();
    }
    std::uint32_t find(std::uint32_t a)
    {
        while (parent_[a] != a) {
            parent_[a] = parent_[parent_[a]];
            a = parent_[a];
        }
        return a;
    }
    // Keeps the smaller root so each set is represented by its earliest member.
    void unite(std::uint32_t a, std::uint32_t b)
    {
        a = find(a);
        b = find(b);
        if (a == b)
            return;
        if (b < a)
            std::swap(a, b);
        parent_[b] = a;
    }

private:
    std::vector<std::uint32_t> parent_;
};

} // namespace

LabelMap label_components(const BinaryMask& mask)
{
    const Dimensions& d = mask.dims;
    validate(d);
    if (mask.bits.size() != d.voxel_count())
        throw ValidationError("mask buffer length does not match dimensions");

    std::vector<std::uint32_t> provisional(d.voxel_count(), 0);
    DisjointSet sets;
    sets.add(); // slot 0 is background

    for (std::size_t z = 0; z < d.nz; ++z) {
        for (std::size_t y = 0; y < d.ny; ++y) {
            for (std::size_t x = 0; x < d.nx; ++x) {
                const std::size_t idx = d.index(x, y, z);
                if (!mask.bits[idx])
                    continue;
                std::uint32_t label = 0;
                for (const auto& o : kBackwardNeighbors) {
                    const auto nx = static_cast<long long>(x) + o.dx;
                    const auto ny = static_cast<long long>(y) + o.dy;
                    const auto nz = static_cast<long long>(z) + o.dz;
                    if (!d.contains(nx, ny, nz))
                        continue;
                    const std::uint32_t nl = provisional[d.index(static_cast<std::size_t>(nx), static_cast<std::size_t>(ny),
                                                                 static_cast<std::size_t>(nz))];
                    if (nl == 0)
                        continue;
                    if (label == 0)
                        label = nl;
                    else
                        sets.unite(label, nl);
                }
                provisional[idx] = label ? label : sets.add();
            }
        }
    }

    for (auto& l : provisional)
        if (l)
            l = sets.find(l);
    LabelMap out(d, std::move(provisional));
    compact_labels(out);
    return out;
}

std::vector<std::vector<std::size_t>> label_voxels(const LabelMap& map)
{
    std::vector<std::vector<std::size_t>> out(static_cast<std::size_t>(map.max_label()) + 1);
    const auto labels = map.labels();
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (labels[i])
            out[labels[i]].push_back(i);
    return out;
}

DetectedObject object_stats(std::span<const std::size_t> voxels, const VolumeImage& vol)
{
    if (voxels.empty())
        throw ValidationError("object_stats on an empty voxel set");
    const Dimensions& d = vol.dims();
    DetectedObject obj;
    obj.size = voxels.size();
    const Voxel first = voxel_at(d, voxels.front());
    obj.bbox = {first.x, first.x, first.y, first.y, first.z, first.z};
    double wx = 0, wy = 0, wz = 0, gx = 0, gy = 0, gz = 0;
    for (std::size_t idx : voxels) {
        const Voxel v = voxel_at(d, idx);
        const double w = vol[idx];
        wx += w * static_cast<double>(v.x);
        wy += w * static_cast<double>(v.y);
        wz += w * static_cast<double>(v.z);
        gx += static_cast<double>(v.x);
        gy += static_cast<double>(v.y);
        gz += static_cast<double>(v.z);
        obj.total_intensity += w;
        obj.peak_intensity = std::max(obj.peak_intensity, vol[idx]);
        obj.bbox.xmin = std::min(obj.bbox.xmin, v.x);
        obj.bbox.xmax = std::max(obj.bbox.xmax, v.x);
        obj.bbox.ymin = std::min(obj.bbox.ymin, v.y);
        obj.bbox.ymax = std::max(obj.bbox.ymax, v.y);
        obj.bbox.zmin = std::min(obj.bbox.zmin, v.z);
        obj.bbox.zmax = std::max(obj.bbox.zmax, v.z);
    }
    const double n = static_cast<double>(obj.size);
    if (obj.total_intensity > 0.0)
        obj.centroid = {wx / obj.total_intensity, wy / obj.total_intensity, wz / obj.total_intensity};
    else
        obj.centroid = {gx / n, gy / n, gz / n}; // all-zero intensities: geometric centre
    obj.mean_intensity = obj.total_intensity / n;
    return obj;
}

std::vector<DetectedObject> compute_object_stats(const LabelMap& map, const VolumeImage& vol)
{
    if (!(map.dims() == vol.dims()))
        throw ValidationError("label map and volume dimensions differ");
    const auto groups = label_voxels(map);
    std::vector<DetectedObject> out;
    for (std::size_t label = 1; label < groups.size(); ++label) {
        if (groups[label].empty())
            continue;
        DetectedObject obj = object_stats(groups[label], vol);
        obj.id = static_cast<std::uint32_t>(label);
        out.push_back(obj);
    }
    return out;
}

std::vector<DetectedObject> classify_objects(std::vector<DetectedObject> objects, std::size_t obj_size, std::size_t min_size)
{
    if (min_size < 1 || obj_size < min_size)
        throw ValidationError("classification requires obj_size >= min_size >= 1");
    std::vector<DetectedObject> kept;
    kept.reserve(objects.size());
    for (auto& obj : objects) {
        if (obj.size < min_size)
            continue;
        if (obj.size > 3 * obj_size)
            obj.category = Category::Big;
        else if (obj.size >= obj_size)
            obj.category = Category::Normal;
        else
            obj.category = Category::Undersized;
        obj.parent_id.reset();
        kept.push_back(obj);
    }
    return kept;
}

std::size_t sub_object_count(std::size_t big_size, std::size_t obj_size)
{
    if (obj_size == 0)
        throw ValidationError("obj_size must be positive");
    return std::max<std::size_t>(2, (2 * big_size + obj_size) / (2 * obj_size));
}

namespace {

// Dense membership grid over the bounding box of a voxel set.
class LocalGrid {
public:
    LocalGrid(const Dimensions& dims, std::span<const std::size_t> voxels) : dims_(dims)
    {
        const Voxel f = voxel_at(dims, voxels.front());
        lo_ = hi_ = f;
        for (auto idx : voxels) {
            const Voxel v = voxel_at(dims, idx);
            lo_ = {std::min(lo_.x, v.x), std::min(lo_.y, v.y), std::min(lo_.z, v.z)};
            hi_ = {std::max(hi_.x, v.x), std::max(hi_.y, v.y), std::max(hi_.z, v.z)};
        }
        ex_ = static_cast<std::size_t>(hi_.x - lo_.x + 1);
        ey_ = static_cast<std::size_t>(hi_.y - lo_.y + 1);
        ez_ = static_cast<std::size_t>(hi_.z - lo_.z + 1);
        slot_.assign(ex_ * ey_ * ez_, kNone);
        for (std::size_t i = 0; i < voxels.size(); ++i)
            slot_[local(voxel_at(dims, voxels[i]))] = i;
    }

    static constexpr std::size_t kNone = static_cast<std::size_t>(-1);

    /// Position in the input voxel list, or kNone when outside the set.
    std::size_t position(const Voxel& v) const
    {
        if (v.x < lo_.x || v.y < lo_.y || v.z < lo_.z || v.x > hi_.x || v.y > hi_.y || v.z > hi_.z)
            return kNone;
        return slot_[local(v)];
    }

private:
    std::size_t local(const Voxel& v) const
    {
        return static_cast<std::size_t>(v.x - lo_.x) +
               ex_ * (static_cast<std::size_t>(v.y - lo_.y) + ey_ * static_cast<std::size_t>(v.z - lo_.z));
    }

    Dimensions dims_;
    Voxel lo_, hi_;
    std::size_t ex_ = 0, ey_ = 0, ez_ = 0;
    std::vector<std::size_t> slot_;
};

} // namespace

std::vector<SeedPoint> local_maxima(const VolumeImage& vol, std::span<const std::size_t> voxels)
{
    if (voxels.empty())
        throw ValidationError("local_maxima on an empty object");
    const Dimensions& d = vol.dims();
    const LocalGrid grid(d, voxels);

    std::vector<std::uint8_t> is_max(voxels.size(), 1);
    for (std::size_t i = 0; i < voxels.size(); ++i) {
        const Voxel v = voxel_at(d, voxels[i]);
        const std::uint16_t value = vol[voxels[i]];
        for (const auto& o : kNeighbors26) {
            const std::size_t j = grid.position({v.x + o.dx, v.y + o.dy, v.z + o.dz});
            if (j != LocalGrid::kNone && vol[voxels[j]] > value) {
                is_max[i] = 0;
                break;
            }
        }
    }

    // Collapse each connected equal-intensity plateau of maxima onto its first voxel.
    std::vector<std::uint8_t> seen(voxels.size(), 0);
    std::vector<std::size_t> order;
    std::vector<std::size_t> stack;
    for (std::size_t i = 0; i < voxels.size(); ++i) {
        if (!is_max[i] || seen[i])
            continue;
        order.push_back(i);
        seen[i] = 1;
        stack.assign(1, i);
        const std::uint16_t value = vol[voxels[i]];
        while (!stack.empty()) {
            const std::size_t cur = stack.back();
            stack.pop_back();
            const Voxel v = voxel_at(d, voxels[cur]);
            for (const auto& o : kNeighbors26) {
                const std::size_t j = grid.position({v.x + o.dx, v.y + o.dy, v.z + o.dz});
                if (j == LocalGrid::kNone || seen[j] || !is_max[j] || vol[voxels[j]] != value)
                    continue;
                seen[j] = 1;
                stack.push_back(j);
            }
        }
    }

    std::vector<SeedPoint> out;
    out.reserve(order.size());
    for (std::size_t i : order)
        out.push_back({voxel_at(d, voxels[i]), vol[voxels[i]]});
    std::stable_sort(out.begin(), out.end(), [](const SeedPoint& a, const SeedPoint& b) { return a.intensity > b.intensity; });
    return out;
}

bool seed_separation_ok(const SeedPoint& candidate, std::span<const SeedPoint> accepted, double d,
                        const DistanceMetric& metric)
{
    for (const auto& s : accepted) {
        const double dist = metric(candidate.position, s.position);
        const bool far = dist > d;
        const bool coplanar = dist > d / 2.0 && candidate.position.z == s.position.z;
        if (!far && !coplanar)
            return false;
    }
    return true;
}

std::vector<SeedPoint> find_distanced_maxima(const VolumeImage& vol, std::span<const std::size_t> voxels, std::size_t n,
                                             double d, const DistanceMetric& metric)
{
    if (n < 1)
        throw ValidationError("find_distanced_maxima needs n >= 1");
    if (!(d > 0.0))
        throw ValidationError("seed distance d must be positive");
    const auto candidates = local_maxima(vol, voxels);
    std::vector<SeedPoint> accepted;
    for (const auto& c : candidates) {
        if (accepted.size() == n)
            break;
        if (seed_separation_ok(c, accepted, d, metric))
            accepted.push_back(c);
    }
    return accepted;
}

std::vector<std::vector<std::size_t>> split_big_object(const Dimensions& dims, std::span<const std::size_t> voxels,
                                                       std::span<const SeedPoint> seeds, const DistanceMetric& metric)
{
    if (seeds.empty())
        throw ValidationError("split_big_object needs at least one seed");
    std::vector<std::vector<std::size_t>> parts(seeds.size());
    for (std::size_t idx : voxels) {
        const Voxel v = voxel_at(dims, idx);
        std::size_t best = 0;
        double best_d = metric(v, seeds[0].position);
        for (std::size_t s = 1; s < seeds.size(); ++s) {
            const double dist = metric(v, seeds[s].position);
            if (dist < best_d) {
                best_d = dist;
                best = s;
            }
        }
        parts[best].push_back(idx);
    }
    return parts;
}

namespace {

// Rebuilds the object list from the label map, carrying categories by label.
std::vector<DetectedObject> restat(const LabelMap& map, const VolumeImage& vol, const std::map<std::uint32_t, DetectedObject>& prior)
{
    auto objs = compute_object_stats(map, vol);
    for (auto& o : objs) {
        auto it = prior.find(o.id);
        if (it != prior.end()) {
            o.category = it->second.category;
            o.parent_id = it->second.parent_id;
        }
    }
    return objs;
}

// Compacts labels in scan order and renumbers the objects to match.
Segmentation finalize(LabelMap map, const VolumeImage& vol, const std::vector<DetectedObject>& objects)
{
    std::map<std::uint32_t, DetectedObject> by_old;
    for (const auto& o : objects)
        by_old[o.id] = o;
    const auto remap = compact_labels(map);
    std::map<std::uint32_t, DetectedObject> by_new;
    for (const auto& [old_id, o] : by_old)
        if (old_id < remap.size() && remap[old_id])
            by_new[remap[old_id]] = o;
    Segmentation seg{std::move(map), {}};
    seg.objects = restat(seg.labels, vol, by_new);
    return seg;
}

} // namespace

Segmentation merge_duplicate_labels(Segmentation seg, const VolumeImage& vol, double merge_dist, const DistanceMetric& metric)
{
    if (!(merge_dist > 0.0))
        throw ValidationError("merge_dist must be positive");
    if (!(seg.labels.dims() == vol.dims()))
        throw ValidationError("label map and volume dimensions differ");
    const Dimensions& d = vol.dims();

    while (true) {
        const std::uint32_t max_label = seg.labels.max_label();
        std::vector<const DetectedObject*> by_label(static_cast<std::size_t>(max_label) + 1, nullptr);
        for (const auto& o : seg.objects)
            if (o.id <= max_label)
                by_label[o.id] = &o;

        DisjointSet sets;
        for (std::uint32_t l = 0; l <= max_label; ++l)
            sets.add();
        bool merged = false;

        const auto labels = seg.labels.labels();
        for (std::size_t z = 0; z < d.nz; ++z)
            for (std::size_t y = 0; y < d.ny; ++y)
                for (std::size_t x = 0; x < d.nx; ++x) {
                    const std::uint32_t a = labels[d.index(x, y, z)];
                    if (!a)
                        continue;
                    for (const auto& o : kBackwardNeighbors) {
                        const auto nx = static_cast<long long>(x) + o.dx;
                        const auto ny = static_cast<long long>(y) + o.dy;
                        const auto nz = static_cast<long long>(z) + o.dz;
                        if (!d.contains(nx, ny, nz))
                            continue;
                        const std::uint32_t b = labels[d.index(static_cast<std::size_t>(nx), static_cast<std::size_t>(ny),
                                                               static_cast<std::size_t>(nz))];
                        if (!b || b == a || sets.find(a) == sets.find(b))
                            continue;
                        if (!by_label[a] || !by_label[b])
                            continue;
                        if (metric(by_label[a]->centroid, by_label[b]->centroid) <= merge_dist) {
                            sets.unite(a, b);
                            merged = true;
                        }
                    }
                }
        if (!merged)
            break;

        // The merged object inherits category and parent from its largest member.
        std::map<std::uint32_t, DetectedObject> prior;
        for (const auto& o : seg.objects) {
            const std::uint32_t root = sets.find(o.id);
            auto it = prior.find(root);
            if (it == prior.end() || o.size > it->second.size || (o.size == it->second.size && o.id < it->second.id))
                prior[root] = o;
        }
        for (auto& l : seg.labels.labels())
            if (l)
                l = sets.find(l);
        seg.objects = restat(seg.labels, vol, prior);
    }
    return finalize(std::move(seg.labels), vol, seg.objects);
}

Segmentation detect_objects(const VolumeImage& vol, const DetectionParams& params, unsigned threads)
{
    validate(params);
    const Dimensions& d = vol.dims();
    const DistanceMetric metric = params.use_physical_distance ? DistanceMetric::physical(vol.spacing()) : DistanceMetric::voxel();

    // First round: condition, binarize per slice, label, measure, classify.
    const VolumeImage conditioned = condition(vol, params.preprocess);
    LabelMap labels = label_components(binarize_per_slice(conditioned, params.preprocess.c2, threads));
    auto objects = classify_objects(compute_object_stats(labels, vol), params.obj_size, params.min_size);

    std::vector<std::uint8_t> keep(static_cast<std::size_t>(labels.max_label()) + 1, 0);
    for (const auto& o : objects)
        keep[o.id] = 1;
    for (auto& l : labels.labels())
        if (!keep[l])
            l = 0;

    // Second round: split each Big object around distance-constrained maxima.
    std::vector<const DetectedObject*> bigs;
    for (const auto& o : objects)
        if (o.category == Category::Big)
            bigs.push_back(&o);
    const auto groups = label_voxels(labels);
    std::vector<std::vector<std::vector<std::size_t>>> parts(bigs.size());
    parallel_for(bigs.size(), threads, [&](std::size_t i) {
        const auto& voxels = groups[bigs[i]->id];
        const std::size_t n = sub_object_count(bigs[i]->size, params.obj_size);
        const auto seeds = find_distanced_maxima(conditioned, voxels, n, params.min_dist, metric);
        parts[i] = split_big_object(d, voxels, seeds, metric);
    });

    std::map<std::uint32_t, DetectedObject> prior;
    for (const auto& o : objects)
        if (o.category != Category::Big)
            prior[o.id] = o;
    std::uint32_t next = labels.max_label();
    for (std::size_t i = 0; i < bigs.size(); ++i) {
        for (const auto& part : parts[i]) {
            if (part.empty())
                continue;
            const std::uint32_t label = ++next;
            for (std::size_t idx : part)
                labels[idx] = label;
            DetectedObject sub;
            sub.id = label;
            sub.category = Category::Sub;
            sub.parent_id = bigs[i]->id;
            prior[label] = sub;
        }
    }

    Segmentation seg{labels, restat(labels, vol, prior)};
    return merge_duplicate_labels(std::move(seg), vol, params.effective_merge_dist(), metric);
}

Segmentation detect_baseline(const VolumeImage& vol, std::size_t min_size)
{
    if (min_size < 1)
        throw ValidationError("min_size must be >= 1");
    const double t = otsu_threshold(histogram(vol.voxels()));
    const Dimensions& d = vol.dims();
    BinaryMask mask{d, std::vector<std::uint8_t>(d.voxel_count(), 0)};
    for (std::size_t i = 0; i < mask.bits.size(); ++i)
        mask.bits[i] = static_cast<double>(vol[i]) >= t ? 1 : 0;
    LabelMap labels = label_components(mask);
    auto objects = compute_object_stats(labels, vol);
    std::vector<std::uint8_t> keep(static_cast<std::size_t>(labels.max_label()) + 1, 0);
    for (const auto& o : objects)
        if (o.size >= min_size)
            keep[o.id] = 1;
    for (auto& l : labels.labels())
        if (!keep[l])
            l = 0;
    std::vector<DetectedObject> kept;
    for (const auto& o : objects)
        if (keep[o.id])
            kept.push_back(o);
    return finalize(std::move(labels), vol, kept);
}

} // namespace oscos
