#include "oscos/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>

#include "oscos/csv.hpp"

namespace oscos {

std::string noise_label(int level)
{
    std::ostringstream s;
    s << 'N' << std::setw(2) << std::setfill('0') << level;
    return s.str();
}

void validate(const PhantomSpec& s)
{
    validate(s.dims);
    validate(s.spacing);
    if (!(s.min_center_separation > 0.0))
        throw ValidationError("min_center_separation must be positive");
    if (!(s.spot_sigma_xy > 0.0) || !(s.spot_sigma_z > 0.0))
        throw ValidationError("spot sigmas must be positive");
    if (!(s.amplitude_min >= 0.0) || !(s.amplitude_max >= s.amplitude_min))
        throw ValidationError("amplitude range must satisfy 0 <= min <= max");
    if (!(s.background_level >= 0.0 && s.background_level <= 65535.0))
        throw ValidationError("background level must lie in [0, 65535]");
    if (s.noise_level < 0 || s.noise_level > 50)
        throw ValidationError("noise level must lie in [0, 50]");
}

double PortableRng::uniform()
{
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

std::int64_t PortableRng::uniform_int(std::int64_t lo, std::int64_t hi)
{
    const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
    // Rejection keeps the draw unbiased and independent of any library distribution.
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % span;
    std::uint64_t r;
    do {
        r = engine_();
    } while (r >= limit);
    return lo + static_cast<std::int64_t>(r % span);
}

double PortableRng::normal()
{
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u1;
    do {
        u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
}

GroundTruth place_spots(const PhantomSpec& spec)
{
    validate(spec);
    const auto margin_xy = static_cast<std::int64_t>(std::ceil(3.0 * spec.spot_sigma_xy));
    const auto margin_z = static_cast<std::int64_t>(std::ceil(3.0 * spec.spot_sigma_z));
    const auto nx = static_cast<std::int64_t>(spec.dims.nx);
    const auto ny = static_cast<std::int64_t>(spec.dims.ny);
    const auto nz = static_cast<std::int64_t>(spec.dims.nz);
    if (spec.n_objects > 0 && (nx - 1 - margin_xy < margin_xy || ny - 1 - margin_xy < margin_xy || nz - 1 - margin_z < margin_z))
        throw ValidationError("volume too small to keep spots 3 sigma away from the borders");

    PortableRng rng(spec.rng_seed);
    GroundTruth truth;
    constexpr std::size_t kMaxAttempts = 1'000'000;
    std::size_t attempts = 0;
    const double min_sep2 = spec.min_center_separation * spec.min_center_separation;
    while (truth.size() < spec.n_objects) {
        if (++attempts > kMaxAttempts)
            throw ValidationError("could not place " + std::to_string(spec.n_objects) + " spots with separation " +
                                  std::to_string(spec.min_center_separation) + " (placed " + std::to_string(truth.size()) + ")");
        const Point3 c{static_cast<double>(rng.uniform_int(margin_xy, nx - 1 - margin_xy)),
                       static_cast<double>(rng.uniform_int(margin_xy, ny - 1 - margin_xy)),
                       static_cast<double>(rng.uniform_int(margin_z, nz - 1 - margin_z))};
        const double amplitude = spec.amplitude_min + (spec.amplitude_max - spec.amplitude_min) * rng.uniform();
        const bool clear = std::none_of(truth.begin(), truth.end(), [&](const TruthSpot& t) {
            const double dx = t.center.x - c.x, dy = t.center.y - c.y, dz = t.center.z - c.z;
            return dx * dx + dy * dy + dz * dz < min_sep2;
        });
        if (clear)
            truth.push_back({static_cast<std::uint32_t>(truth.size() + 1), c, amplitude, spec.spot_sigma_xy, spec.spot_sigma_z});
    }
    return truth;
}

std::vector<double> render_clean(const PhantomSpec& spec, const GroundTruth& truth)
{
    const Dimensions& d = spec.dims;
    std::vector<double> clean(d.voxel_count(), spec.background_level);
    for (const auto& t : truth) {
        const auto rxy = static_cast<std::int64_t>(std::ceil(4.0 * t.sigma_xy));
        const auto rz = static_cast<std::int64_t>(std::ceil(4.0 * t.sigma_z));
        const auto cx = static_cast<std::int64_t>(std::lround(t.center.x));
        const auto cy = static_cast<std::int64_t>(std::lround(t.center.y));
        const auto cz = static_cast<std::int64_t>(std::lround(t.center.z));
        for (std::int64_t z = std::max<std::int64_t>(0, cz - rz); z <= std::min<std::int64_t>(d.nz - 1, cz + rz); ++z)
            for (std::int64_t y = std::max<std::int64_t>(0, cy - rxy); y <= std::min<std::int64_t>(d.ny - 1, cy + rxy); ++y)
                for (std::int64_t x = std::max<std::int64_t>(0, cx - rxy); x <= std::min<std::int64_t>(d.nx - 1, cx + rxy); ++x) {
                    const double dx = static_cast<double>(x) - t.center.x;
                    const double dy = static_cast<double>(y) - t.center.y;
                    const double dz = static_cast<double>(z) - t.center.z;
                    clean[d.index(static_cast<std::size_t>(x), static_cast<std::size_t>(y), static_cast<std::size_t>(z))] +=
                        t.amplitude * std::exp(-(dx * dx + dy * dy) / (2.0 * t.sigma_xy * t.sigma_xy) -
                                               dz * dz / (2.0 * t.sigma_z * t.sigma_z));
                }
    }
    return clean;
}

namespace {

VolumeImage quantize_with_noise(const PhantomSpec& spec, const std::vector<double>& clean, int level)
{
    std::vector<std::uint16_t> out(clean.size());
    const double sigma = level / 100.0 * spec.mean_amplitude();
    if (sigma > 0.0) {
        const auto seed = spec.rng_seed;
        std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                          static_cast<std::uint32_t>(level), 0x6e6f6973u};
        PortableRng rng(seq);
        for (std::size_t i = 0; i < clean.size(); ++i)
            out[i] = static_cast<std::uint16_t>(std::clamp(std::nearbyint(clean[i] + sigma * rng.normal()), 0.0, 65535.0));
    } else {
        for (std::size_t i = 0; i < clean.size(); ++i)
            out[i] = static_cast<std::uint16_t>(std::clamp(std::nearbyint(clean[i]), 0.0, 65535.0));
    }
    return VolumeImage(spec.dims, spec.spacing, std::move(out));
}

} // namespace

Phantom generate_phantom(const PhantomSpec& spec)
{
    GroundTruth truth = place_spots(spec);
    const auto clean = render_clean(spec, truth);
    return {spec.noise_level, quantize_with_noise(spec, clean, spec.noise_level), std::move(truth)};
}

std::vector<Phantom> noise_series(const PhantomSpec& spec)
{
    const GroundTruth truth = place_spots(spec);
    const auto clean = render_clean(spec, truth);
    std::vector<Phantom> out;
    for (int level : kNoiseLevels)
        out.push_back({level, quantize_with_noise(spec, clean, level), truth});
    return out;
}

void write_truth_csv(std::ostream& out, const GroundTruth& truth)
{
    out << "id,cx,cy,cz,amplitude,sigma_xy,sigma_z\n" << std::fixed << std::setprecision(4);
    for (const auto& t : truth)
        out << t.id << ',' << t.center.x << ',' << t.center.y << ',' << t.center.z << ',' << t.amplitude << ',' << t.sigma_xy
            << ',' << t.sigma_z << '\n';
}

void save_truth_csv(const std::filesystem::path& path, const GroundTruth& truth)
{
    std::ofstream out(path);
    if (!out)
        throw IoError("cannot write " + path.string());
    write_truth_csv(out, truth);
}

GroundTruth read_truth_csv(std::istream& in)
{
    const CsvTable table = read_csv(in, "ground truth");
    GroundTruth truth;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const CsvRow row{table, r};
        TruthSpot t;
        t.id = static_cast<std::uint32_t>(row.get_uint("id"));
        t.center = {row.get_double("cx"), row.get_double("cy"), row.get_double("cz")};
        t.amplitude = row.has("amplitude") ? row.get_double("amplitude") : 0.0;
        t.sigma_xy = row.has("sigma_xy") ? row.get_double("sigma_xy") : 0.0;
        t.sigma_z = row.has("sigma_z") ? row.get_double("sigma_z") : 0.0;
        truth.push_back(t);
    }
    return truth;
}

GroundTruth load_truth_csv(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot read " + path.string());
    return read_truth_csv(in);
}

} // namespace oscos
