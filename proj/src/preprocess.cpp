#include "oscos/preprocess.hpp"

#include <algorithm>
#include <cmath>

#include "oscos/parallel.hpp"

namespace oscos {

void validate(const PreprocessParams& p)
{
    if (!(p.sigma_xy >= 0.0) || !(p.sigma_z >= 0.0))
        throw ValidationError("smoothing sigmas must be >= 0");
    if (!(p.clip_low_pct >= 0.0) || !(p.clip_high_pct <= 100.0) || !(p.clip_low_pct < p.clip_high_pct))
        throw ValidationError("clip percentiles must satisfy 0 <= low < high <= 100");
    if (!(p.c2 > 0.0) || !std::isfinite(p.c2))
        throw ValidationError("c2 must be a positive finite number");
}

std::size_t BinaryMask::count() const
{
    return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
}

Histogram histogram(std::span<const std::uint16_t> values)
{
    Histogram h(kHistogramBins, 0);
    for (auto v : values)
        ++h[v];
    return h;
}

std::vector<double> gaussian_kernel(double sigma)
{
    if (sigma <= 0.0)
        return {1.0};
    const auto radius = static_cast<std::ptrdiff_t>(std::ceil(3.0 * sigma));
    std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
    double sum = 0.0;
    for (std::ptrdiff_t i = -radius; i <= radius; ++i) {
        const double w = std::exp(-0.5 * static_cast<double>(i * i) / (sigma * sigma));
        k[static_cast<std::size_t>(i + radius)] = w;
        sum += w;
    }
    for (auto& w : k)
        w /= sum;
    return k;
}

namespace {

// Convolves `data` in place along axis 0 (x), 1 (y) or 2 (z).
void convolve_axis(std::vector<double>& data, const Dimensions& d, int axis, const std::vector<double>& kernel)
{
    if (kernel.size() == 1)
        return;
    const std::size_t extent = axis == 0 ? d.nx : axis == 1 ? d.ny : d.nz;
    const std::size_t stride = axis == 0 ? 1 : axis == 1 ? d.nx : d.slice_size();
    const auto radius = static_cast<std::ptrdiff_t>(kernel.size() / 2);
    const auto last = static_cast<std::ptrdiff_t>(extent) - 1;

    std::vector<double> line(extent), out(extent);
    for (std::size_t z = 0; z < (axis == 2 ? 1 : d.nz); ++z) {
        for (std::size_t y = 0; y < (axis == 1 ? 1 : d.ny); ++y) {
            for (std::size_t x = 0; x < (axis == 0 ? 1 : d.nx); ++x) {
                const std::size_t start = d.index(x, y, z);
                for (std::size_t i = 0; i < extent; ++i)
                    line[i] = data[start + i * stride];
                for (std::ptrdiff_t i = 0; i <= last; ++i) {
                    double acc = 0.0;
                    for (std::ptrdiff_t k = -radius; k <= radius; ++k) {
                        const std::ptrdiff_t j = std::clamp<std::ptrdiff_t>(i - k, 0, last);
                        acc += kernel[static_cast<std::size_t>(k + radius)] * line[static_cast<std::size_t>(j)];
                    }
                    out[static_cast<std::size_t>(i)] = acc;
                }
                for (std::size_t i = 0; i < extent; ++i)
                    data[start + i * stride] = out[i];
            }
        }
    }
}

std::uint16_t round_to_u16(double v)
{
    return static_cast<std::uint16_t>(std::clamp(std::nearbyint(v), 0.0, 65535.0));
}

} // namespace

VolumeImage gaussian_smooth(const VolumeImage& vol, double sigma_xy, double sigma_z)
{
    if (sigma_xy < 0.0 || sigma_z < 0.0)
        throw ValidationError("smoothing sigmas must be >= 0");
    if (sigma_xy == 0.0 && sigma_z == 0.0)
        return vol;

    const Dimensions& d = vol.dims();
    std::vector<double> work(vol.voxels().begin(), vol.voxels().end());
    const auto kxy = gaussian_kernel(sigma_xy);
    convolve_axis(work, d, 0, kxy);
    convolve_axis(work, d, 1, kxy);
    convolve_axis(work, d, 2, gaussian_kernel(sigma_z));

    std::vector<std::uint16_t> out(work.size());
    std::transform(work.begin(), work.end(), out.begin(), round_to_u16);
    return VolumeImage(d, vol.spacing(), std::move(out));
}

std::uint16_t percentile(const VolumeImage& vol, double pct)
{
    if (!(pct >= 0.0 && pct <= 100.0))
        throw ValidationError("percentile must lie in [0,100]");
    const Histogram h = histogram(vol.voxels());
    const std::size_t n = vol.voxels().size();
    const auto rank = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(pct / 100.0 * static_cast<double>(n))));
    std::size_t cum = 0;
    for (std::size_t v = 0; v < kHistogramBins; ++v) {
        cum += h[v];
        if (cum >= rank)
            return static_cast<std::uint16_t>(v);
    }
    return 65535;
}

VolumeImage clip(const VolumeImage& vol, double clip_low_pct, double clip_high_pct)
{
    if (!(clip_low_pct >= 0.0) || !(clip_high_pct <= 100.0) || !(clip_low_pct < clip_high_pct))
        throw ValidationError("clip percentiles must satisfy 0 <= low < high <= 100");
    const std::uint16_t lo = percentile(vol, clip_low_pct);
    const std::uint16_t hi = percentile(vol, clip_high_pct);
    std::vector<std::uint16_t> out(vol.voxels().begin(), vol.voxels().end());
    for (auto& v : out)
        v = std::clamp(v, lo, hi);
    return VolumeImage(vol.dims(), vol.spacing(), std::move(out));
}

std::uint16_t otsu_threshold(std::span<const std::uint64_t> hist)
{
    if (hist.size() != kHistogramBins)
        throw ValidationError("otsu_threshold expects a 65536-bin histogram");
    std::uint64_t total = 0, total_sum = 0;
    for (std::size_t k = 0; k < hist.size(); ++k) {
        total += hist[k];
        total_sum += hist[k] * k;
    }
    if (total == 0)
        throw ValidationError("otsu_threshold on an empty histogram");

    const double n = static_cast<double>(total);
    std::uint64_t n0 = 0, s0 = 0;
    std::size_t best_t = 0;
    double best_v = -1.0;
    // Between populated bins the class split is unchanged, so only populated
    // bins need evaluating; strict '>' keeps the smallest maximizing t.
    for (std::size_t k = 0; k < hist.size(); ++k) {
        if (hist[k] == 0)
            continue;
        n0 += hist[k];
        s0 += hist[k] * k;
        const std::uint64_t n1 = total - n0;
        double v = 0.0;
        if (n1 > 0) {
            const double w0 = static_cast<double>(n0) / n;
            const double w1 = static_cast<double>(n1) / n;
            const double mu0 = static_cast<double>(s0) / static_cast<double>(n0);
            const double mu1 = static_cast<double>(total_sum - s0) / static_cast<double>(n1);
            v = w0 * w1 * (mu0 - mu1) * (mu0 - mu1);
        }
        if (v > best_v) {
            best_v = v;
            best_t = k;
        }
    }
    return static_cast<std::uint16_t>(best_t);
}

std::vector<double> slice_thresholds(const VolumeImage& vol, double c2, unsigned threads)
{
    if (!(c2 > 0.0))
        throw ValidationError("c2 must be positive");
    const std::size_t nz = vol.dims().nz;
    std::vector<double> t(nz);
    parallel_for(nz, threads, [&](std::size_t z) { t[z] = static_cast<double>(otsu_threshold(histogram(vol.slice(z)))) * c2; });
    return t;
}

BinaryMask binarize_per_slice(const VolumeImage& vol, double c2, unsigned threads)
{
    const auto thresholds = slice_thresholds(vol, c2, threads);
    const Dimensions& d = vol.dims();
    BinaryMask mask{d, std::vector<std::uint8_t>(d.voxel_count(), 0)};
    parallel_for(d.nz, threads, [&](std::size_t z) {
        const std::size_t base = z * d.slice_size();
        for (std::size_t i = 0; i < d.slice_size(); ++i)
            mask.bits[base + i] = static_cast<double>(vol[base + i]) >= thresholds[z] ? 1 : 0;
    });
    return mask;
}

VolumeImage condition(const VolumeImage& vol, const PreprocessParams& params)
{
    validate(params);
    VolumeImage out = gaussian_smooth(vol, params.sigma_xy, params.sigma_z);
    if (params.clip_low_pct > 0.0 || params.clip_high_pct < 100.0)
        out = clip(out, params.clip_low_pct, params.clip_high_pct);
    return out;
}

} // namespace oscos
