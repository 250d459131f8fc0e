#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "oscos/volume.hpp"

namespace oscos {

/// Image conditioning knobs. Sigmas of 0 disable smoothing on that axis.
struct PreprocessParams {
    double sigma_xy = 0.0;
    double sigma_z = 0.0;
    double clip_low_pct = 96.0;
    double clip_high_pct = 100.0;
    /// Multiplier applied to each slice's Otsu threshold.
    double c2 = 1.0001;

    friend bool operator==(const PreprocessParams&, const PreprocessParams&) = default;
};

void validate(const PreprocessParams& params);

/// Foreground indicator grid, same layout as VolumeImage.
struct BinaryMask {
    Dimensions dims;
    std::vector<std::uint8_t> bits;

    std::size_t count() const;
    friend bool operator==(const BinaryMask&, const BinaryMask&) = default;
};

constexpr std::size_t kHistogramBins = 65536;
using Histogram = std::vector<std::uint64_t>;

Histogram histogram(std::span<const std::uint16_t> values);

/// Normalized 1D Gaussian kernel of radius ceil(3*sigma); {1} when sigma is 0.
std::vector<double> gaussian_kernel(double sigma);

/// Separable Gaussian blur with clamp-to-border edges; rounds once at the end.
VolumeImage gaussian_smooth(const VolumeImage& vol, double sigma_xy, double sigma_z);

/// Nearest-rank percentile (p in [0,100]) over all voxels.
std::uint16_t percentile(const VolumeImage& vol, double pct);

/// Saturates intensities to the [low, high] nearest-rank percentile values.
VolumeImage clip(const VolumeImage& vol, double clip_low_pct, double clip_high_pct);

/// Otsu's threshold over a 65536-bin histogram.
///
/// Classes are {<= t} and {> t}. Only thresholds at or above the lowest populated
/// intensity are candidates (class 0 must be nonempty); among equal between-class
/// variances the smallest t wins, so a single-valued histogram yields that value.
std::uint16_t otsu_threshold(std::span<const std::uint64_t> histogram);

/// Per-slice threshold T_i = otsu(slice i) * c2 used by binarize_per_slice.
std::vector<double> slice_thresholds(const VolumeImage& vol, double c2, unsigned threads = 1);

/// Marks voxel (x,y,i) foreground iff f(x,y,i) >= otsu(slice i) * c2.
BinaryMask binarize_per_slice(const VolumeImage& vol, double c2, unsigned threads = 1);

/// Applies smoothing and clipping in that order.
VolumeImage condition(const VolumeImage& vol, const PreprocessParams& params);

} // namespace oscos
