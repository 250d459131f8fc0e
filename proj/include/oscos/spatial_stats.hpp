#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "oscos/segmentation.hpp"

namespace oscos {

struct NearestNeighbor {
    std::uint32_t id = 0;
    /// Closest other object; the lowest id wins among equal distances.
    std::uint32_t nn_id = 0;
    double distance = 0.0;
};

struct NNSummary {
    double mean = 0.0;
    double median = 0.0;
    double min = 0.0;
    double max = 0.0;
    /// Population standard deviation.
    double stddev = 0.0;
};

struct NNReport {
    std::vector<NearestNeighbor> neighbors;
    /// Absent when fewer than two objects exist.
    std::optional<NNSummary> summary;
    std::size_t object_count = 0;
    double mean_size = 0.0;
    double mean_intensity = 0.0;
};

/// All-pairs nearest-neighbour distances between object centroids. With
/// `use_physical` the coordinates are scaled by `spacing` first.
NNReport nearest_neighbor_distances(std::span<const DetectedObject> objects, const VoxelSpacing& spacing = {},
                                    bool use_physical = false);

/// CSV: id,nn_id,nn_distance
void write_nn_csv(std::ostream& out, const NNReport& report);
void save_nn_csv(const std::filesystem::path& path, const NNReport& report);
/// key=value lines: object_count, mean_size, mean_intensity, nn_mean, nn_median, nn_min, nn_max, nn_stddev.
void write_nn_summary(std::ostream& out, const NNReport& report);

} // namespace oscos
