#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "oscos/segmentation.hpp"

namespace oscos {

/// One object of channel A matched with one object of channel B.
struct ColocPair {
    std::uint32_t id_a = 0;
    std::uint32_t id_b = 0;
    double centroid_distance = 0.0;
    std::size_t overlap_voxels = 0;

    friend bool operator==(const ColocPair&, const ColocPair&) = default;
};

/// One-to-one greedy matching by ascending centroid distance among pairs within
/// `radius`; equal distances resolve by (id_a, id_b). Output sorted by (id_a, id_b).
std::vector<ColocPair> colocalize_by_centroid(std::span<const DetectedObject> a, std::span<const DetectedObject> b,
                                              double radius, const DistanceMetric& metric = {});

/// Every label pair sharing at least `min_overlap` voxels. The reported distance is
/// between geometric label centroids. Output sorted by (id_a, id_b).
std::vector<ColocPair> colocalize_by_overlap(const LabelMap& a, const LabelMap& b, std::size_t min_overlap,
                                             const DistanceMetric& metric = {});

/// CSV: id_a,id_b,centroid_distance,overlap_voxels
void write_coloc_csv(std::ostream& out, std::span<const ColocPair> pairs);
void save_coloc_csv(const std::filesystem::path& path, std::span<const ColocPair> pairs);

} // namespace oscos
