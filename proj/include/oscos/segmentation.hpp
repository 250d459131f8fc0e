#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "oscos/preprocess.hpp"
#include "oscos/volume.hpp"

namespace oscos {

struct Point3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    friend bool operator==(const Point3&, const Point3&) = default;
};

/// Euclidean distance with optional per-axis scaling (voxel units when all scales are 1).
struct DistanceMetric {
    double scale_x = 1.0;
    double scale_y = 1.0;
    double scale_z = 1.0;

    static DistanceMetric voxel() { return {}; }
    static DistanceMetric physical(const VoxelSpacing& s) { return {s.sx, s.sy, s.sz}; }

    double operator()(const Point3& a, const Point3& b) const;
    double operator()(const Voxel& a, const Voxel& b) const;
};

enum class Category { Normal, Big, Sub, Undersized, Manual };

std::string_view to_string(Category c);
/// Throws ValidationError on an unknown name.
Category parse_category(std::string_view name);

struct BoundingBox {
    std::int64_t xmin = 0, xmax = 0;
    std::int64_t ymin = 0, ymax = 0;
    std::int64_t zmin = 0, zmax = 0;

    bool contains(const Point3& p) const
    {
        return p.x >= static_cast<double>(xmin) && p.x <= static_cast<double>(xmax) && p.y >= static_cast<double>(ymin) &&
               p.y <= static_cast<double>(ymax) && p.z >= static_cast<double>(zmin) && p.z <= static_cast<double>(zmax);
    }
    friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

struct DetectedObject {
    std::uint32_t id = 0;
    std::size_t size = 0;
    /// Intensity-weighted mean position in voxel coordinates.
    Point3 centroid;
    BoundingBox bbox;
    double mean_intensity = 0.0;
    double total_intensity = 0.0;
    std::uint16_t peak_intensity = 0;
    Category category = Category::Normal;
    /// First-round label of the Big object a Sub was carved from.
    std::optional<std::uint32_t> parent_id;

    friend bool operator==(const DetectedObject&, const DetectedObject&) = default;
};

struct DetectionParams {
    PreprocessParams preprocess;
    /// Expected object volume in voxels.
    std::size_t obj_size = 20;
    /// Minimum seed separation d.
    double min_dist = 5.0;
    /// Noise floor; smaller components are dropped.
    std::size_t min_size = 4;
    bool use_physical_distance = false;
    /// Centroid distance below which adjacent labels are merged; defaults to min_dist / 2.
    std::optional<double> merge_dist;

    double effective_merge_dist() const { return merge_dist.value_or(min_dist / 2.0); }
    friend bool operator==(const DetectionParams&, const DetectionParams&) = default;
};

void validate(const DetectionParams& params);

struct SeedPoint {
    Voxel position;
    std::uint16_t intensity = 0;

    friend bool operator==(const SeedPoint&, const SeedPoint&) = default;
};

/// A label map together with the object list describing it; object ids equal label values.
struct Segmentation {
    LabelMap labels;
    std::vector<DetectedObject> objects;
};

/// 26-connected component labeling. Labels are assigned 1..K in scan order of
/// each component's first voxel (x fastest, then y, then z).
LabelMap label_components(const BinaryMask& mask);

/// Flat voxel indices of each label, in scan order; entry 0 is unused.
std::vector<std::vector<std::size_t>> label_voxels(const LabelMap& map);

/// One entry per label present, ordered by id. Categories default to Normal.
std::vector<DetectedObject> compute_object_stats(const LabelMap& map, const VolumeImage& vol);

/// Stats for an explicit voxel set.
DetectedObject object_stats(std::span<const std::size_t> voxels, const VolumeImage& vol);

/// Assigns Normal/Big/Undersized and drops objects below min_size.
std::vector<DetectedObject> classify_objects(std::vector<DetectedObject> objects, std::size_t obj_size, std::size_t min_size);

/// N = max(2, round-half-up(big_size / obj_size)).
std::size_t sub_object_count(std::size_t big_size, std::size_t obj_size);

/// In-object local maxima (no 26-neighbor inside the object is brighter), one per
/// equal-intensity plateau, ordered by decreasing intensity then scan order.
/// `voxels` must be in scan order (as produced by label_voxels).
std::vector<SeedPoint> local_maxima(const VolumeImage& vol, std::span<const std::size_t> voxels);

/// Up to `n` seeds chosen greedily from local_maxima: a candidate is accepted when,
/// against every accepted seed, the distance exceeds d, or exceeds d/2 on the same slice.
std::vector<SeedPoint> find_distanced_maxima(const VolumeImage& vol, std::span<const std::size_t> voxels, std::size_t n,
                                             double d, const DistanceMetric& metric = {});

/// True when `candidate` may join `accepted` under the seed separation rule.
bool seed_separation_ok(const SeedPoint& candidate, std::span<const SeedPoint> accepted, double d,
                        const DistanceMetric& metric);

/// Partitions `voxels` by nearest seed; ties go to the earlier seed.
/// Result[i] holds the voxels assigned to seeds[i], in input order.
std::vector<std::vector<std::size_t>> split_big_object(const Dimensions& dims, std::span<const std::size_t> voxels,
                                                       std::span<const SeedPoint> seeds,
                                                       const DistanceMetric& metric = {});

/// Merges 26-adjacent objects whose centroids lie within merge_dist, repeating
/// until no pair qualifies. Merged objects take the category of their largest
/// member. Labels are recompacted in scan order.
Segmentation merge_duplicate_labels(Segmentation seg, const VolumeImage& vol, double merge_dist,
                                    const DistanceMetric& metric = {});

/// Full two-round detection on one channel.
Segmentation detect_objects(const VolumeImage& vol, const DetectionParams& params, unsigned threads = 1);

/// Reference detector: one Otsu threshold over the whole volume, 26-connected
/// labeling and the min_size floor; no per-slice adaptation and no splitting.
Segmentation detect_baseline(const VolumeImage& vol, std::size_t min_size);

// Object table CSV:
// id,category,parent_id,size,cx,cy,cz,xmin,xmax,ymin,ymax,zmin,zmax,mean_intensity,total_intensity,peak_intensity

void write_objects_csv(std::ostream& out, std::span<const DetectedObject> objects);
void save_objects_csv(const std::filesystem::path& path, std::span<const DetectedObject> objects);
std::vector<DetectedObject> read_objects_csv(std::istream& in);
std::vector<DetectedObject> load_objects_csv(const std::filesystem::path& path);

} // namespace oscos
