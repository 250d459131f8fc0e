#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <vector>

#include "oscos/segmentation.hpp"
#include "oscos/spatial_stats.hpp"

namespace oscos {

/// A mutation was conditioned on a state version that is no longer current.
class VersionConflict : public Error {
public:
    using Error::Error;
};

struct EditEntry {
    enum class Kind { Add, Delete, Rerun };
    Kind kind = Kind::Add;
    Voxel position;           // Add
    std::uint32_t id = 0;     // Add (assigned id) and Delete
    DetectionParams params;   // Rerun
    std::chrono::system_clock::time_point timestamp;
};

/// Everything a replay must reproduce.
struct SessionState {
    DetectionParams params;
    /// Automatic and manual objects, ordered by id. Manual objects carry Category::Manual.
    std::vector<DetectedObject> objects;
    /// Automatic objects only; manual objects have no segmented support.
    LabelMap labels;
    std::uint32_t next_id = 1;
    std::uint64_t version = 0;
};

struct SessionMeta {
    Dimensions dims;
    VoxelSpacing spacing;
    std::uint16_t min_intensity = 0;
    std::uint16_t max_intensity = 0;
    DetectionParams params;
    std::size_t object_count = 0;
    std::uint64_t state_version = 0;
};

struct OverlayObject {
    DetectedObject object;
    /// Radius of the sphere with the object's volume.
    double radius = 0.0;
};

struct RerunSummary {
    std::size_t object_count = 0;
    std::size_t automatic_count = 0;
    std::size_t manual_count = 0;
    double runtime_seconds = 0.0;
    std::uint64_t state_version = 0;
};

/// Linear window mapping of one slice to 8-bit gray: low -> 0, high -> 255.
std::vector<std::uint8_t> render_slice(const VolumeImage& vol, std::size_t z, double window_low, double window_high);

/// One volume under curation. Readers share a lock; mutations are serialized and
/// a rerun computes its segmentation without blocking readers.
///
/// Mutating calls accept an optional expected state version and throw
/// VersionConflict when it differs from the current one.
class Session {
public:
    Session(VolumeImage volume, DetectionParams params, unsigned threads = 1);

    /// Rebuilds a session by applying `log` to a fresh session.
    static std::unique_ptr<Session> replay(VolumeImage volume, DetectionParams initial_params,
                                           const std::vector<EditEntry>& log, unsigned threads = 1);

    const VolumeImage& volume() const { return volume_; }
    const DetectionParams& initial_params() const { return initial_params_; }

    SessionMeta meta() const;
    SessionState state() const;
    std::vector<EditEntry> edit_log() const;
    std::uint64_t version() const;

    /// PNG bytes. Throws NotFoundError for z outside the volume.
    std::vector<std::uint8_t> slice_png(std::size_t z, double window_low, double window_high) const;
    std::vector<OverlayObject> list_objects(std::optional<std::size_t> z = {}) const;
    NNReport nn_report() const;
    std::vector<DetectedObject> objects() const;

    DetectedObject add_object(std::int64_t x, std::int64_t y, std::int64_t z,
                              std::optional<std::uint64_t> expected_version = {});
    void delete_object(std::uint32_t id, std::optional<std::uint64_t> expected_version = {});
    RerunSummary rerun(const DetectionParams& params, std::optional<std::uint64_t> expected_version = {});

private:
    void check_version(std::optional<std::uint64_t> expected) const;
    DetectedObject apply_add(const Voxel& v);
    void apply_delete(std::uint32_t id);
    void apply_rerun(const DetectionParams& params, Segmentation seg);

    VolumeImage volume_;
    DetectionParams initial_params_;
    unsigned threads_;
    std::uint16_t min_intensity_ = 0;
    std::uint16_t max_intensity_ = 0;

    mutable std::shared_mutex state_mutex_;
    std::mutex writer_mutex_;
    SessionState state_;
    std::vector<EditEntry> log_;
};

} // namespace oscos
