#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "oscos/error.hpp"

namespace oscos {

/// Grid extent in voxels. Memory order is x-fastest, then y, then z.
struct Dimensions {
    std::size_t nx = 1;
    std::size_t ny = 1;
    std::size_t nz = 1;

    std::size_t voxel_count() const { return nx * ny * nz; }
    std::size_t slice_size() const { return nx * ny; }

    std::size_t index(std::size_t x, std::size_t y, std::size_t z) const { return x + nx * (y + ny * z); }

    bool contains(long long x, long long y, long long z) const
    {
        return x >= 0 && y >= 0 && z >= 0 && static_cast<std::size_t>(x) < nx &&
               static_cast<std::size_t>(y) < ny && static_cast<std::size_t>(z) < nz;
    }

    friend bool operator==(const Dimensions&, const Dimensions&) = default;
};

/// Throws ValidationError unless every extent is at least one.
void validate(const Dimensions& dims);

/// Integer voxel coordinate.
struct Voxel {
    std::int64_t x = 0;
    std::int64_t y = 0;
    std::int64_t z = 0;

    friend bool operator==(const Voxel&, const Voxel&) = default;
};

inline Voxel voxel_at(const Dimensions& dims, std::size_t flat)
{
    const std::size_t x = flat % dims.nx;
    const std::size_t y = (flat / dims.nx) % dims.ny;
    const std::size_t z = flat / dims.slice_size();
    return {static_cast<std::int64_t>(x), static_cast<std::int64_t>(y), static_cast<std::int64_t>(z)};
}

/// Physical extent of one voxel along each axis.
struct VoxelSpacing {
    double sx = 1.0;
    double sy = 1.0;
    double sz = 1.0;

    friend bool operator==(const VoxelSpacing&, const VoxelSpacing&) = default;
};

void validate(const VoxelSpacing& spacing);

/// Dense, immutable stack of 16-bit intensities.
class VolumeImage {
public:
    VolumeImage() = default;
    VolumeImage(Dimensions dims, VoxelSpacing spacing, std::vector<std::uint16_t> voxels);
    /// Volume filled with a constant value.
    VolumeImage(Dimensions dims, VoxelSpacing spacing, std::uint16_t fill);

    const Dimensions& dims() const { return dims_; }
    const VoxelSpacing& spacing() const { return spacing_; }
    std::span<const std::uint16_t> voxels() const { return voxels_; }
    std::span<const std::uint16_t> slice(std::size_t z) const;

    std::uint16_t at(std::size_t x, std::size_t y, std::size_t z) const { return voxels_[dims_.index(x, y, z)]; }
    std::uint16_t operator[](std::size_t flat) const { return voxels_[flat]; }

    friend bool operator==(const VolumeImage&, const VolumeImage&) = default;

private:
    Dimensions dims_;
    VoxelSpacing spacing_;
    std::vector<std::uint16_t> voxels_;
};

/// Dense grid of object identifiers aligned with a VolumeImage; 0 is background.
class LabelMap {
public:
    LabelMap() = default;
    explicit LabelMap(Dimensions dims);
    LabelMap(Dimensions dims, std::vector<std::uint32_t> labels);

    const Dimensions& dims() const { return dims_; }
    std::span<const std::uint32_t> labels() const { return labels_; }
    std::span<std::uint32_t> labels() { return labels_; }

    std::uint32_t at(std::size_t x, std::size_t y, std::size_t z) const { return labels_[dims_.index(x, y, z)]; }
    std::uint32_t operator[](std::size_t flat) const { return labels_[flat]; }
    std::uint32_t& operator[](std::size_t flat) { return labels_[flat]; }

    /// Largest label present (0 for an all-background map).
    std::uint32_t max_label() const;
    std::size_t foreground_count() const;

    friend bool operator==(const LabelMap&, const LabelMap&) = default;

private:
    Dimensions dims_;
    std::vector<std::uint32_t> labels_;
};

/// Renumbers positive labels to 1..K in order of first appearance in scan order.
/// Returns the old-to-new mapping indexed by old label (0 maps to 0).
std::vector<std::uint32_t> compact_labels(LabelMap& map);

// Raw I/O. A raw file `<name>.u16raw` / `<name>.u32raw` is paired with `<name>.meta`
// carrying key=value lines: nx, ny, nz, dtype, sx, sy, sz.

std::filesystem::path meta_path_for(const std::filesystem::path& raw_path);

VolumeImage load_raw(const std::filesystem::path& path, Dimensions dims, VoxelSpacing spacing = {});
/// Reads a `.u16raw` using the dimensions and spacing in its sidecar.
VolumeImage load_raw(const std::filesystem::path& path);
void save_raw(const VolumeImage& vol, const std::filesystem::path& path);

void save_label_map(const LabelMap& map, const std::filesystem::path& path, VoxelSpacing spacing = {});
LabelMap load_label_map(const std::filesystem::path& path);

// Multi-page grayscale TIFF.

VolumeImage load_tiff_stack(const std::filesystem::path& path, VoxelSpacing spacing = {});
void save_tiff_stack(const VolumeImage& vol, const std::filesystem::path& path);

/// Dispatches on extension: `.tif`/`.tiff` or `.u16raw`. An explicit spacing overrides the sidecar's.
VolumeImage load_volume(const std::filesystem::path& path, std::optional<VoxelSpacing> spacing = {});
void save_volume(const VolumeImage& vol, const std::filesystem::path& path);

} // namespace oscos
