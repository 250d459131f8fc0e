#include "oscos/volume.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

namespace oscos {

namespace fs = std::filesystem;

static_assert(std::endian::native == std::endian::little, "raw I/O assumes a little-endian host");

void validate(const Dimensions& dims)
{
    if (dims.nx < 1 || dims.ny < 1 || dims.nz < 1)
        throw ValidationError("dimensions must be at least 1 along every axis");
}

void validate(const VoxelSpacing& spacing)
{
    if (!(spacing.sx > 0.0) || !(spacing.sy > 0.0) || !(spacing.sz > 0.0))
        throw ValidationError("voxel spacing must be strictly positive");
}

VolumeImage::VolumeImage(Dimensions dims, VoxelSpacing spacing, std::vector<std::uint16_t> voxels)
    : dims_(dims), spacing_(spacing), voxels_(std::move(voxels))
{
    validate(dims_);
    validate(spacing_);
    if (voxels_.size() != dims_.voxel_count())
        throw ValidationError("voxel buffer length does not match dimensions");
}

VolumeImage::VolumeImage(Dimensions dims, VoxelSpacing spacing, std::uint16_t fill)
    : VolumeImage(dims, spacing, std::vector<std::uint16_t>(dims.voxel_count(), fill))
{
}

std::span<const std::uint16_t> VolumeImage::slice(std::size_t z) const
{
    if (z >= dims_.nz)
        throw NotFoundError("slice " + std::to_string(z) + " out of range");
    return std::span<const std::uint16_t>(voxels_).subspan(z * dims_.slice_size(), dims_.slice_size());
}

LabelMap::LabelMap(Dimensions dims) : dims_(dims), labels_(dims.voxel_count(), 0)
{
    validate(dims_);
}

LabelMap::LabelMap(Dimensions dims, std::vector<std::uint32_t> labels) : dims_(dims), labels_(std::move(labels))
{
    validate(dims_);
    if (labels_.size() != dims_.voxel_count())
        throw ValidationError("label buffer length does not match dimensions");
}

std::uint32_t LabelMap::max_label() const
{
    return labels_.empty() ? 0 : *std::max_element(labels_.begin(), labels_.end());
}

std::size_t LabelMap::foreground_count() const
{
    return static_cast<std::size_t>(std::count_if(labels_.begin(), labels_.end(), [](std::uint32_t l) { return l != 0; }));
}

std::vector<std::uint32_t> compact_labels(LabelMap& map)
{
    std::vector<std::uint32_t> remap(static_cast<std::size_t>(map.max_label()) + 1, 0);
    std::uint32_t next = 0;
    for (auto& l : map.labels()) {
        if (l == 0)
            continue;
        if (remap[l] == 0)
            remap[l] = ++next;
        l = remap[l];
    }
    return remap;
}

// ---------------------------------------------------------------------------
// raw + sidecar

namespace {

struct RawMeta {
    Dimensions dims;
    VoxelSpacing spacing;
    std::string dtype;
};

void write_meta(const fs::path& path, const Dimensions& dims, const VoxelSpacing& spacing, const std::string& dtype)
{
    std::ofstream out(path);
    if (!out)
        throw IoError("cannot write " + path.string());
    out.precision(17);
    out << "nx=" << dims.nx << "\nny=" << dims.ny << "\nnz=" << dims.nz << "\ndtype=" << dtype << "\nsx=" << spacing.sx
        << "\nsy=" << spacing.sy << "\nsz=" << spacing.sz << "\n";
    if (!out)
        throw IoError("failed writing " + path.string());
}

RawMeta read_meta(const fs::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot read sidecar " + path.string());
    std::map<std::string, std::string> kv;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#')
            continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw IoError("malformed sidecar line '" + line + "' in " + path.string());
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    auto get = [&](const std::string& key) -> const std::string& {
        auto it = kv.find(key);
        if (it == kv.end())
            throw IoError("sidecar " + path.string() + " lacks key '" + key + "'");
        return it->second;
    };
    RawMeta meta;
    try {
        meta.dims = {std::stoull(get("nx")), std::stoull(get("ny")), std::stoull(get("nz"))};
        if (kv.count("sx"))
            meta.spacing = {std::stod(kv["sx"]), std::stod(kv["sy"]), std::stod(kv["sz"])};
    } catch (const std::logic_error&) {
        throw IoError("sidecar " + path.string() + " has a non-numeric field");
    }
    meta.dtype = get("dtype");
    return meta;
}

template <typename T>
std::vector<T> read_samples(const fs::path& path, std::size_t count)
{
    std::error_code ec;
    const auto size = fs::file_size(path, ec);
    if (ec)
        throw IoError("cannot read " + path.string() + ": " + ec.message());
    if (size != count * sizeof(T))
        throw IoError("size mismatch for " + path.string() + ": expected " + std::to_string(count * sizeof(T)) +
                      " bytes, found " + std::to_string(size));
    std::vector<T> data(count);
    std::ifstream in(path, std::ios::binary);
    if (!in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(size)))
        throw IoError("failed reading " + path.string());
    return data;
}

template <typename T>
void write_samples(const fs::path& path, std::span<const T> data)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw IoError("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size_bytes()));
    if (!out)
        throw IoError("failed writing " + path.string());
}

std::string lower_extension(const fs::path& path)
{
    std::string ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return ext;
}

} // namespace

fs::path meta_path_for(const fs::path& raw_path)
{
    fs::path meta = raw_path;
    meta.replace_extension(".meta");
    return meta;
}

VolumeImage load_raw(const fs::path& path, Dimensions dims, VoxelSpacing spacing)
{
    validate(dims);
    return VolumeImage(dims, spacing, read_samples<std::uint16_t>(path, dims.voxel_count()));
}

VolumeImage load_raw(const fs::path& path)
{
    const RawMeta meta = read_meta(meta_path_for(path));
    if (meta.dtype != "u16le")
        throw IoError("expected dtype=u16le in sidecar of " + path.string() + ", found " + meta.dtype);
    return load_raw(path, meta.dims, meta.spacing);
}

void save_raw(const VolumeImage& vol, const fs::path& path)
{
    write_samples(path, vol.voxels());
    write_meta(meta_path_for(path), vol.dims(), vol.spacing(), "u16le");
}

void save_label_map(const LabelMap& map, const fs::path& path, VoxelSpacing spacing)
{
    write_samples(path, map.labels());
    write_meta(meta_path_for(path), map.dims(), spacing, "u32le");
}

LabelMap load_label_map(const fs::path& path)
{
    const RawMeta meta = read_meta(meta_path_for(path));
    if (meta.dtype != "u32le")
        throw IoError("expected dtype=u32le in sidecar of " + path.string() + ", found " + meta.dtype);
    validate(meta.dims);
    return LabelMap(meta.dims, read_samples<std::uint32_t>(path, meta.dims.voxel_count()));
}

VolumeImage load_volume(const fs::path& path, std::optional<VoxelSpacing> spacing)
{
    if (!fs::exists(path))
        throw IoError("input not found: " + path.string());
    const std::string ext = lower_extension(path);
    if (ext == ".tif" || ext == ".tiff")
        return load_tiff_stack(path, spacing.value_or(VoxelSpacing{}));
    if (ext == ".u16raw") {
        VolumeImage vol = load_raw(path);
        if (!spacing)
            return vol;
        return VolumeImage(vol.dims(), *spacing, std::vector<std::uint16_t>(vol.voxels().begin(), vol.voxels().end()));
    }
    throw IoError("unsupported volume format '" + ext + "' for " + path.string());
}

void save_volume(const VolumeImage& vol, const fs::path& path)
{
    const std::string ext = lower_extension(path);
    if (ext == ".tif" || ext == ".tiff")
        save_tiff_stack(vol, path);
    else if (ext == ".u16raw")
        save_raw(vol, path);
    else
        throw IoError("unsupported volume format '" + ext + "' for " + path.string());
}

} // namespace oscos
