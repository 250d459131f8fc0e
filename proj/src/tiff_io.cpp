#include "oscos/volume.hpp"

#include <cstdarg>
#include <cstdio>
#include <memory>
#include <string>

#include <tiffio.h>

namespace oscos {

namespace {

thread_local std::string last_tiff_error;

void capture_tiff_error(const char* module, const char* fmt, va_list ap)
{
    char buf[512];
    std::vsnprintf(buf, sizeof buf, fmt, ap);
    last_tiff_error = (module ? std::string(module) + ": " : std::string()) + buf;
}

void ignore_tiff_warning(const char*, const char*, va_list) {}

struct TiffCloser {
    void operator()(TIFF* tif) const { TIFFClose(tif); }
};
using TiffHandle = std::unique_ptr<TIFF, TiffCloser>;

TiffHandle open_tiff(const std::filesystem::path& path, const char* mode)
{
    TIFFSetErrorHandler(capture_tiff_error);
    TIFFSetWarningHandler(ignore_tiff_warning);
    last_tiff_error.clear();
    TiffHandle tif(TIFFOpen(path.c_str(), mode));
    if (!tif)
        throw IoError("cannot open TIFF " + path.string() + (last_tiff_error.empty() ? "" : ": " + last_tiff_error));
    return tif;
}

template <typename T>
T required_tag(TIFF* tif, ttag_t tag, const char* name, const std::filesystem::path& path)
{
    T value{};
    if (!TIFFGetField(tif, tag, &value))
        throw IoError("TIFF " + path.string() + " lacks " + name);
    return value;
}

} // namespace

VolumeImage load_tiff_stack(const std::filesystem::path& path, VoxelSpacing spacing)
{
    TiffHandle handle = open_tiff(path, "r");
    TIFF* tif = handle.get();

    Dimensions dims{0, 0, 0};
    std::vector<std::uint16_t> voxels;
    do {
        const auto width = required_tag<std::uint32_t>(tif, TIFFTAG_IMAGEWIDTH, "ImageWidth", path);
        const auto height = required_tag<std::uint32_t>(tif, TIFFTAG_IMAGELENGTH, "ImageLength", path);
        std::uint16_t bits = 1, spp = 1, fmt = SAMPLEFORMAT_UINT, compression = COMPRESSION_NONE;
        std::uint16_t photometric = PHOTOMETRIC_MINISBLACK;
        TIFFGetFieldDefaulted(tif, TIFFTAG_BITSPERSAMPLE, &bits);
        TIFFGetFieldDefaulted(tif, TIFFTAG_SAMPLESPERPIXEL, &spp);
        TIFFGetFieldDefaulted(tif, TIFFTAG_SAMPLEFORMAT, &fmt);
        TIFFGetFieldDefaulted(tif, TIFFTAG_COMPRESSION, &compression);
        TIFFGetField(tif, TIFFTAG_PHOTOMETRIC, &photometric);

        if (spp != 1 || (photometric != PHOTOMETRIC_MINISBLACK && photometric != PHOTOMETRIC_MINISWHITE))
            throw IoError("TIFF " + path.string() + ": only single-sample grayscale pages are supported");
        if ((bits != 8 && bits != 16) || fmt != SAMPLEFORMAT_UINT)
            throw IoError("TIFF " + path.string() + ": unsupported sample format (" + std::to_string(bits) + "-bit)");
        if (compression != COMPRESSION_NONE && compression != COMPRESSION_LZW && compression != COMPRESSION_ADOBE_DEFLATE &&
            compression != COMPRESSION_DEFLATE)
            throw IoError("TIFF " + path.string() + ": unsupported compression scheme " + std::to_string(compression));
        if (TIFFIsTiled(tif))
            throw IoError("TIFF " + path.string() + ": tiled pages are not supported");

        if (dims.nz == 0) {
            dims.nx = width;
            dims.ny = height;
        } else if (dims.nx != width || dims.ny != height) {
            throw IoError("TIFF " + path.string() + ": page " + std::to_string(dims.nz) + " is " + std::to_string(width) +
                          "x" + std::to_string(height) + ", expected " + std::to_string(dims.nx) + "x" +
                          std::to_string(dims.ny));
        }

        const std::size_t base = voxels.size();
        voxels.resize(base + dims.slice_size());
        std::vector<unsigned char> row(static_cast<std::size_t>(TIFFScanlineSize(tif)));
        for (std::uint32_t y = 0; y < height; ++y) {
            if (TIFFReadScanline(tif, row.data(), y, 0) < 0)
                throw IoError("TIFF " + path.string() + ": failed reading row " + std::to_string(y) + ": " + last_tiff_error);
            std::uint16_t* dst = voxels.data() + base + static_cast<std::size_t>(y) * width;
            if (bits == 8) {
                for (std::uint32_t x = 0; x < width; ++x)
                    dst[x] = static_cast<std::uint16_t>(row[x] << 8);
            } else {
                const auto* src = reinterpret_cast<const std::uint16_t*>(row.data());
                std::copy(src, src + width, dst);
            }
            if (photometric == PHOTOMETRIC_MINISWHITE) {
                for (std::uint32_t x = 0; x < width; ++x)
                    dst[x] = static_cast<std::uint16_t>((bits == 8 ? 0xFF00 : 0xFFFF) - dst[x]);
            }
        }
        ++dims.nz;
    } while (TIFFReadDirectory(tif));

    return VolumeImage(dims, spacing, std::move(voxels));
}

void save_tiff_stack(const VolumeImage& vol, const std::filesystem::path& path)
{
    TiffHandle handle = open_tiff(path, "w");
    TIFF* tif = handle.get();
    const Dimensions& d = vol.dims();
    for (std::size_t z = 0; z < d.nz; ++z) {
        TIFFSetField(tif, TIFFTAG_IMAGEWIDTH, static_cast<std::uint32_t>(d.nx));
        TIFFSetField(tif, TIFFTAG_IMAGELENGTH, static_cast<std::uint32_t>(d.ny));
        TIFFSetField(tif, TIFFTAG_BITSPERSAMPLE, 16);
        TIFFSetField(tif, TIFFTAG_SAMPLESPERPIXEL, 1);
        TIFFSetField(tif, TIFFTAG_SAMPLEFORMAT, SAMPLEFORMAT_UINT);
        TIFFSetField(tif, TIFFTAG_PHOTOMETRIC, PHOTOMETRIC_MINISBLACK);
        TIFFSetField(tif, TIFFTAG_PLANARCONFIG, PLANARCONFIG_CONTIG);
        TIFFSetField(tif, TIFFTAG_COMPRESSION, COMPRESSION_NONE);
        TIFFSetField(tif, TIFFTAG_ROWSPERSTRIP, static_cast<std::uint32_t>(d.ny));
        TIFFSetField(tif, TIFFTAG_SUBFILETYPE, FILETYPE_PAGE);
        TIFFSetField(tif, TIFFTAG_PAGENUMBER, static_cast<std::uint16_t>(z), static_cast<std::uint16_t>(d.nz));

        auto slice = vol.slice(z);
        std::vector<std::uint16_t> row(d.nx);
        for (std::size_t y = 0; y < d.ny; ++y) {
            std::copy_n(slice.begin() + static_cast<std::ptrdiff_t>(y * d.nx), d.nx, row.begin());
            if (TIFFWriteScanline(tif, row.data(), static_cast<std::uint32_t>(y), 0) < 0)
                throw IoError("failed writing TIFF " + path.string() + ": " + last_tiff_error);
        }
        if (!TIFFWriteDirectory(tif))
            throw IoError("failed writing TIFF directory in " + path.string() + ": " + last_tiff_error);
    }
}

} // namespace oscos
