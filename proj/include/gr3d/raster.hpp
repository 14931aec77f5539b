#pragma once

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <png.h>

#include "gr3d/errors.hpp"
#include "gr3d/geometry.hpp"

namespace gr3d {

/// Interleaved 8-bit RGB raster, row-major.
struct ImageRgb8 {
    int width = 0, height = 0;
    std::vector<std::uint8_t> data; ///< size 3*width*height

    ImageRgb8() = default;
    ImageRgb8(int w, int h)
        : width(w), height(h), data(static_cast<std::size_t>(w) * h * 3, 0) {}

    std::size_t index(int i, int j) const {
        return (static_cast<std::size_t>(j) * width + i) * 3;
    }
    void set(int i, int j, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
        const auto k = index(i, j);
        data[k] = r;
        data[k + 1] = g;
        data[k + 2] = b;
    }
    bool operator==(const ImageRgb8&) const = default;
};

/// Single-channel 16-bit raster (labels, millimeter depth).
struct RasterU16 {
    int width = 0, height = 0;
    std::vector<std::uint16_t> data;

    RasterU16() = default;
    RasterU16(int w, int h)
        : width(w), height(h), data(static_cast<std::size_t>(w) * h, 0) {}

    std::uint16_t at(int i, int j) const {
        return data[static_cast<std::size_t>(j) * width + i];
    }
    void set(int i, int j, std::uint16_t v) {
        data[static_cast<std::size_t>(j) * width + i] = v;
    }
    bool operator==(const RasterU16&) const = default;
};

namespace detail {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using UniqueFile = std::unique_ptr<std::FILE, FileCloser>;

[[noreturn]] inline void png_error_fn(png_structp png, png_const_charp msg) {
    // libpng longjmps back to the caller's setjmp point after this returns;
    // we throw instead so stack unwinding stays C++-safe.
    (void)png;
    throw DataError(std::string("png: ") + msg);
}

inline void png_warn_fn(png_structp, png_const_charp) {}

} // namespace detail

inline void write_png_rgb8(const std::filesystem::path& path, const ImageRgb8& img) {
    detail::UniqueFile fp(std::fopen(path.string().c_str(), "wb"));
    if (!fp) throw DataError("cannot open for write: " + path.string());
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr,
                                              detail::png_error_fn, detail::png_warn_fn);
    if (!png) throw DataError("png: create_write_struct failed");
    png_infop info = png_create_info_struct(png);
    try {
        png_init_io(png, fp.get());
        png_set_IHDR(png, info, img.width, img.height, 8, PNG_COLOR_TYPE_RGB,
                     PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                     PNG_FILTER_TYPE_DEFAULT);
        png_write_info(png, info);
        for (int j = 0; j < img.height; ++j)
            png_write_row(png, const_cast<png_bytep>(&img.data[img.index(0, j)]));
        png_write_end(png, info);
    } catch (...) {
        png_destroy_write_struct(&png, &info);
        throw;
    }
    png_destroy_write_struct(&png, &info);
}

inline void write_png_gray16(const std::filesystem::path& path, const RasterU16& ras) {
    detail::UniqueFile fp(std::fopen(path.string().c_str(), "wb"));
    if (!fp) throw DataError("cannot open for write: " + path.string());
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr,
                                              detail::png_error_fn, detail::png_warn_fn);
    if (!png) throw DataError("png: create_write_struct failed");
    png_infop info = png_create_info_struct(png);
    std::vector<std::uint8_t> row(static_cast<std::size_t>(ras.width) * 2);
    try {
        png_init_io(png, fp.get());
        png_set_IHDR(png, info, ras.width, ras.height, 16, PNG_COLOR_TYPE_GRAY,
                     PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                     PNG_FILTER_TYPE_DEFAULT);
        png_write_info(png, info);
        for (int j = 0; j < ras.height; ++j) {
            // PNG 16-bit samples are big-endian on the wire.
            for (int i = 0; i < ras.width; ++i) {
                const std::uint16_t v = ras.at(i, j);
                row[2 * i] = static_cast<std::uint8_t>(v >> 8);
                row[2 * i + 1] = static_cast<std::uint8_t>(v & 0xff);
            }
            png_write_row(png, row.data());
        }
        png_write_end(png, info);
    } catch (...) {
        png_destroy_write_struct(&png, &info);
        throw;
    }
    png_destroy_write_struct(&png, &info);
}

/// Reads any PNG as 8-bit RGB (palette/gray/alpha inputs are normalized).
inline ImageRgb8 read_png_rgb8(const std::filesystem::path& path) {
    detail::UniqueFile fp(std::fopen(path.string().c_str(), "rb"));
    if (!fp) throw DataError("cannot open: " + path.string());
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr,
                                             detail::png_error_fn, detail::png_warn_fn);
    if (!png) throw DataError("png: create_read_struct failed");
    png_infop info = png_create_info_struct(png);
    ImageRgb8 img;
    try {
        png_init_io(png, fp.get());
        png_read_info(png, info);
        png_set_expand(png);
        png_set_strip_16(png);
        png_set_strip_alpha(png);
        png_set_gray_to_rgb(png);
        png_read_update_info(png, info);
        img = ImageRgb8(static_cast<int>(png_get_image_width(png, info)),
                        static_cast<int>(png_get_image_height(png, info)));
        if (png_get_rowbytes(png, info) != static_cast<std::size_t>(img.width) * 3)
            throw DataError("png: unexpected row size in " + path.string());
        for (int j = 0; j < img.height; ++j)
            png_read_row(png, &img.data[img.index(0, j)], nullptr);
        png_read_end(png, nullptr);
    } catch (...) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw;
    }
    png_destroy_read_struct(&png, &info, nullptr);
    return img;
}

/// Reads a PNG that must be single-channel 16-bit (depth / label rasters).
inline RasterU16 read_png_gray16(const std::filesystem::path& path) {
    detail::UniqueFile fp(std::fopen(path.string().c_str(), "rb"));
    if (!fp) throw DataError("cannot open: " + path.string());
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr,
                                             detail::png_error_fn, detail::png_warn_fn);
    if (!png) throw DataError("png: create_read_struct failed");
    png_infop info = png_create_info_struct(png);
    RasterU16 ras;
    try {
        png_init_io(png, fp.get());
        png_read_info(png, info);
        if (png_get_color_type(png, info) != PNG_COLOR_TYPE_GRAY ||
            png_get_bit_depth(png, info) != 16)
            throw DataError("expected 16-bit grayscale png: " + path.string());
        ras = RasterU16(static_cast<int>(png_get_image_width(png, info)),
                        static_cast<int>(png_get_image_height(png, info)));
        std::vector<std::uint8_t> row(static_cast<std::size_t>(ras.width) * 2);
        for (int j = 0; j < ras.height; ++j) {
            png_read_row(png, row.data(), nullptr);
            for (int i = 0; i < ras.width; ++i)
                ras.set(i, j, static_cast<std::uint16_t>((row[2 * i] << 8) | row[2 * i + 1]));
        }
        png_read_end(png, nullptr);
    } catch (...) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw;
    }
    png_destroy_read_struct(&png, &info, nullptr);
    return ras;
}

// Raw float raster (".fraw"): 8-byte header of little-endian uint32 width and
// height, then width*height little-endian float32 samples, row-major.
// Zero / non-finite samples mean "invalid pixel".

struct RasterF32 {
    int width = 0, height = 0;
    std::vector<float> data;

    RasterF32() = default;
    RasterF32(int w, int h)
        : width(w), height(h), data(static_cast<std::size_t>(w) * h, 0.f) {}

    float at(int i, int j) const {
        return data[static_cast<std::size_t>(j) * width + i];
    }
    void set(int i, int j, float v) {
        data[static_cast<std::size_t>(j) * width + i] = v;
    }
};

inline void write_fraw(const std::filesystem::path& path, const RasterF32& ras) {
    static_assert(sizeof(float) == 4);
    detail::UniqueFile fp(std::fopen(path.string().c_str(), "wb"));
    if (!fp) throw DataError("cannot open for write: " + path.string());
    const std::uint32_t w = static_cast<std::uint32_t>(ras.width);
    const std::uint32_t h = static_cast<std::uint32_t>(ras.height);
    std::uint8_t hdr[8] = {
        static_cast<std::uint8_t>(w), static_cast<std::uint8_t>(w >> 8),
        static_cast<std::uint8_t>(w >> 16), static_cast<std::uint8_t>(w >> 24),
        static_cast<std::uint8_t>(h), static_cast<std::uint8_t>(h >> 8),
        static_cast<std::uint8_t>(h >> 16), static_cast<std::uint8_t>(h >> 24)};
    if (std::fwrite(hdr, 1, 8, fp.get()) != 8 ||
        std::fwrite(ras.data.data(), sizeof(float), ras.data.size(), fp.get()) !=
            ras.data.size())
        throw DataError("short write: " + path.string());
}

inline RasterF32 read_fraw(const std::filesystem::path& path) {
    detail::UniqueFile fp(std::fopen(path.string().c_str(), "rb"));
    if (!fp) throw DataError("cannot open: " + path.string());
    std::uint8_t hdr[8];
    if (std::fread(hdr, 1, 8, fp.get()) != 8)
        throw DataError("truncated float raster header: " + path.string());
    const std::uint32_t w = hdr[0] | (hdr[1] << 8) | (hdr[2] << 16) |
                            (static_cast<std::uint32_t>(hdr[3]) << 24);
    const std::uint32_t h = hdr[4] | (hdr[5] << 8) | (hdr[6] << 16) |
                            (static_cast<std::uint32_t>(hdr[7]) << 24);
    if (w == 0 || h == 0 || w > (1u << 20) || h > (1u << 20))
        throw DataError("implausible float raster size: " + path.string());
    RasterF32 ras(static_cast<int>(w), static_cast<int>(h));
    if (std::fread(ras.data.data(), sizeof(float), ras.data.size(), fp.get()) !=
        ras.data.size())
        throw DataError("truncated float raster data: " + path.string());
    return ras;
}

} // namespace gr3d
