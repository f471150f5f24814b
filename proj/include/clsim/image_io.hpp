#pragma once

#include <csetjmp>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <jpeglib.h>
#include <png.h>

#include "clsim/image.hpp"

namespace clsim {

class ImageIoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

inline FilePtr open_file(const std::filesystem::path& file, const char* mode) {
    FilePtr fp(std::fopen(file.string().c_str(), mode));
    if (!fp) throw ImageIoError("cannot open file: " + file.string());
    return fp;
}

// Interleaved 8-bit buffer, 1 (gray) or 3 (RGB) channels.
struct RawPixels {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<unsigned char> data;
};

inline RawPixels read_png(const std::filesystem::path& file) {
    FilePtr fp = open_file(file, "rb");

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw ImageIoError("png: allocation failure");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw ImageIoError("png: allocation failure");
    }

    RawPixels out;
    std::vector<png_bytep> row_ptrs;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw ImageIoError("png: decode failed: " + file.string());
    }

    png_init_io(png, fp.get());
    png_read_info(png, info);

    png_uint_32 w = 0, h = 0;
    int bit_depth = 0, color_type = 0;
    png_get_IHDR(png, info, &w, &h, &bit_depth, &color_type, nullptr, nullptr, nullptr);
    if (w == 0 || h == 0) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw ImageIoError("png: zero-dimension image: " + file.string());
    }

    if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (bit_depth == 16) png_set_strip_16(png);
    if (color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    png_read_update_info(png, info);

    out.width = static_cast<int>(w);
    out.height = static_cast<int>(h);
    out.channels = png_get_channels(png, info);
    if (out.channels != 1 && out.channels != 3) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw ImageIoError("png: unsupported channel layout: " + file.string());
    }

    out.data.resize(static_cast<std::size_t>(out.width) * out.height * out.channels);
    row_ptrs.resize(out.height);
    const std::size_t stride = static_cast<std::size_t>(out.width) * out.channels;
    for (int y = 0; y < out.height; ++y) row_ptrs[y] = out.data.data() + y * stride;

    png_read_image(png, row_ptrs.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return out;
}

struct JpegErrorMgr {
    jpeg_error_mgr pub;
    std::jmp_buf jump;
};

inline void jpeg_error_trampoline(j_common_ptr cinfo) {
    auto* mgr = reinterpret_cast<JpegErrorMgr*>(cinfo->err);
    std::longjmp(mgr->jump, 1);
}

inline RawPixels read_jpeg(const std::filesystem::path& file) {
    FilePtr fp = open_file(file, "rb");

    jpeg_decompress_struct cinfo;
    JpegErrorMgr err;
    cinfo.err = jpeg_std_error(&err.pub);
    err.pub.error_exit = jpeg_error_trampoline;

    RawPixels out;
    if (setjmp(err.jump)) {
        jpeg_destroy_decompress(&cinfo);
        throw ImageIoError("jpeg: decode failed: " + file.string());
    }

    jpeg_create_decompress(&cinfo);
    jpeg_stdio_src(&cinfo, fp.get());
    jpeg_read_header(&cinfo, TRUE);
    cinfo.out_color_space = JCS_RGB;
    jpeg_start_decompress(&cinfo);

    out.width = static_cast<int>(cinfo.output_width);
    out.height = static_cast<int>(cinfo.output_height);
    out.channels = cinfo.output_components;
    if (out.width == 0 || out.height == 0 || out.channels != 3) {
        jpeg_destroy_decompress(&cinfo);
        throw ImageIoError("jpeg: unsupported image: " + file.string());
    }

    out.data.resize(static_cast<std::size_t>(out.width) * out.height * out.channels);
    const std::size_t stride = static_cast<std::size_t>(out.width) * out.channels;
    while (cinfo.output_scanline < cinfo.output_height) {
        unsigned char* row = out.data.data() + cinfo.output_scanline * stride;
        jpeg_read_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_decompress(&cinfo);
    jpeg_destroy_decompress(&cinfo);
    return out;
}

enum class FileKind { Png, Jpeg, Unknown };

inline FileKind sniff_kind(const std::filesystem::path& file) {
    FilePtr fp = open_file(file, "rb");
    unsigned char magic[8] = {};
    const std::size_t n = std::fread(magic, 1, sizeof magic, fp.get());
    if (n >= 8 && png_sig_cmp(magic, 0, 8) == 0) return FileKind::Png;
    if (n >= 3 && magic[0] == 0xFF && magic[1] == 0xD8 && magic[2] == 0xFF) return FileKind::Jpeg;
    return FileKind::Unknown;
}

inline GrayImage to_gray(const RawPixels& raw) {
    GrayImage img = GrayImage::zeros(raw.width, raw.height, 255.0);
    const std::size_t n = img.pixel_count();
    if (raw.channels == 1) {
        for (std::size_t i = 0; i < n; ++i) img.pixels[i] = raw.data[i];
    } else {
        for (std::size_t i = 0; i < n; ++i) {
            const unsigned char* px = raw.data.data() + 3 * i;
            img.pixels[i] = luma_bt601(px[0], px[1], px[2]);
        }
    }
    return img;
}

}  // namespace detail

/// Decode a PNG or JPEG file to grayscale at its native resolution.
inline GrayImage decode_gray(const std::filesystem::path& file) {
    switch (detail::sniff_kind(file)) {
        case detail::FileKind::Png:
            return detail::to_gray(detail::read_png(file));
        case detail::FileKind::Jpeg:
            return detail::to_gray(detail::read_jpeg(file));
        default:
            throw ImageIoError("unsupported image format: " + file.string());
    }
}

/**
 * Decode an image and optionally resample it to a target size so that
 * both members of a compared pair share dimensions.
 */
inline GrayImage load_image(const std::filesystem::path& file, std::optional<Size> target = std::nullopt) {
    GrayImage img = decode_gray(file);
    if (target) img = to_common_size(img, *target);
    validate_image(img, file.string());
    return img;
}

/// Write an 8-bit grayscale PNG; fractional pixels are rounded.
inline void write_png_gray(const std::filesystem::path& file, const GrayImage& img) {
    validate_image(img, "png write");
    if (img.dynamic_range != 255.0)
        throw ImageIoError("png write: only 8-bit dynamic range 255 is supported");

    std::vector<unsigned char> bytes(img.pixel_count());
    for (std::size_t i = 0; i < bytes.size(); ++i) {
        long v = std::lround(img.pixels[i]);
        if (v < 0) v = 0;
        if (v > 255) v = 255;
        bytes[i] = static_cast<unsigned char>(v);
    }

    detail::FilePtr fp = detail::open_file(file, "wb");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw ImageIoError("png: allocation failure");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw ImageIoError("png: allocation failure");
    }

    std::vector<png_bytep> row_ptrs(img.height);
    for (int y = 0; y < img.height; ++y) row_ptrs[y] = bytes.data() + static_cast<std::size_t>(y) * img.width;

    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw ImageIoError("png: encode failed: " + file.string());
    }

    png_init_io(png, fp.get());
    png_set_IHDR(png, info, img.width, img.height, 8, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    png_write_image(png, row_ptrs.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

}  // namespace clsim
