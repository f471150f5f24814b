#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace clsim {

struct Size {
    int width = 0;
    int height = 0;

    bool operator==(const Size&) const = default;
};

/**
 * Single-channel image with an explicit dynamic range.
 *
 * Pixels are stored row-major as doubles in [0, dynamic_range]. Decoded
 * images hold integral values; resampling may introduce fractional ones.
 */
struct GrayImage {
    int width = 0;
    int height = 0;
    double dynamic_range = 255.0;
    std::vector<double> pixels;

    static GrayImage zeros(int w, int h, double range = 255.0) {
        GrayImage img;
        img.width = w;
        img.height = h;
        img.dynamic_range = range;
        img.pixels.assign(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), 0.0);
        return img;
    }

    double& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }
    double at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }

    std::size_t pixel_count() const { return pixels.size(); }

    Size size() const { return {width, height}; }
};

inline void validate_image(const GrayImage& img, const std::string& what = "image") {
    if (img.width < 1 || img.height < 1)
        throw std::invalid_argument(what + ": dimensions must be at least 1x1");
    if (img.dynamic_range <= 0.0)
        throw std::invalid_argument(what + ": dynamic range must be positive");
    if (img.pixels.size() != static_cast<std::size_t>(img.width) * static_cast<std::size_t>(img.height))
        throw std::invalid_argument(what + ": pixel buffer does not match dimensions");
    for (double p : img.pixels) {
        if (!(p >= 0.0 && p <= img.dynamic_range))
            throw std::invalid_argument(what + ": pixel value outside [0, dynamic range]");
    }
}

/// ITU-R BT.601 luma of an 8-bit RGB triple, rounded to the nearest integer.
inline double luma_bt601(double r, double g, double b) {
    return std::round(0.299 * r + 0.587 * g + 0.114 * b);
}

/// Bilinear resample to w x h using the pixel-center convention.
inline GrayImage resize_bilinear(const GrayImage& src, int w, int h) {
    validate_image(src, "resize source");
    if (w < 1 || h < 1)
        throw std::invalid_argument("resize target dimensions must be at least 1x1");
    if (w == src.width && h == src.height) return src;

    GrayImage dst = GrayImage::zeros(w, h, src.dynamic_range);
    const double sx = static_cast<double>(src.width) / w;
    const double sy = static_cast<double>(src.height) / h;
    for (int y = 0; y < h; ++y) {
        double fy = (y + 0.5) * sy - 0.5;
        if (fy < 0.0) fy = 0.0;
        if (fy > src.height - 1) fy = src.height - 1;
        const int y0 = static_cast<int>(fy);
        const int y1 = y0 + 1 < src.height ? y0 + 1 : y0;
        const double wy = fy - y0;
        for (int x = 0; x < w; ++x) {
            double fx = (x + 0.5) * sx - 0.5;
            if (fx < 0.0) fx = 0.0;
            if (fx > src.width - 1) fx = src.width - 1;
            const int x0 = static_cast<int>(fx);
            const int x1 = x0 + 1 < src.width ? x0 + 1 : x0;
            const double wx = fx - x0;
            const double top = src.at(x0, y0) * (1.0 - wx) + src.at(x1, y0) * wx;
            const double bot = src.at(x0, y1) * (1.0 - wx) + src.at(x1, y1) * wx;
            dst.at(x, y) = top * (1.0 - wy) + bot * wy;
        }
    }
    return dst;
}

inline GrayImage to_common_size(const GrayImage& img, Size target) {
    return resize_bilinear(img, target.width, target.height);
}

}  // namespace clsim
