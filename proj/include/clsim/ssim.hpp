#pragma once

#include <cmath>
#include <stdexcept>

#include "clsim/image.hpp"

namespace clsim {

/**
 * Stabilization constants for the similarity measure. C1 = (k1*L)^2 and
 * C2 = (k2*L)^2 where L is the pixel dynamic range.
 */
struct SsimParams {
    double k1 = 0.01;
    double k2 = 0.03;
    double dynamic_range = 255.0;

    double c1() const { return (k1 * dynamic_range) * (k1 * dynamic_range); }
    double c2() const { return (k2 * dynamic_range) * (k2 * dynamic_range); }
};

inline void validate_params(const SsimParams& p) {
    if (!(p.k1 > 0.0 && p.k1 < 0.5)) throw std::invalid_argument("ssim: k1 must be in (0, 0.5)");
    if (!(p.k2 > 0.0 && p.k2 < 0.5)) throw std::invalid_argument("ssim: k2 must be in (0, 0.5)");
    if (!(p.dynamic_range > 0.0)) throw std::invalid_argument("ssim: dynamic range must be positive");
}

struct ImageMoments {
    double mu = 0.0;
    double sigma = 0.0;
    std::size_t n = 0;
};

/// Population mean and standard deviation of the pixel intensities.
inline ImageMoments moments(const GrayImage& img) {
    if (img.pixels.empty()) throw std::invalid_argument("moments: empty image");
    const std::size_t n = img.pixel_count();
    double sum = 0.0;
    for (double p : img.pixels) sum += p;
    const double mu = sum / static_cast<double>(n);
    double var = 0.0;
    for (double p : img.pixels) {
        const double d = p - mu;
        var += d * d;
    }
    var /= static_cast<double>(n);
    return {mu, std::sqrt(var), n};
}

namespace detail {

inline double ssim_from_stats(double mu_x, double mu_y, double var_x, double var_y, double cov_xy,
                              const SsimParams& p) {
    const double c1 = p.c1();
    const double c2 = p.c2();
    const double num = (2.0 * mu_x * mu_y + c1) * (2.0 * cov_xy + c2);
    const double den = (mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2);
    return num / den;
}

}  // namespace detail

/**
 * Structural similarity of two aligned grayscale images computed from
 * whole-image statistics: luminance, contrast, and structure terms over
 * the global mean, variance, and covariance. Population (divide-by-n)
 * moments throughout. Result is 1 for identical images and lies in
 * [-1, 1].
 */
inline double ssim(const GrayImage& x, const GrayImage& y, const SsimParams& p = {}) {
    validate_params(p);
    if (x.width != y.width || x.height != y.height)
        throw std::invalid_argument("ssim: image dimensions differ");
    if (x.dynamic_range != y.dynamic_range || x.dynamic_range != p.dynamic_range)
        throw std::invalid_argument("ssim: dynamic range mismatch");
    if (x.pixels.empty()) throw std::invalid_argument("ssim: empty image");

    const std::size_t n = x.pixel_count();
    double sum_x = 0.0, sum_y = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sum_x += x.pixels[i];
        sum_y += y.pixels[i];
    }
    const double mu_x = sum_x / static_cast<double>(n);
    const double mu_y = sum_y / static_cast<double>(n);

    double var_x = 0.0, var_y = 0.0, cov_xy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = x.pixels[i] - mu_x;
        const double dy = y.pixels[i] - mu_y;
        var_x += dx * dx;
        var_y += dy * dy;
        cov_xy += dx * dy;
    }
    var_x /= static_cast<double>(n);
    var_y /= static_cast<double>(n);
    cov_xy /= static_cast<double>(n);

    return detail::ssim_from_stats(mu_x, mu_y, var_x, var_y, cov_xy, p);
}

/**
 * Sliding-window variant: mean of local similarity values over every
 * window position fully inside the image, uniform window weighting.
 * Falls back to the global statistic when the image is smaller than
 * the window. Offered for comparison; the global form is the default
 * everywhere else.
 */
inline double ssim_windowed(const GrayImage& x, const GrayImage& y, const SsimParams& p = {},
                            int window = 11) {
    validate_params(p);
    if (window < 1) throw std::invalid_argument("ssim: window must be positive");
    if (x.width != y.width || x.height != y.height)
        throw std::invalid_argument("ssim: image dimensions differ");
    if (x.dynamic_range != y.dynamic_range || x.dynamic_range != p.dynamic_range)
        throw std::invalid_argument("ssim: dynamic range mismatch");
    if (x.width < window || x.height < window) return ssim(x, y, p);

    const double wn = static_cast<double>(window) * window;
    double total = 0.0;
    std::size_t positions = 0;
    for (int oy = 0; oy + window <= x.height; ++oy) {
        for (int ox = 0; ox + window <= x.width; ++ox) {
            double sum_x = 0.0, sum_y = 0.0;
            for (int wy = 0; wy < window; ++wy)
                for (int wx = 0; wx < window; ++wx) {
                    sum_x += x.at(ox + wx, oy + wy);
                    sum_y += y.at(ox + wx, oy + wy);
                }
            const double mu_x = sum_x / wn;
            const double mu_y = sum_y / wn;
            double var_x = 0.0, var_y = 0.0, cov_xy = 0.0;
            for (int wy = 0; wy < window; ++wy)
                for (int wx = 0; wx < window; ++wx) {
                    const double dx = x.at(ox + wx, oy + wy) - mu_x;
                    const double dy = y.at(ox + wx, oy + wy) - mu_y;
                    var_x += dx * dx;
                    var_y += dy * dy;
                    cov_xy += dx * dy;
                }
            total += detail::ssim_from_stats(mu_x, mu_y, var_x / wn, var_y / wn, cov_xy / wn, p);
            ++positions;
        }
    }
    return total / static_cast<double>(positions);
}

}  // namespace clsim
