#pragma once

#include <cmath>
#include <istream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace clsim {

/**
 * Exponential accuracy-gain curve f(x) = exp(alpha*x + beta), with f in
 * percent. A base-b form b^(p*x + q) collapses to the same two degrees
 * of freedom via alpha = p*ln(b), beta = q*ln(b).
 */
struct GainCurve {
    double alpha = 0.0;
    double beta = 0.0;
};

struct FitDiagnostics {
    double r_squared = 0.0;
    double mae = 0.0;  // percentage points
    std::size_t n_points = 0;
};

struct GainPoint {
    std::string label;
    double x = 0.0;            // class-similarity metric value
    double improvement = 0.0;  // relative top-1 accuracy improvement, percent
};

enum class FitMethod { LogLinear, DirectNlls };

struct FitResult {
    GainCurve curve;
    FitDiagnostics diagnostics;
    std::vector<std::string> warnings;
};

/// Metric value at or below which generative augmentation is expected to help.
inline constexpr double kDefaultVerdictThreshold = 0.1652;

/// 100 * (aug - orig) / orig, both accuracies in percent.
inline double relative_improvement(double acc_orig, double acc_aug) {
    if (!(acc_orig > 0.0))
        throw std::invalid_argument("relative_improvement: original accuracy must be positive");
    return 100.0 * (acc_aug - acc_orig) / acc_orig;
}

inline GainCurve curve_from_triple(double base, double p, double q) {
    if (!(base > 0.0)) throw std::invalid_argument("gain curve base must be positive");
    const double lb = std::log(base);
    return {p * lb, q * lb};
}

/// The reference decay curve 0.94^(202.74*x - 79.92).
inline GainCurve published_curve() { return curve_from_triple(0.94, 202.74, -79.92); }

inline double predict(const GainCurve& c, double x) { return std::exp(c.alpha * x + c.beta); }

/// True when augmentation is expected to work; the threshold is inclusive.
inline bool verdict_works(double x, double threshold = kDefaultVerdictThreshold) {
    return x <= threshold;
}

namespace detail {

inline double curve_sse(const GainCurve& c, const std::vector<GainPoint>& pts) {
    double sse = 0.0;
    for (const auto& p : pts) {
        const double r = predict(c, p.x) - p.improvement;
        sse += r * r;
    }
    return sse;
}

/// Diagnostics in the original percent space, never log space.
inline FitDiagnostics diagnose(const GainCurve& c, const std::vector<GainPoint>& pts) {
    FitDiagnostics d;
    d.n_points = pts.size();
    double mean_y = 0.0;
    for (const auto& p : pts) mean_y += p.improvement;
    mean_y /= static_cast<double>(pts.size());

    double sse = 0.0, sst = 0.0, abs_sum = 0.0;
    for (const auto& p : pts) {
        const double r = predict(c, p.x) - p.improvement;
        sse += r * r;
        abs_sum += std::abs(r);
        const double t = p.improvement - mean_y;
        sst += t * t;
    }
    d.mae = abs_sum / static_cast<double>(pts.size());
    if (sst > 0.0)
        d.r_squared = 1.0 - sse / sst;
    else
        d.r_squared = sse <= 1e-18 ? 1.0 : -std::numeric_limits<double>::infinity();
    return d;
}

/// Ordinary least squares of ln(improvement) on x. Requires improvements > 0.
inline GainCurve fit_log_linear(const std::vector<GainPoint>& pts) {
    const auto n = static_cast<double>(pts.size());
    double sum_x = 0.0, sum_ly = 0.0;
    for (const auto& p : pts) {
        sum_x += p.x;
        sum_ly += std::log(p.improvement);
    }
    const double mx = sum_x / n;
    const double mly = sum_ly / n;
    double sxx = 0.0, sxy = 0.0;
    for (const auto& p : pts) {
        const double dx = p.x - mx;
        sxx += dx * dx;
        sxy += dx * (std::log(p.improvement) - mly);
    }
    if (!(sxx > 0.0))
        throw std::invalid_argument("fit: all metric values identical, slope is undetermined");
    const double alpha = sxy / sxx;
    return {alpha, mly - alpha * mx};
}

/**
 * Gauss-Newton iteration on the percent-space residuals with Levenberg
 * damping: (J^T J + lambda I) step = -J^T r. Steps that do not decrease
 * the squared error inflate lambda and retry.
 */
inline GainCurve fit_direct_nlls(const std::vector<GainPoint>& pts, GainCurve start) {
    constexpr int kMaxIterations = 500;
    GainCurve cur = start;
    double sse = curve_sse(cur, pts);
    if (!std::isfinite(sse)) {
        cur = {0.0, 0.0};
        sse = curve_sse(cur, pts);
    }
    double lambda = 1e-3;

    for (int it = 0; it < kMaxIterations; ++it) {
        double jtj00 = 0.0, jtj01 = 0.0, jtj11 = 0.0, g0 = 0.0, g1 = 0.0;
        for (const auto& p : pts) {
            const double f = predict(cur, p.x);
            const double r = f - p.improvement;
            const double ja = p.x * f;  // df/dalpha
            const double jb = f;        // df/dbeta
            jtj00 += ja * ja;
            jtj01 += ja * jb;
            jtj11 += jb * jb;
            g0 += ja * r;
            g1 += jb * r;
        }

        const double a00 = jtj00 + lambda;
        const double a11 = jtj11 + lambda;
        const double det = a00 * a11 - jtj01 * jtj01;
        if (det == 0.0 || !std::isfinite(det)) {
            lambda *= 10.0;
            continue;
        }
        const double step_a = (-g0 * a11 + g1 * jtj01) / det;
        const double step_b = (-g1 * a00 + g0 * jtj01) / det;

        const GainCurve trial{cur.alpha + step_a, cur.beta + step_b};
        const double trial_sse = curve_sse(trial, pts);

        if (std::isfinite(trial_sse) && trial_sse < sse) {
            const double drop = sse - trial_sse;
            cur = trial;
            sse = trial_sse;
            lambda = std::max(lambda / 3.0, 1e-12);
            const double step_norm = std::hypot(step_a, step_b);
            const double param_norm = std::hypot(cur.alpha, cur.beta);
            if (drop <= 1e-14 * std::max(sse, 1.0) || step_norm <= 1e-13 * (param_norm + 1e-13))
                return cur;
        } else {
            lambda *= 10.0;
            if (lambda > 1e16) {
                // Damping this large means no descent direction is left.
                return cur;
            }
        }
    }
    throw std::runtime_error("fit: no convergence after 500 damped iterations");
}

}  // namespace detail

/**
 * Fit the exponential gain curve to (metric, improvement) points.
 *
 * LogLinear regresses ln(improvement) on the metric and silently needs
 * positive improvements; points that violate this are dropped with a
 * warning. DirectNlls minimizes the percent-space squared error,
 * starting from the log-linear solution over the positive subset; if
 * that start converges to a worse optimum than the reference curve, a
 * second run starts from the reference curve and the better of the two
 * is kept, so the fitted error never exceeds the reference curve's.
 * Diagnostics are always computed in percent space on all points.
 */
inline FitResult fit_gain_curve(const std::vector<GainPoint>& points, FitMethod method) {
    if (points.size() < 2) throw std::invalid_argument("fit: need at least 2 points");
    for (const auto& p : points)
        if (!std::isfinite(p.x) || !std::isfinite(p.improvement))
            throw std::invalid_argument("fit: non-finite point: " + p.label);

    FitResult result;
    std::vector<GainPoint> positive;
    for (const auto& p : points)
        if (p.improvement > 0.0) positive.push_back(p);

    if (method == FitMethod::LogLinear) {
        if (positive.size() != points.size())
            result.warnings.push_back("log-linear fit dropped " +
                                      std::to_string(points.size() - positive.size()) +
                                      " non-positive improvement point(s)");
        if (positive.size() < 2)
            throw std::invalid_argument(
                "fit: log-linear needs at least 2 points with positive improvement");
        result.curve = detail::fit_log_linear(positive);
        result.diagnostics = detail::diagnose(result.curve, points);
    } else {
        GainCurve start{-1.0, 0.0};
        if (positive.size() >= 2) {
            start = detail::fit_log_linear(positive);
        } else {
            double scale = 0.0;
            for (const auto& p : points) scale += std::abs(p.improvement);
            scale = std::max(scale / static_cast<double>(points.size()), 1e-6);
            start = {-1.0, std::log(scale)};
        }
        result.curve = detail::fit_direct_nlls(points, start);
        if (detail::curve_sse(result.curve, points) > detail::curve_sse(published_curve(), points)) {
            const GainCurve retry = detail::fit_direct_nlls(points, published_curve());
            if (detail::curve_sse(retry, points) < detail::curve_sse(result.curve, points))
                result.curve = retry;
        }
        result.diagnostics = detail::diagnose(result.curve, points);
    }

    if (result.curve.alpha >= 0.0)
        result.warnings.push_back("fitted curve does not decay (alpha >= 0)");
    return result;
}

/// Fit report in the documented JSON schema; this is also the curve file format.
inline nlohmann::json fit_report_json(const FitResult& fit, const std::vector<GainPoint>& points) {
    const double lb = std::log(0.94);
    nlohmann::json pts = nlohmann::json::array();
    for (const auto& p : points)
        pts.push_back({{"label", p.label}, {"x", p.x}, {"improvement_percent", p.improvement}});
    return nlohmann::json{
        {"alpha", fit.curve.alpha},
        {"beta", fit.curve.beta},
        {"paper_form", {{"b", 0.94}, {"p", fit.curve.alpha / lb}, {"q", fit.curve.beta / lb}}},
        {"r_squared", fit.diagnostics.r_squared},
        {"mae_percent", fit.diagnostics.mae},
        {"points", pts}};
}

/// Read a curve from a fit report; accepts (alpha, beta) or the base-form triple.
inline GainCurve curve_from_json(const nlohmann::json& j) {
    try {
        if (j.contains("alpha") && j.contains("beta"))
            return {j.at("alpha").get<double>(), j.at("beta").get<double>()};
        const auto& form = j.at("paper_form");
        return curve_from_triple(form.at("b").get<double>(), form.at("p").get<double>(),
                                 form.at("q").get<double>());
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(std::string("malformed curve file: ") + e.what());
    }
}

/**
 * Parse gain points from CSV with header `label,x,improvement_percent`.
 */
inline std::vector<GainPoint> read_points_csv(std::istream& in) {
    std::vector<GainPoint> points;
    std::string line;
    bool header = true;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (header) {
            if (line != "label,x,improvement_percent")
                throw std::runtime_error("points CSV: expected header 'label,x,improvement_percent'");
            header = false;
            continue;
        }
        std::istringstream ls(line);
        GainPoint p;
        std::string x_str, y_str;
        if (!std::getline(ls, p.label, ',') || !std::getline(ls, x_str, ',') ||
            !std::getline(ls, y_str))
            throw std::runtime_error("points CSV: malformed line " + std::to_string(line_no));
        try {
            p.x = std::stod(x_str);
            p.improvement = std::stod(y_str);
        } catch (const std::exception&) {
            throw std::runtime_error("points CSV: non-numeric value on line " +
                                     std::to_string(line_no));
        }
        points.push_back(std::move(p));
    }
    return points;
}

}  // namespace clsim
