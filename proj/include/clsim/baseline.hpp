#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "clsim/augment.hpp"
#include "clsim/image.hpp"
#include "clsim/manifest.hpp"
#include "clsim/set_similarity.hpp"

namespace clsim {

namespace detail {

/// Box-Muller normal deviate; avoids the library distribution so the
/// stream is identical on every standard library.
inline double normal_sample(std::mt19937_64& rng) {
    constexpr double two_pi = 6.283185307179586476925286766559;
    // map to (0, 1]; never exactly 0 so the log is finite
    const double u1 = (static_cast<double>(rng() >> 11) + 1.0) * 0x1p-53;
    const double u2 = static_cast<double>(rng() >> 11) * 0x1p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
}

inline double clamp_pixel(double v, double range) {
    if (v < 0.0) return 0.0;
    if (v > range) return range;
    return v;
}

}  // namespace detail

struct SoftmaxClassifierConfig {
    int feature_size = 16;       // images are downsampled to feature_size^2 inputs
    double learning_rate = 1.0;
    int epochs = 300;
    double l2 = 1e-4;
};

/**
 * Multinomial logistic regression over downsampled pixel intensities,
 * trained by full-batch gradient descent with a fixed schedule. Training
 * is deterministic: zero-initialized weights, fixed iteration order, no
 * randomness. A reference implementation for tests and desk-scale runs;
 * any real model plugs in through the same port.
 */
class SoftmaxClassifier : public ClassifierPort {
public:
    explicit SoftmaxClassifier(SoftmaxClassifierConfig cfg = {}) : cfg_(cfg) {
        if (cfg_.feature_size < 1) throw std::invalid_argument("classifier: feature size must be >= 1");
        if (cfg_.epochs < 1) throw std::invalid_argument("classifier: epochs must be >= 1");
    }

    struct State : TrainedClassifier {
        std::vector<std::string> classes;
        int feature_size = 0;
        std::vector<double> weights;  // n_classes x (features + bias), row-major
    };

    std::unique_ptr<TrainedClassifier> train(const LabeledSet& data) const override {
        if (data.items.empty()) throw std::invalid_argument("classifier: empty training set");
        if (data.classes.empty()) throw std::invalid_argument("classifier: empty vocabulary");

        const std::size_t n_classes = data.classes.size();
        const std::size_t dim = feature_dim();
        const std::size_t n = data.items.size();

        std::vector<std::vector<double>> feats(n);
        for (std::size_t i = 0; i < n; ++i) feats[i] = features(data.items[i].first);

        auto state = std::make_unique<State>();
        state->classes = data.classes;
        state->feature_size = cfg_.feature_size;
        state->weights.assign(n_classes * dim, 0.0);

        std::vector<double> grad(n_classes * dim);
        std::vector<double> proba(n_classes);
        for (int epoch = 0; epoch < cfg_.epochs; ++epoch) {
            std::fill(grad.begin(), grad.end(), 0.0);
            for (std::size_t i = 0; i < n; ++i) {
                softmax(state->weights, feats[i], proba);
                const int label = data.items[i].second;
                for (std::size_t c = 0; c < n_classes; ++c) {
                    const double err = proba[c] - (static_cast<int>(c) == label ? 1.0 : 0.0);
                    double* g = grad.data() + c * dim;
                    const double* f = feats[i].data();
                    for (std::size_t d = 0; d < dim; ++d) g[d] += err * f[d];
                }
            }
            const double scale = cfg_.learning_rate / static_cast<double>(n);
            for (std::size_t k = 0; k < state->weights.size(); ++k)
                state->weights[k] -= scale * grad[k] + cfg_.learning_rate * cfg_.l2 * state->weights[k];
        }
        return state;
    }

    std::vector<double> predict_proba(const TrainedClassifier& state,
                                      const GrayImage& image) const override {
        const auto& s = dynamic_cast<const State&>(state);
        std::vector<double> proba(s.classes.size());
        softmax(s.weights, features(image), proba);
        return proba;
    }

private:
    std::size_t feature_dim() const {
        return static_cast<std::size_t>(cfg_.feature_size) * cfg_.feature_size + 1;
    }

    std::vector<double> features(const GrayImage& image) const {
        const GrayImage small = resize_bilinear(image, cfg_.feature_size, cfg_.feature_size);
        std::vector<double> f(feature_dim());
        for (std::size_t i = 0; i < small.pixels.size(); ++i)
            f[i] = small.pixels[i] / small.dynamic_range;
        f.back() = 1.0;  // bias
        return f;
    }

    static void softmax(const std::vector<double>& weights, const std::vector<double>& feat,
                        std::vector<double>& proba) {
        const std::size_t n_classes = proba.size();
        const std::size_t dim = feat.size();
        double max_z = -std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < n_classes; ++c) {
            double z = 0.0;
            const double* w = weights.data() + c * dim;
            for (std::size_t d = 0; d < dim; ++d) z += w[d] * feat[d];
            proba[c] = z;
            if (z > max_z) max_z = z;
        }
        double sum = 0.0;
        for (std::size_t c = 0; c < n_classes; ++c) {
            proba[c] = std::exp(proba[c] - max_z);
            sum += proba[c];
        }
        for (std::size_t c = 0; c < n_classes; ++c) proba[c] /= sum;
    }

    SoftmaxClassifierConfig cfg_;
};

/**
 * Resample-with-noise generator: draws a real image of the requested
 * sub-class and perturbs it with seeded Gaussian pixel noise, clamped to
 * the dynamic range and rounded to integral intensities.
 */
class NoiseGenerator : public GeneratorPort {
public:
    NoiseGenerator(const ClassHierarchy& h, ImageStore& store, Size common_size,
                   double noise_sigma = 12.0)
        : common_size_(common_size), sigma_(noise_sigma) {
        for (const auto& sup : h.super_classes)
            for (const auto& sub : sup.sub_classes) {
                auto& sources = sources_[sub.id];
                for (const auto& ref : sub.images)
                    if (!ref.synthetic) sources.push_back(&store.get(ref.path));
            }
    }

    std::vector<GrayImage> generate(const std::string& sub_class, std::size_t count,
                                    std::uint64_t seed) override {
        auto it = sources_.find(sub_class);
        if (it == sources_.end() || it->second.empty())
            throw std::runtime_error("noise generator: unknown sub-class: " + sub_class);
        const auto& sources = it->second;

        std::mt19937_64 rng(seed);
        std::vector<GrayImage> out;
        out.reserve(count);
        for (std::size_t k = 0; k < count; ++k) {
            const GrayImage& src = *sources[detail::bounded(rng, sources.size())];
            GrayImage img = to_common_size(src, common_size_);
            for (double& p : img.pixels)
                p = std::round(detail::clamp_pixel(p + sigma_ * detail::normal_sample(rng),
                                                   img.dynamic_range));
            out.push_back(std::move(img));
        }
        return out;
    }

private:
    std::map<std::string, std::vector<const GrayImage*>> sources_;
    Size common_size_;
    double sigma_;
};

/**
 * Fully synthetic generator: each sub-class id maps to a fixed Gaussian
 * blob prototype (position and radius derived from the id), sampled with
 * seeded pixel noise. Lets the whole pipeline run without any real data.
 */
class BlobGenerator : public GeneratorPort {
public:
    explicit BlobGenerator(Size common_size, double noise_sigma = 8.0)
        : common_size_(common_size), sigma_(noise_sigma) {}

    struct Prototype {
        double cx, cy, radius;
    };

    Prototype prototype_for(const std::string& sub_class) const {
        const std::uint64_t h = derive_seed(0x5eedb10bULL, sub_class);
        const int cell = static_cast<int>(h % 9);           // 3x3 grid of centers
        const int radius_step = static_cast<int>((h / 9) % 3);
        Prototype p;
        p.cx = (0.25 + 0.25 * (cell % 3)) * common_size_.width;
        p.cy = (0.25 + 0.25 * (cell / 3)) * common_size_.height;
        p.radius = (0.10 + 0.06 * radius_step) * std::min(common_size_.width, common_size_.height);
        return p;
    }

    std::vector<GrayImage> generate(const std::string& sub_class, std::size_t count,
                                    std::uint64_t seed) override {
        const Prototype proto = prototype_for(sub_class);
        std::mt19937_64 rng(seed);
        std::vector<GrayImage> out;
        out.reserve(count);
        for (std::size_t k = 0; k < count; ++k) {
            GrayImage img = GrayImage::zeros(common_size_.width, common_size_.height);
            for (int y = 0; y < img.height; ++y)
                for (int x = 0; x < img.width; ++x) {
                    const double dx = x - proto.cx;
                    const double dy = y - proto.cy;
                    const double blob =
                        205.0 * std::exp(-(dx * dx + dy * dy) / (2.0 * proto.radius * proto.radius));
                    const double v = 25.0 + blob + sigma_ * detail::normal_sample(rng);
                    img.at(x, y) = std::round(detail::clamp_pixel(v, img.dynamic_range));
                }
            out.push_back(std::move(img));
        }
        return out;
    }

private:
    Size common_size_;
    double sigma_;
};

}  // namespace clsim
