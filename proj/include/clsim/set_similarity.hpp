#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "clsim/image.hpp"
#include "clsim/image_io.hpp"
#include "clsim/manifest.hpp"
#include "clsim/parallel.hpp"
#include "clsim/ssim.hpp"

namespace clsim {

/**
 * Controls the bootstrap estimate of a set's expected pairwise
 * similarity. The number of sampled pairs is
 * ceil(repetition_multiplier * set size), at least 1.
 */
struct BootstrapConfig {
    double repetition_multiplier = 2.0;
    std::uint64_t seed = 0;
    Size common_size{128, 128};
    SsimParams ssim_params{};

    std::size_t repetitions_for(std::size_t set_size) const {
        if (!(repetition_multiplier > 0.0))
            throw std::invalid_argument("bootstrap: repetition multiplier must be positive");
        const double reps = std::ceil(repetition_multiplier * static_cast<double>(set_size));
        return reps < 1.0 ? 1 : static_cast<std::size_t>(reps);
    }
};

struct SetSimilarityEstimate {
    double mean = 0.0;
    double std_dev = 0.0;
    std::size_t n_pairs = 0;
    std::uint64_t seed = 0;

    bool operator==(const SetSimilarityEstimate&) const = default;
};

struct SupSubResult {
    std::map<std::string, SetSimilarityEstimate> per_super_class;
    double max_value = 0.0;
    std::string argmax_super_class;
};

/// Source of decoded images, already resampled to the analysis size.
class ImageStore {
public:
    virtual ~ImageStore() = default;
    virtual const GrayImage& get(const std::string& locator) = 0;
};

/// Decodes manifest images on demand and caches them by locator.
class DiskImageCache : public ImageStore {
public:
    DiskImageCache(std::filesystem::path base_dir, Size common_size)
        : base_dir_(std::move(base_dir)), common_size_(common_size) {}

    const GrayImage& get(const std::string& locator) override {
        std::lock_guard<std::mutex> lock(mutex_);
        auto it = cache_.find(locator);
        if (it != cache_.end()) return it->second;
        std::filesystem::path p(locator);
        if (!p.is_absolute() && !base_dir_.empty()) p = base_dir_ / p;
        auto [pos, inserted] = cache_.emplace(locator, load_image(p, common_size_));
        return pos->second;
    }

private:
    std::filesystem::path base_dir_;
    Size common_size_;
    std::unordered_map<std::string, GrayImage> cache_;
    std::mutex mutex_;
};

/// In-memory store for synthetic datasets and tests.
class MemoryImageStore : public ImageStore {
public:
    void put(const std::string& locator, GrayImage img) { images_[locator] = std::move(img); }

    const GrayImage& get(const std::string& locator) override {
        auto it = images_.find(locator);
        if (it == images_.end()) throw std::runtime_error("image not in store: " + locator);
        return it->second;
    }

private:
    std::unordered_map<std::string, GrayImage> images_;
};

namespace detail {

// splitmix64 finalizer; full-period mixer used for seed derivation.
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Unbiased draw in [0, n) using rejection; mt19937_64 output is fully
// specified by the standard, so pair sequences are portable.
inline std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t n) {
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t v;
    do {
        v = rng();
    } while (v >= limit);
    return v % n;
}

}  // namespace detail

/// Deterministic seed for a named sub-stream of a base seed.
inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag) {
    std::uint64_t h = 1469598103934665603ULL;  // FNV-1a over the tag
    for (char c : tag) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ULL;
    }
    return detail::mix64(seed ^ h);
}

/**
 * Sample `repetitions` ordered index pairs (i, j), i != j, uniformly
 * with replacement from a set of `set_size` elements. The whole list is
 * materialized up front so downstream evaluation order cannot affect
 * which pairs are drawn.
 */
inline std::vector<std::pair<std::uint32_t, std::uint32_t>> sample_pairs(std::size_t set_size,
                                                                         std::size_t repetitions,
                                                                         std::uint64_t seed) {
    if (set_size < 2) throw std::invalid_argument("sample_pairs: need at least 2 elements");
    std::mt19937_64 rng(seed);
    std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs;
    pairs.reserve(repetitions);
    for (std::size_t r = 0; r < repetitions; ++r) {
        const auto i = static_cast<std::uint32_t>(detail::bounded(rng, set_size));
        auto j = static_cast<std::uint32_t>(detail::bounded(rng, set_size - 1));
        if (j >= i) ++j;
        pairs.emplace_back(i, j);
    }
    return pairs;
}

/**
 * Bootstrap estimate of the expected pairwise similarity of an image
 * set. Pair evaluations may fan out to any number of workers; results
 * land in a pre-indexed buffer and are reduced in fixed index order, so
 * the estimate is bit-identical for a given seed regardless of the
 * worker count.
 */
inline SetSimilarityEstimate ssim_set(const std::vector<const GrayImage*>& images,
                                      const BootstrapConfig& cfg) {
    if (images.size() < 2) throw std::invalid_argument("ssim_set: need at least 2 images");
    for (const GrayImage* img : images) {
        if (img->width != images[0]->width || img->height != images[0]->height)
            throw std::invalid_argument("ssim_set: images must share dimensions");
        if (img->dynamic_range != cfg.ssim_params.dynamic_range)
            throw std::invalid_argument("ssim_set: dynamic range mismatch");
    }

    const std::size_t reps = cfg.repetitions_for(images.size());
    const auto pairs = sample_pairs(images.size(), reps, cfg.seed);

    std::vector<double> values(pairs.size());
    parallel::for_index(pairs.size(), [&](std::size_t k) {
        values[k] = ssim(*images[pairs[k].first], *images[pairs[k].second], cfg.ssim_params);
    });

    double sum = 0.0;
    for (double v : values) sum += v;
    const double mean = sum / static_cast<double>(values.size());
    double sq = 0.0;
    for (double v : values) {
        const double d = v - mean;
        sq += d * d;
    }
    const double std_dev =
        values.size() > 1 ? std::sqrt(sq / static_cast<double>(values.size() - 1)) : 0.0;

    return {mean, std_dev, values.size(), cfg.seed};
}

inline SetSimilarityEstimate ssim_set(const std::vector<GrayImage>& images,
                                      const BootstrapConfig& cfg) {
    std::vector<const GrayImage*> ptrs;
    ptrs.reserve(images.size());
    for (const auto& img : images) ptrs.push_back(&img);
    return ssim_set(ptrs, cfg);
}

namespace detail {

inline std::vector<const GrayImage*> collect_images(const ClassHierarchy& h, ImageStore& store,
                                                    const SuperClass* only = nullptr) {
    std::vector<const GrayImage*> images;
    for (const auto& sup : h.super_classes) {
        if (only && &sup != only) continue;
        for (const auto& sub : sup.sub_classes)
            for (const auto& ref : sub.images) images.push_back(&store.get(ref.path));
    }
    return images;
}

}  // namespace detail

/**
 * Expected pairwise similarity of the merged dataset: every image of
 * every class pooled into one set. Repetitions scale with the total
 * image count.
 */
inline SetSimilarityEstimate ssim_merge_cls(const ClassHierarchy& h, ImageStore& store,
                                            const BootstrapConfig& cfg) {
    validate_hierarchy(h);
    const auto images = detail::collect_images(h, store);
    return ssim_set(images, cfg);
}

/**
 * Per-super-class similarity estimates and their maximum. Each
 * super-class set gets repetitions proportional to its own size and a
 * seed derived deterministically from (cfg.seed, super-class id). The
 * reported value is the largest per-super-class mean; ties resolve to
 * the lexicographically smallest id.
 */
inline SupSubResult ssim_sup_sub_cls(const ClassHierarchy& h, ImageStore& store,
                                     const BootstrapConfig& cfg) {
    validate_hierarchy(h);
    SupSubResult result;
    for (const auto& sup : h.super_classes) {
        const auto images = detail::collect_images(h, store, &sup);
        if (images.size() < 2)
            throw std::invalid_argument("ssim_sup_sub_cls: super-class has fewer than 2 images: " +
                                        sup.id);
        BootstrapConfig sub_cfg = cfg;
        sub_cfg.seed = derive_seed(cfg.seed, sup.id);
        result.per_super_class[sup.id] = ssim_set(images, sub_cfg);
    }

    bool first = true;
    for (const auto& [id, est] : result.per_super_class) {
        if (first || est.mean > result.max_value) {
            result.max_value = est.mean;
            result.argmax_super_class = id;
            first = false;
        }
    }
    return result;
}

/// Analysis report in the documented JSON schema.
inline nlohmann::json analysis_report_json(const std::string& dataset,
                                           const SetSimilarityEstimate& merged,
                                           const SupSubResult& sup_sub,
                                           const BootstrapConfig& cfg) {
    nlohmann::json per;
    for (const auto& [id, est] : sup_sub.per_super_class)
        per[id] = {{"mean", est.mean}, {"std_dev", est.std_dev}, {"n_pairs", est.n_pairs}};
    return nlohmann::json{{"dataset", dataset},
                          {"ssim_merge_cls", merged.mean},
                          {"ssim_sup_sub_cls", sup_sub.max_value},
                          {"argmax_super_class", sup_sub.argmax_super_class},
                          {"per_super_class", per},
                          {"seed", cfg.seed},
                          {"repetition_multiplier", cfg.repetition_multiplier}};
}

}  // namespace clsim
