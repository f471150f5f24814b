#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "clsim/image.hpp"
#include "clsim/image_io.hpp"
#include "clsim/manifest.hpp"
#include "clsim/parallel.hpp"
#include "clsim/set_similarity.hpp"

namespace clsim {

/// Images with sub-class labels, indexed against a fixed vocabulary.
struct LabeledSet {
    std::vector<std::string> classes;                // sorted sub-class ids
    std::vector<std::pair<GrayImage, int>> items;    // image, class index

    int class_index(const std::string& id) const {
        for (std::size_t i = 0; i < classes.size(); ++i)
            if (classes[i] == id) return static_cast<int>(i);
        return -1;
    }
};

/// Opaque trained-classifier state owned by the port that produced it.
struct TrainedClassifier {
    virtual ~TrainedClassifier() = default;
};

/**
 * Classifier abstraction used both to filter candidate images and to
 * track validation accuracy. predict_proba returns one probability per
 * vocabulary class, summing to 1.
 */
class ClassifierPort {
public:
    virtual ~ClassifierPort() = default;

    virtual std::unique_ptr<TrainedClassifier> train(const LabeledSet& data) const = 0;

    virtual std::vector<double> predict_proba(const TrainedClassifier& state,
                                              const GrayImage& image) const = 0;

    /// Top-1 accuracy in percent; the default argmaxes predict_proba.
    virtual double evaluate(const TrainedClassifier& state, const LabeledSet& val) const {
        if (val.items.empty()) throw std::invalid_argument("evaluate: empty validation set");
        std::size_t correct = 0;
        for (const auto& [image, label] : val.items) {
            const auto proba = predict_proba(state, image);
            std::size_t best = 0;
            for (std::size_t c = 1; c < proba.size(); ++c)
                if (proba[c] > proba[best]) best = c;
            if (static_cast<int>(best) == label) ++correct;
        }
        return 100.0 * static_cast<double>(correct) / static_cast<double>(val.items.size());
    }
};

/// Produces `count` candidate images of the configured common size.
class GeneratorPort {
public:
    virtual ~GeneratorPort() = default;
    virtual std::vector<GrayImage> generate(const std::string& sub_class, std::size_t count,
                                            std::uint64_t seed) = 0;
};

struct AugmentationConfig {
    double alpha = 0.9;                  // classifier probability threshold
    double epsilon = 0.5;                // stopping tolerance, percentage points
    std::size_t max_steps = 2;
    std::size_t target_count = 0;        // 0: raise every class to the head-class count
    std::size_t attempt_multiplier = 10; // candidate budget per missing image
    std::uint64_t seed = 0;
    Size common_size{128, 128};
};

struct AcceptedImage {
    std::string sub_class;
    std::string locator;
    double probability = 0.0;
};

struct StepRecord {
    std::map<std::string, std::size_t> accepted;
    std::size_t rejected = 0;
    std::map<std::string, std::size_t> shortfall;  // deficit left unfilled
    double val_accuracy_before = 0.0;
    double val_accuracy_after = 0.0;
    std::vector<AcceptedImage> accepted_images;
};

struct AugmentationRun {
    AugmentationConfig config;  // with target_count resolved
    std::vector<StepRecord> steps;
    ClassHierarchy final_dataset;
};

/// Destination for qualified synthetic images; returns their manifest locator.
class SyntheticSink {
public:
    virtual ~SyntheticSink() = default;
    virtual std::string store(const std::string& sub_class, std::size_t step, std::size_t index,
                              const GrayImage& image) = 0;
};

/// Writes accepted images as PNG files under root/synthetic/<sub-class>/.
class DirectorySink : public SyntheticSink {
public:
    explicit DirectorySink(std::filesystem::path root) : root_(std::move(root)) {}

    std::string store(const std::string& sub_class, std::size_t step, std::size_t index,
                      const GrayImage& image) override {
        const std::string rel = "synthetic/" + sub_class + "/step" + std::to_string(step) + "_" +
                                std::to_string(index) + ".png";
        const std::filesystem::path full = root_ / rel;
        std::filesystem::create_directories(full.parent_path());
        write_png_gray(full, image);
        return rel;
    }

private:
    std::filesystem::path root_;
};

/// Keeps accepted images in an in-process store; used by tests and demos.
class MemorySink : public SyntheticSink {
public:
    explicit MemorySink(MemoryImageStore& store) : store_(store) {}

    std::string store(const std::string& sub_class, std::size_t step, std::size_t index,
                      const GrayImage& image) override {
        const std::string rel = "synthetic/" + sub_class + "/step" + std::to_string(step) + "_" +
                                std::to_string(index) + ".png";
        store_.put(rel, image);
        return rel;
    }

private:
    MemoryImageStore& store_;
};

struct Candidate {
    GrayImage image;
    std::string target;
};

struct FilterOutcome {
    std::vector<std::pair<Candidate, double>> accepted;  // candidate with its probability
    std::size_t rejected = 0;
};

/**
 * Keep exactly the candidates whose predicted probability for their
 * target sub-class meets the threshold. Candidate order is preserved;
 * scoring may run on parallel workers.
 */
inline FilterOutcome filter_qualified(std::vector<Candidate> candidates,
                                      const ClassifierPort& port, const TrainedClassifier& state,
                                      const std::vector<std::string>& classes, double alpha) {
    std::vector<int> targets(candidates.size());
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        int idx = -1;
        for (std::size_t c = 0; c < classes.size(); ++c)
            if (classes[c] == candidates[i].target) {
                idx = static_cast<int>(c);
                break;
            }
        if (idx < 0)
            throw std::invalid_argument("filter_qualified: target sub-class unknown to classifier: " +
                                        candidates[i].target);
        targets[i] = idx;
    }

    std::vector<double> probs(candidates.size());
    parallel::for_index(candidates.size(), [&](std::size_t i) {
        const auto proba = port.predict_proba(state, candidates[i].image);
        if (proba.size() != classes.size())
            throw std::runtime_error("classifier returned a probability vector of wrong length");
        probs[i] = proba[targets[i]];
    });

    FilterOutcome out;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        if (probs[i] >= alpha)
            out.accepted.emplace_back(std::move(candidates[i]), probs[i]);
        else
            ++out.rejected;
    }
    return out;
}

namespace detail {

/// Current dataset plus in-memory copies of its synthetic members.
struct WorkingSet {
    ClassHierarchy hierarchy;
    std::map<std::string, GrayImage> synthetic;

    const GrayImage& image_of(ImageStore& originals, const ImageRef& ref) const {
        if (ref.synthetic) {
            auto it = synthetic.find(ref.path);
            if (it == synthetic.end())
                throw std::runtime_error("synthetic image missing from working set: " + ref.path);
            return it->second;
        }
        return originals.get(ref.path);
    }
};

inline LabeledSet labeled_from(const WorkingSet& ws, ImageStore& originals,
                               const std::vector<std::string>& classes) {
    LabeledSet set;
    set.classes = classes;
    for (const auto& sup : ws.hierarchy.super_classes)
        for (const auto& sub : sup.sub_classes) {
            const int label = set.class_index(sub.id);
            if (label < 0) throw std::runtime_error("sub-class missing from vocabulary: " + sub.id);
            for (const auto& ref : sub.images)
                set.items.emplace_back(ws.image_of(originals, ref), label);
        }
    return set;
}

}  // namespace detail

/**
 * One generate-filter-append pass. Every sub-class below the target
 * requests candidate batches until its deficit is filled with qualified
 * images or the candidate budget (attempt_multiplier * deficit) is
 * exhausted. Accepted images are appended to the hierarchy as synthetic
 * references; validation accuracies are filled in by the caller.
 */
inline StepRecord augmentation_step(detail::WorkingSet& ws, GeneratorPort& generator,
                                    const ClassifierPort& port, const TrainedClassifier& state,
                                    const std::vector<std::string>& classes,
                                    const AugmentationConfig& cfg, SyntheticSink& sink,
                                    std::size_t step_index) {
    if (cfg.attempt_multiplier < 1)
        throw std::invalid_argument("augmentation: attempt multiplier must be at least 1");
    StepRecord record;
    for (auto& sup : ws.hierarchy.super_classes) {
        for (auto& sub : sup.sub_classes) {
            if (sub.images.size() > cfg.target_count)
                throw std::invalid_argument("augmentation: sub-class " + sub.id +
                                            " exceeds the target count");
            const std::size_t deficit = cfg.target_count - sub.images.size();
            if (deficit == 0) continue;

            const std::size_t budget = cfg.attempt_multiplier * deficit;
            std::size_t accepted = 0, attempts = 0, batch_no = 0, stored = 0;
            while (accepted < deficit && attempts < budget) {
                const std::size_t batch =
                    std::min(deficit - accepted, budget - attempts);
                const std::uint64_t batch_seed = derive_seed(
                    cfg.seed, "gen/" + std::to_string(step_index) + "/" + sub.id + "/" +
                                  std::to_string(batch_no));
                auto images = generator.generate(sub.id, batch, batch_seed);
                if (images.size() != batch)
                    throw std::runtime_error("generator returned " + std::to_string(images.size()) +
                                             " images, expected " + std::to_string(batch));
                std::vector<Candidate> candidates;
                candidates.reserve(images.size());
                for (auto& img : images) {
                    validate_image(img, "generated image");
                    if (img.size() != cfg.common_size)
                        throw std::runtime_error("generated image size differs from common size");
                    candidates.push_back({std::move(img), sub.id});
                }

                auto outcome = filter_qualified(std::move(candidates), port, state, classes, cfg.alpha);
                for (auto& [cand, prob] : outcome.accepted) {
                    const std::string locator = sink.store(sub.id, step_index, stored++, cand.image);
                    ws.synthetic.emplace(locator, std::move(cand.image));
                    sub.images.push_back({locator, true});
                    record.accepted_images.push_back({sub.id, locator, prob});
                    ++accepted;
                }
                record.rejected += outcome.rejected;
                attempts += batch;
                ++batch_no;
            }
            record.accepted[sub.id] = accepted;
            if (accepted < deficit) record.shortfall[sub.id] = deficit - accepted;
        }
    }
    return record;
}

/**
 * The full augmentation loop: train on the current set, generate and
 * filter candidates with that classifier, retrain on the augmented set,
 * and evaluate on held-out data. The filtering classifier of each step
 * is the one retrained in the immediately preceding step. Stops when
 * the accuracy delta falls below epsilon or after max_steps.
 */
inline AugmentationRun run_augmentation(const ClassHierarchy& original, ImageStore& originals,
                                        const LabeledSet& validation, GeneratorPort& generator,
                                        const ClassifierPort& port, AugmentationConfig cfg,
                                        SyntheticSink& sink) {
    validate_hierarchy(original);
    if (validation.items.empty()) throw std::invalid_argument("augmentation: empty validation set");
    if (cfg.max_steps < 1) throw std::invalid_argument("augmentation: max_steps must be at least 1");
    if (!(cfg.alpha >= 0.0 && cfg.alpha <= 1.0))
        throw std::invalid_argument("augmentation: alpha must lie in [0, 1]");
    if (!(cfg.epsilon >= 0.0)) throw std::invalid_argument("augmentation: epsilon must be >= 0");

    const std::vector<std::string> classes = original.sub_class_ids();
    if (validation.classes != classes)
        throw std::invalid_argument("augmentation: validation vocabulary differs from training set");

    const ClassCounts counts = class_counts(original);
    if (cfg.target_count == 0) cfg.target_count = counts.max_count;
    if (cfg.target_count < counts.max_count)
        throw std::invalid_argument("augmentation: target count below the largest sub-class");

    AugmentationRun run;
    run.config = cfg;
    detail::WorkingSet ws{original, {}};

    auto state = port.train(detail::labeled_from(ws, originals, classes));
    double acc_before = port.evaluate(*state, validation);

    for (std::size_t step = 1; step <= cfg.max_steps; ++step) {
        StepRecord record = augmentation_step(ws, generator, port, *state, classes, cfg, sink, step);
        state = port.train(detail::labeled_from(ws, originals, classes));
        const double acc_after = port.evaluate(*state, validation);
        record.val_accuracy_before = acc_before;
        record.val_accuracy_after = acc_after;
        run.steps.push_back(std::move(record));
        if (acc_after - acc_before < cfg.epsilon) break;
        acc_before = acc_after;
    }

    run.final_dataset = ws.hierarchy;
    return run;
}

/// Run ledger in the documented JSON schema.
inline nlohmann::json ledger_json(const AugmentationRun& run, const std::string& final_manifest) {
    nlohmann::json steps = nlohmann::json::array();
    for (const auto& s : run.steps) {
        nlohmann::json js;
        js["accepted"] = s.accepted;
        js["rejected"] = s.rejected;
        js["shortfall"] = s.shortfall;
        js["val_acc_before"] = s.val_accuracy_before;
        js["val_acc_after"] = s.val_accuracy_after;
        nlohmann::json imgs = nlohmann::json::array();
        for (const auto& a : s.accepted_images)
            imgs.push_back({{"sub_class", a.sub_class},
                            {"locator", a.locator},
                            {"probability", a.probability}});
        js["accepted_images"] = imgs;
        steps.push_back(std::move(js));
    }
    return nlohmann::json{
        {"config",
         {{"alpha", run.config.alpha},
          {"epsilon", run.config.epsilon},
          {"max_steps", run.config.max_steps},
          {"target_count", run.config.target_count},
          {"attempt_multiplier", run.config.attempt_multiplier},
          {"seed", run.config.seed},
          {"common_size", {run.config.common_size.width, run.config.common_size.height}}}},
        {"steps", steps},
        {"final_manifest", final_manifest}};
}

}  // namespace clsim
