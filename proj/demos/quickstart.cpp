// End-to-end tour on a fully synthetic dataset: build an imbalanced blob
// hierarchy in memory, measure its class similarity, predict whether
// augmentation should help, then run the loop and report what changed.

#include <iostream>

#include "clsim/clsim.hpp"

int main() {
    const clsim::Size size{32, 32};
    clsim::BlobGenerator generator(size);

    // Three sub-classes under one super-class, deliberately imbalanced.
    const std::vector<std::pair<std::string, std::size_t>> layout{
        {"s1", 40}, {"s2", 12}, {"s3", 6}};

    clsim::MemoryImageStore store;
    clsim::ClassHierarchy dataset;
    dataset.name = "blob-demo";
    dataset.common_size = size;
    clsim::SuperClass sup;
    sup.id = "shapes";
    for (std::size_t c = 0; c < layout.size(); ++c) {
        clsim::SubClass sub;
        sub.id = layout[c].first;
        auto images = generator.generate(sub.id, layout[c].second, 100 + c);
        for (std::size_t k = 0; k < images.size(); ++k) {
            const std::string locator = "orig/" + sub.id + "/" + std::to_string(k);
            store.put(locator, std::move(images[k]));
            sub.images.push_back({locator, false});
        }
        sup.sub_classes.push_back(std::move(sub));
    }
    dataset.super_classes.push_back(std::move(sup));

    // Class-similarity metrics over the whole set and per super-class.
    clsim::BootstrapConfig metric_cfg;
    metric_cfg.seed = 42;
    metric_cfg.common_size = size;
    const auto merged = clsim::ssim_merge_cls(dataset, store, metric_cfg);
    const auto sup_sub = clsim::ssim_sup_sub_cls(dataset, store, metric_cfg);
    std::cout << "ssim-mergeCls:  " << merged.mean << "\n";
    std::cout << "ssim-supSubCls: " << sup_sub.max_value << " (super-class "
              << sup_sub.argmax_super_class << ")\n";

    // What the reference gain curve says about a dataset this similar.
    const auto curve = clsim::published_curve();
    std::cout << "predicted relative improvement: "
              << clsim::predict(curve, sup_sub.max_value) << " percent\n";
    std::cout << "verdict: "
              << (clsim::verdict_works(sup_sub.max_value) ? "works" : "does-not-work") << "\n";

    // Validation images come from the same generator, fresh seeds.
    clsim::LabeledSet val;
    val.classes = dataset.sub_class_ids();
    for (std::size_t c = 0; c < val.classes.size(); ++c)
        for (auto& img : generator.generate(val.classes[c], 10, 900 + c))
            val.items.emplace_back(std::move(img), static_cast<int>(c));

    // Generate-filter-retrain until accuracy stops moving.
    clsim::SoftmaxClassifier classifier;
    clsim::MemoryImageStore synthetic_store;
    clsim::MemorySink sink(synthetic_store);
    clsim::AugmentationConfig cfg;
    cfg.alpha = 0.8;
    cfg.common_size = size;
    cfg.seed = 42;
    const auto run = clsim::run_augmentation(dataset, store, val, generator, classifier, cfg, sink);

    std::cout << "augmentation steps: " << run.steps.size() << "\n";
    for (std::size_t i = 0; i < run.steps.size(); ++i) {
        const auto& step = run.steps[i];
        std::size_t accepted = 0;
        for (const auto& [id, n] : step.accepted) accepted += n;
        std::cout << "  step " << (i + 1) << ": accepted " << accepted << ", rejected "
                  << step.rejected << ", val accuracy " << step.val_accuracy_before << " -> "
                  << step.val_accuracy_after << "\n";
    }
    const auto counts = clsim::class_counts(run.final_dataset);
    std::cout << "final per-class counts:";
    for (const auto& [id, n] : counts.per_sub_class) std::cout << " " << id << "=" << n;
    std::cout << "\n";
    return 0;
}
