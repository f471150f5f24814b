// clsim command-line tool: dataset class-similarity analysis, gain-curve
// fitting and prediction, and the generate-filter-retrain augmentation loop.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "clsim/clsim.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct GlobalOptions {
    std::uint64_t seed = 42;
    int threads = 0;  // 0: keep the CLSIM_THREADS / hardware default
    std::string common_size = "128x128";
    bool common_size_given = false;
    std::string out;
};

clsim::Size parse_size(const std::string& text) {
    const auto sep = text.find('x');
    if (sep == std::string::npos) throw UsageError("size must look like WxH: " + text);
    try {
        const int w = std::stoi(text.substr(0, sep));
        const int h = std::stoi(text.substr(sep + 1));
        if (w < 1 || h < 1) throw UsageError("size components must be positive: " + text);
        return {w, h};
    } catch (const UsageError&) {
        throw;
    } catch (const std::exception&) {
        throw UsageError("size must look like WxH: " + text);
    }
}

clsim::Size effective_common_size(const GlobalOptions& g, const clsim::ClassHierarchy& h) {
    if (g.common_size_given || !h.common_size) return parse_size(g.common_size);
    return *h.common_size;
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write output file: " + path);
    out << content;
}

std::vector<clsim::GainPoint> load_points_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open points CSV: " + path);
    return clsim::read_points_csv(in);
}

nlohmann::json load_json(const std::string& path, const char* what) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error(std::string("cannot open ") + what + ": " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(std::string("malformed ") + what + " '" + path + "': " + e.what());
    }
    return j;
}

std::string format_fixed(double v, int decimals) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(decimals) << v;
    return os.str();
}

// ---------------------------------------------------------------- ssim

struct SsimArgs {
    std::string image_a, image_b;
    bool windowed = false;
    double k1 = 0.01, k2 = 0.03;
};

int cmd_ssim(const GlobalOptions& g, const SsimArgs& a) {
    const clsim::Size size = parse_size(g.common_size);
    clsim::GrayImage x = clsim::load_image(a.image_a);
    clsim::GrayImage y = clsim::load_image(a.image_b);
    if (x.size() != y.size() || g.common_size_given) {
        x = clsim::to_common_size(x, size);
        y = clsim::to_common_size(y, size);
    }
    clsim::SsimParams params;
    params.k1 = a.k1;
    params.k2 = a.k2;
    const double value = a.windowed ? clsim::ssim_windowed(x, y, params) : clsim::ssim(x, y, params);
    std::cout << format_fixed(value, 6) << "\n";
    return kExitOk;
}

// ------------------------------------------------------------- analyze

struct AnalyzeArgs {
    std::string manifest;
    double repetition_multiplier = 2.0;
};

int cmd_analyze(const GlobalOptions& g, const AnalyzeArgs& a) {
    const clsim::ClassHierarchy h = clsim::load_manifest(a.manifest);
    const clsim::Size size = effective_common_size(g, h);

    clsim::BootstrapConfig cfg;
    cfg.repetition_multiplier = a.repetition_multiplier;
    cfg.seed = g.seed;
    cfg.common_size = size;

    clsim::DiskImageCache cache(h.base_dir, size);
    const auto merged = clsim::ssim_merge_cls(h, cache, cfg);
    const auto sup_sub = clsim::ssim_sup_sub_cls(h, cache, cfg);

    const std::string dataset = h.name.empty() ? fs::path(a.manifest).stem().string() : h.name;
    std::cout << "dataset:            " << dataset << "\n";
    std::cout << "ssim-mergeCls:      " << format_fixed(merged.mean, 4) << "\n";
    std::cout << "ssim-supSubCls:     " << format_fixed(sup_sub.max_value, 4) << "\n";
    std::cout << "argmax super-class: " << sup_sub.argmax_super_class << "\n";
    std::cout << "verdict (threshold " << format_fixed(clsim::kDefaultVerdictThreshold, 4)
              << "): "
              << (clsim::verdict_works(sup_sub.max_value) ? "works" : "does-not-work") << "\n";
    if (sup_sub.max_value < merged.mean)
        std::cout << "warning: supSubCls is below mergeCls for this dataset\n";

    if (!g.out.empty()) {
        const auto report = clsim::analysis_report_json(dataset, merged, sup_sub, cfg);
        write_text_file(g.out, report.dump(2) + "\n");
    }
    return kExitOk;
}

// ----------------------------------------------------------------- fit

struct FitArgs {
    std::string points_csv;
    std::string method = "direct-nlls";
};

int cmd_fit(const GlobalOptions& g, const FitArgs& a) {
    const auto points = load_points_csv(a.points_csv);
    if (points.size() < 2) throw UsageError("fit needs at least 2 points, got " +
                                            std::to_string(points.size()));
    clsim::FitMethod method;
    if (a.method == "log-linear")
        method = clsim::FitMethod::LogLinear;
    else if (a.method == "direct-nlls")
        method = clsim::FitMethod::DirectNlls;
    else
        throw UsageError("unknown fit method: " + a.method);

    const auto fit = clsim::fit_gain_curve(points, method);
    for (const auto& w : fit.warnings) std::cout << "warning: " << w << "\n";
    const double lb = std::log(0.94);
    std::cout << "alpha:      " << format_fixed(fit.curve.alpha, 6) << "\n";
    std::cout << "beta:       " << format_fixed(fit.curve.beta, 6) << "\n";
    std::cout << "paper form: 0.94^(" << format_fixed(fit.curve.alpha / lb, 4) << "x "
              << (fit.curve.beta / lb >= 0 ? "+ " : "- ")
              << format_fixed(std::abs(fit.curve.beta / lb), 4) << ")\n";
    std::cout << "r_squared:  " << format_fixed(fit.diagnostics.r_squared, 4) << "\n";
    std::cout << "mae:        " << format_fixed(fit.diagnostics.mae, 4) << " percentage points\n";

    if (!g.out.empty())
        write_text_file(g.out, clsim::fit_report_json(fit, points).dump(2) + "\n");
    return kExitOk;
}

// -------------------------------------------------------------- predict

struct PredictArgs {
    std::string curve_file;
    bool published = false;
    double x = 0.0;
    double threshold = clsim::kDefaultVerdictThreshold;
};

int cmd_predict(const GlobalOptions&, const PredictArgs& a) {
    if (a.published == !a.curve_file.empty())
        throw UsageError("pass exactly one of --curve FILE or --published");
    const clsim::GainCurve curve =
        a.published ? clsim::published_curve() : clsim::curve_from_json(load_json(a.curve_file, "curve file"));
    if (!std::isfinite(a.x)) throw UsageError("x must be finite");

    std::cout << "predicted improvement: " << format_fixed(clsim::predict(curve, a.x), 2)
              << " percent\n";
    std::cout << "verdict: " << (clsim::verdict_works(a.x, a.threshold) ? "works" : "does-not-work")
              << "\n";
    return kExitOk;
}

// -------------------------------------------------------------- augment

struct AugmentArgs {
    std::string manifest;
    std::string val_manifest;
    double alpha = 0.9;
    double epsilon = 0.5;
    std::size_t max_steps = 2;
    std::size_t target_count = 0;
    std::size_t attempt_multiplier = 10;
    std::string generator = "noise";
    double noise_sigma = 12.0;
};

clsim::LabeledSet labeled_set_from_manifest(const clsim::ClassHierarchy& h, clsim::ImageStore& store,
                                            const std::vector<std::string>& classes) {
    clsim::LabeledSet set;
    set.classes = classes;
    for (const auto& sup : h.super_classes)
        for (const auto& sub : sup.sub_classes) {
            const int label = set.class_index(sub.id);
            if (label < 0)
                throw std::runtime_error("validation sub-class not in training vocabulary: " + sub.id);
            for (const auto& ref : sub.images) set.items.emplace_back(store.get(ref.path), label);
        }
    return set;
}

int cmd_augment(const GlobalOptions& g, const AugmentArgs& a) {
    if (g.out.empty()) throw UsageError("augment requires --out RUN_DIR");

    const clsim::ClassHierarchy train = clsim::load_manifest(a.manifest);
    const clsim::ClassHierarchy val = clsim::load_manifest(a.val_manifest);
    const clsim::Size size = effective_common_size(g, train);

    clsim::AugmentationConfig cfg;
    cfg.alpha = a.alpha;
    cfg.epsilon = a.epsilon;
    cfg.max_steps = a.max_steps;
    cfg.target_count = a.target_count;
    cfg.attempt_multiplier = a.attempt_multiplier;
    cfg.seed = g.seed;
    cfg.common_size = size;

    const fs::path run_dir(g.out);
    fs::create_directories(run_dir);

    clsim::DiskImageCache train_cache(train.base_dir, size);
    clsim::DiskImageCache val_cache(val.base_dir, size);
    const auto classes = train.sub_class_ids();
    const auto val_set = labeled_set_from_manifest(val, val_cache, classes);

    std::unique_ptr<clsim::GeneratorPort> generator;
    if (a.generator == "noise") {
        generator = std::make_unique<clsim::NoiseGenerator>(train, train_cache, size, a.noise_sigma);
    } else if (a.generator == "blob") {
        generator = std::make_unique<clsim::BlobGenerator>(size);
    } else if (a.generator.rfind("subprocess:", 0) == 0) {
        generator = std::make_unique<clsim::SubprocessGenerator>(a.generator.substr(11), size,
                                                                 run_dir / "generator_scratch");
    } else {
        throw UsageError("unknown generator: " + a.generator +
                         " (expected noise, blob, or subprocess:PATH)");
    }

    clsim::SoftmaxClassifier classifier;
    clsim::DirectorySink sink(run_dir);
    auto run = clsim::run_augmentation(train, train_cache, val_set, *generator, classifier, cfg, sink);

    // Final manifest lives in the run directory; original image paths
    // must keep resolving, so they are rewritten relative to it.
    clsim::ClassHierarchy final_h = run.final_dataset;
    for (auto& sup : final_h.super_classes)
        for (auto& sub : sup.sub_classes)
            for (auto& ref : sub.images) {
                if (ref.synthetic) continue;
                const fs::path abs = fs::absolute(clsim::resolve_image_path(train, ref));
                ref.path = fs::relative(abs, fs::absolute(run_dir)).generic_string();
            }
    const fs::path manifest_path = run_dir / "final_manifest.json";
    clsim::save_manifest(final_h, manifest_path);
    write_text_file((run_dir / "ledger.json").string(),
                    clsim::ledger_json(run, manifest_path.string()).dump(2) + "\n");

    std::cout << "steps executed: " << run.steps.size() << "\n";
    for (std::size_t i = 0; i < run.steps.size(); ++i) {
        const auto& s = run.steps[i];
        std::size_t accepted = 0;
        for (const auto& [id, n] : s.accepted) accepted += n;
        std::cout << "step " << (i + 1) << ": accepted " << accepted << ", rejected " << s.rejected
                  << ", val acc " << format_fixed(s.val_accuracy_before, 2) << " -> "
                  << format_fixed(s.val_accuracy_after, 2) << "\n";
    }
    std::cout << "final manifest: " << manifest_path.string() << "\n";
    return kExitOk;
}

// --------------------------------------------------------------- report

struct ReportArgs {
    std::vector<std::string> analysis_reports;
    std::string points_csv;
    std::string curve_file;
    bool published = false;
    int curve_samples = 200;
};

int cmd_report(const GlobalOptions& g, const ReportArgs& a) {
    if (a.published == !a.curve_file.empty())
        throw UsageError("pass exactly one of --curve FILE or --published");
    if (a.analysis_reports.empty() && a.points_csv.empty())
        throw UsageError("report needs at least one analysis report or --points CSV");

    const clsim::GainCurve curve =
        a.published ? clsim::published_curve() : clsim::curve_from_json(load_json(a.curve_file, "curve file"));

    struct Row {
        std::string label;
        double x;
        std::optional<double> improvement;
    };
    std::vector<Row> rows;
    if (!a.points_csv.empty())
        for (const auto& p : load_points_csv(a.points_csv))
            rows.push_back({p.label, p.x, p.improvement});
    for (const auto& path : a.analysis_reports) {
        const auto j = load_json(path, "analysis report");
        try {
            rows.push_back({j.at("dataset").get<std::string>(),
                            j.at("ssim_sup_sub_cls").get<double>(), std::nullopt});
        } catch (const nlohmann::json::exception& e) {
            throw std::runtime_error("malformed analysis report '" + path + "': " + e.what());
        }
    }

    double max_x = 0.0;
    for (const auto& r : rows) max_x = std::max(max_x, r.x);

    std::ostringstream csv;
    csv << "label,x,improvement_percent,predicted_percent\n";
    for (const auto& r : rows) {
        csv << r.label << "," << format_fixed(r.x, 6) << ",";
        if (r.improvement) csv << format_fixed(*r.improvement, 4);
        csv << "," << format_fixed(clsim::predict(curve, r.x), 4) << "\n";
    }
    const double hi = max_x * 1.1;
    for (int i = 0; i < a.curve_samples; ++i) {
        const double x = a.curve_samples > 1 ? hi * i / (a.curve_samples - 1) : 0.0;
        csv << "curve," << format_fixed(x, 6) << ",," << format_fixed(clsim::predict(curve, x), 4)
            << "\n";
    }

    if (g.out.empty())
        std::cout << csv.str();
    else
        write_text_file(g.out, csv.str());
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"class-similarity metrics, accuracy-gain modeling, and dataset augmentation"};
    app.require_subcommand(1);

    GlobalOptions g;
    app.add_option("--seed", g.seed, "base RNG seed")->capture_default_str();
    app.add_option("--threads", g.threads, "worker thread count (default: CLSIM_THREADS or all cores)");
    app.add_option("--common-size", g.common_size, "analysis image size WxH")
        ->capture_default_str()
        ->each([&g](const std::string&) { g.common_size_given = true; });
    app.add_option("--out", g.out, "output file or directory");

    SsimArgs ssim_args;
    auto* ssim_cmd = app.add_subcommand("ssim", "similarity of two images");
    ssim_cmd->add_option("imageA", ssim_args.image_a, "first image")->required();
    ssim_cmd->add_option("imageB", ssim_args.image_b, "second image")->required();
    ssim_cmd->add_flag("--windowed", ssim_args.windowed, "sliding-window variant");
    ssim_cmd->add_option("--k1", ssim_args.k1, "stabilization constant K1")->capture_default_str();
    ssim_cmd->add_option("--k2", ssim_args.k2, "stabilization constant K2")->capture_default_str();

    AnalyzeArgs analyze_args;
    auto* analyze_cmd = app.add_subcommand("analyze", "dataset class-similarity metrics");
    analyze_cmd->add_option("manifest", analyze_args.manifest, "dataset manifest JSON")->required();
    analyze_cmd->add_option("--repetition-multiplier", analyze_args.repetition_multiplier,
                            "bootstrap pairs per image")
        ->capture_default_str();

    FitArgs fit_args;
    auto* fit_cmd = app.add_subcommand("fit", "fit the exponential gain curve to points");
    fit_cmd->add_option("points_csv", fit_args.points_csv, "CSV label,x,improvement_percent")
        ->required();
    fit_cmd->add_option("--method", fit_args.method, "log-linear or direct-nlls")
        ->capture_default_str();

    PredictArgs predict_args;
    auto* predict_cmd = app.add_subcommand("predict", "predict improvement from a metric value");
    predict_cmd->add_option("--curve", predict_args.curve_file, "curve file from fit");
    predict_cmd->add_flag("--published", predict_args.published, "use the published curve");
    predict_cmd->add_option("x", predict_args.x, "metric value")->required();
    predict_cmd->add_option("--threshold", predict_args.threshold, "verdict threshold")
        ->capture_default_str();

    AugmentArgs augment_args;
    auto* augment_cmd = app.add_subcommand("augment", "run the augmentation loop");
    augment_cmd->add_option("manifest", augment_args.manifest, "training manifest")->required();
    augment_cmd->add_option("val_manifest", augment_args.val_manifest, "validation manifest")
        ->required();
    augment_cmd->add_option("--alpha", augment_args.alpha, "acceptance probability threshold")
        ->capture_default_str();
    augment_cmd->add_option("--epsilon", augment_args.epsilon, "stopping tolerance in points")
        ->capture_default_str();
    augment_cmd->add_option("--max-steps", augment_args.max_steps, "iteration cap")
        ->capture_default_str();
    augment_cmd->add_option("--target-count", augment_args.target_count,
                            "per-class target (0: head-class count)")
        ->capture_default_str();
    augment_cmd->add_option("--attempt-multiplier", augment_args.attempt_multiplier,
                            "candidate budget per missing image")
        ->capture_default_str();
    augment_cmd->add_option("--generator", augment_args.generator,
                            "noise, blob, or subprocess:PATH")
        ->capture_default_str();
    augment_cmd->add_option("--noise-sigma", augment_args.noise_sigma,
                            "noise generator pixel sigma")
        ->capture_default_str();

    ReportArgs report_args;
    auto* report_cmd = app.add_subcommand("report", "emit a scatter CSV for plotting");
    report_cmd->add_option("analysis_reports", report_args.analysis_reports,
                           "analysis report JSON files");
    report_cmd->add_option("--points", report_args.points_csv, "points CSV with improvements");
    report_cmd->add_option("--curve", report_args.curve_file, "curve file from fit");
    report_cmd->add_flag("--published", report_args.published, "use the published curve");
    report_cmd->add_option("--curve-samples", report_args.curve_samples,
                           "number of sampled curve rows")
        ->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    if (g.threads > 0) clsim::parallel::set_thread_count(g.threads);

    try {
        if (ssim_cmd->parsed()) return cmd_ssim(g, ssim_args);
        if (analyze_cmd->parsed()) return cmd_analyze(g, analyze_args);
        if (fit_cmd->parsed()) return cmd_fit(g, fit_args);
        if (predict_cmd->parsed()) return cmd_predict(g, predict_args);
        if (augment_cmd->parsed()) return cmd_augment(g, augment_args);
        if (report_cmd->parsed()) return cmd_report(g, report_args);
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::invalid_argument& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitUsage;
}
