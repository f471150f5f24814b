#include <cmath>
#include <random>
#include <sstream>

#include <catch2/catch_amalgamated.hpp>

#include "clsim/clsim.hpp"

using clsim::FitMethod;
using clsim::GainCurve;
using clsim::GainPoint;

namespace {

const std::vector<GainPoint> kCganPoints{
    {"UTKFace", 0.3834, 2.41},  {"Birds", 0.3742, 4.57},     {"Insects", 0.3115, 0.77},
    {"scene", 0.2625, 0.59},    {"flowers", 0.1652, 24.73},  {"Fungi", 0.0880, 50.00},
    {"Reptiles", 0.0793, 45.44}, {"Amphibians", 0.0792, 83.35}};

const std::vector<GainPoint> kGdPoints{
    {"Birds", 0.3742, 5.58}, {"scene", 0.2625, 0.13}, {"Fungi", 0.0880, 38.88}};

double sse_of(const GainCurve& c, const std::vector<GainPoint>& pts) {
    double sse = 0.0;
    for (const auto& p : pts) {
        const double r = clsim::predict(c, p.x) - p.improvement;
        sse += r * r;
    }
    return sse;
}

std::vector<GainPoint> points_on_curve(const GainCurve& c, const std::vector<double>& xs) {
    std::vector<GainPoint> pts;
    for (double x : xs) pts.push_back({"p" + std::to_string(pts.size()), x, clsim::predict(c, x)});
    return pts;
}

}  // namespace

TEST_CASE("relative improvement normalizes by the original accuracy") {
    CHECK(clsim::relative_improvement(50.00, 75.00) == Catch::Approx(50.00).margin(1e-12));
    CHECK(clsim::relative_improvement(64.14, 80.00) == Catch::Approx(24.73).margin(0.01));
    CHECK(clsim::relative_improvement(37.5, 37.5) == 0.0);
    CHECK(clsim::relative_improvement(80.0, 60.0) == Catch::Approx(-25.0).margin(1e-12));
    CHECK_THROWS_AS(clsim::relative_improvement(0.0, 10.0), std::invalid_argument);
    CHECK_THROWS_AS(clsim::relative_improvement(-5.0, 10.0), std::invalid_argument);
}

TEST_CASE("the reference curve matches its base-form constants") {
    const GainCurve c = clsim::published_curve();
    CHECK(c.alpha == Catch::Approx(-12.544619349805066).margin(1e-12));
    CHECK(c.beta == Catch::Approx(4.945082265149556).margin(1e-12));

    CHECK(clsim::predict(c, 0.39420) == Catch::Approx(1.0).margin(1e-4));
    CHECK(clsim::predict(c, 79.92 / 202.74) == Catch::Approx(1.0).margin(1e-12));
    CHECK(clsim::predict(c, 0.0) == Catch::Approx(140.4824071823348).epsilon(1e-12));

    double prev = clsim::predict(c, 0.0);
    for (double x = 0.05; x <= 1.0; x += 0.05) {
        const double cur = clsim::predict(c, x);
        CHECK(cur < prev);
        prev = cur;
    }
}

TEST_CASE("reparameterization collapses the triple to two parameters") {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> base_dist(0.3, 3.0);
    std::uniform_real_distribution<double> coef_dist(-50.0, 50.0);
    for (int i = 0; i < 25; ++i) {
        const double b = base_dist(rng);
        const double p = coef_dist(rng);
        const double q = coef_dist(rng);
        const GainCurve c = clsim::curve_from_triple(b, p, q);
        for (double x : {0.0, 0.1, 0.37, 0.9}) {
            const double direct = std::pow(b, p * x + q);
            CHECK(clsim::predict(c, x) == Catch::Approx(direct).epsilon(1e-9));
        }
    }
    CHECK_THROWS_AS(clsim::curve_from_triple(0.0, 1.0, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(clsim::curve_from_triple(-0.94, 1.0, 1.0), std::invalid_argument);
}

TEST_CASE("predict is a plain exponential") {
    const GainCurve constant{0.0, std::log(5.0)};
    CHECK(clsim::predict(constant, 0.0) == Catch::Approx(5.0).epsilon(1e-12));
    CHECK(clsim::predict(constant, 0.7) == Catch::Approx(5.0).epsilon(1e-12));

    const GainCurve decaying{-2.0, 1.0};
    CHECK(clsim::predict(decaying, 0.2) == Catch::Approx(std::exp(0.6)).epsilon(1e-12));
}

TEST_CASE("the verdict threshold is inclusive") {
    CHECK(clsim::verdict_works(0.0880));
    CHECK_FALSE(clsim::verdict_works(0.2625));
    CHECK(clsim::verdict_works(0.1652));  // boundary value carries a pass
    CHECK_FALSE(clsim::verdict_works(0.16521));
    CHECK(clsim::verdict_works(0.3, 0.3));
    CHECK_FALSE(clsim::verdict_works(0.3, 0.29));
}

TEST_CASE("noiseless points recover their generating curve") {
    const GainCurve truth{-12.5, 5.0};
    const auto pts = points_on_curve(truth, {0.05, 0.1, 0.18, 0.25, 0.33, 0.4});

    for (const FitMethod method : {FitMethod::LogLinear, FitMethod::DirectNlls}) {
        const auto fit = clsim::fit_gain_curve(pts, method);
        CHECK(fit.curve.alpha == Catch::Approx(truth.alpha).margin(1e-6));
        CHECK(fit.curve.beta == Catch::Approx(truth.beta).margin(1e-6));
        CHECK(fit.diagnostics.r_squared == Catch::Approx(1.0).margin(1e-9));
        CHECK(fit.diagnostics.mae == Catch::Approx(0.0).margin(1e-6));
        CHECK(fit.diagnostics.n_points == 6);
        CHECK(fit.warnings.empty());
    }
}

TEST_CASE("fits on the published point sets reach the reported quality") {
    SECTION("eight cGAN points") {
        const auto fit = clsim::fit_gain_curve(kCganPoints, FitMethod::DirectNlls);
        CHECK(fit.diagnostics.r_squared >= 0.87);
        CHECK(fit.diagnostics.r_squared == Catch::Approx(0.8749068184368224).margin(1e-6));
        CHECK(fit.curve.alpha == Catch::Approx(-13.125084769733537).margin(1e-4));
        CHECK(fit.curve.beta == Catch::Approx(5.173704616447081).margin(1e-4));
        CHECK(sse_of(fit.curve, kCganPoints) == Catch::Approx(818.1895358606316).margin(1e-4));
    }

    SECTION("three derived GD points") {
        const auto fit = clsim::fit_gain_curve(kGdPoints, FitMethod::DirectNlls);
        CHECK(fit.diagnostics.r_squared >= 0.95);
        CHECK(fit.diagnostics.r_squared == Catch::Approx(0.9649671654728325).margin(1e-6));
    }

    SECTION("fitted error never exceeds the reference curve's") {
        for (const auto* pts : {&kCganPoints, &kGdPoints}) {
            const auto fit = clsim::fit_gain_curve(*pts, FitMethod::DirectNlls);
            const double fitted = sse_of(fit.curve, *pts);
            const double published = sse_of(clsim::published_curve(), *pts);
            CHECK(fitted <= published * (1.0 + 1e-9));
        }
    }
}

TEST_CASE("error dominance holds on perturbed decaying point sets") {
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> noise(-0.3, 0.3);
    std::uniform_real_distribution<double> alpha_dist(-20.0, -2.0);
    std::uniform_real_distribution<double> beta_dist(1.0, 5.0);
    for (int trial = 0; trial < 20; ++trial) {
        const GainCurve truth{alpha_dist(rng), beta_dist(rng)};
        std::vector<GainPoint> pts;
        for (double x : {0.05, 0.12, 0.2, 0.28, 0.35, 0.42})
            pts.push_back({"p", x, clsim::predict(truth, x) * std::exp(noise(rng))});
        const auto fit = clsim::fit_gain_curve(pts, FitMethod::DirectNlls);
        const double fitted = sse_of(fit.curve, pts);
        const double published = sse_of(clsim::published_curve(), pts);
        CHECK(fitted <= published * (1.0 + 1e-9) + 1e-12);
    }
}

TEST_CASE("log-linear scale equivariance") {
    const GainCurve truth{-8.0, 2.0};
    auto pts = points_on_curve(truth, {0.05, 0.15, 0.22, 0.31});
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> noise(0.8, 1.25);
    for (auto& p : pts) p.improvement *= noise(rng);

    const auto base = clsim::fit_gain_curve(pts, FitMethod::LogLinear);
    const double c = 3.7;
    auto scaled = pts;
    for (auto& p : scaled) p.improvement *= c;
    const auto shifted = clsim::fit_gain_curve(scaled, FitMethod::LogLinear);

    CHECK(shifted.curve.alpha == Catch::Approx(base.curve.alpha).margin(1e-9));
    CHECK(shifted.curve.beta == Catch::Approx(base.curve.beta + std::log(c)).margin(1e-9));
}

TEST_CASE("fit input validation and warnings") {
    SECTION("too few points") {
        std::vector<GainPoint> one{{"p", 0.1, 5.0}};
        CHECK_THROWS_AS(clsim::fit_gain_curve(one, FitMethod::DirectNlls), std::invalid_argument);
        CHECK_THROWS_AS(clsim::fit_gain_curve({}, FitMethod::LogLinear), std::invalid_argument);
    }

    SECTION("non-finite points") {
        std::vector<GainPoint> pts{{"a", 0.1, 5.0}, {"b", 0.2, std::nan("")}};
        CHECK_THROWS_AS(clsim::fit_gain_curve(pts, FitMethod::DirectNlls), std::invalid_argument);
    }

    SECTION("log-linear drops non-positive improvements with a warning") {
        std::vector<GainPoint> pts{{"a", 0.05, 50.0}, {"b", 0.2, 10.0}, {"c", 0.35, -1.0}};
        const auto fit = clsim::fit_gain_curve(pts, FitMethod::LogLinear);
        REQUIRE(fit.warnings.size() == 1);
        CHECK(fit.warnings[0].find("dropped 1") != std::string::npos);
        CHECK(fit.diagnostics.n_points == 3);  // diagnostics still cover all points
    }

    SECTION("log-linear needs two positive points") {
        std::vector<GainPoint> pts{{"a", 0.05, 50.0}, {"b", 0.2, -10.0}, {"c", 0.35, -1.0}};
        CHECK_THROWS_AS(clsim::fit_gain_curve(pts, FitMethod::LogLinear), std::invalid_argument);
    }

    SECTION("direct-nlls handles non-positive improvements") {
        std::vector<GainPoint> pts{{"a", 0.05, 50.0}, {"b", 0.2, 10.0}, {"c", 0.35, -1.0},
                                   {"d", 0.4, 0.0}};
        const auto fit = clsim::fit_gain_curve(pts, FitMethod::DirectNlls);
        CHECK(fit.curve.alpha < 0.0);
        CHECK(fit.diagnostics.n_points == 4);
    }

    SECTION("identical metric values leave the slope undetermined") {
        std::vector<GainPoint> pts{{"a", 0.2, 5.0}, {"b", 0.2, 9.0}};
        CHECK_THROWS_AS(clsim::fit_gain_curve(pts, FitMethod::LogLinear), std::invalid_argument);
    }

    SECTION("growing data warns about a non-decaying fit") {
        std::vector<GainPoint> pts{{"a", 0.1, 1.0}, {"b", 0.2, 5.0}, {"c", 0.3, 25.0}};
        const auto fit = clsim::fit_gain_curve(pts, FitMethod::DirectNlls);
        REQUIRE_FALSE(fit.warnings.empty());
        CHECK(fit.warnings.back().find("does not decay") != std::string::npos);
    }
}

TEST_CASE("constant improvements yield a perfect flat fit") {
    std::vector<GainPoint> pts{{"a", 0.1, 5.0}, {"b", 0.3, 5.0}, {"c", 0.5, 5.0}};
    const auto fit = clsim::fit_gain_curve(pts, FitMethod::LogLinear);
    CHECK(fit.curve.alpha == Catch::Approx(0.0).margin(1e-12));
    CHECK(fit.curve.beta == Catch::Approx(std::log(5.0)).margin(1e-12));
    CHECK(fit.diagnostics.r_squared == 1.0);
    CHECK(fit.diagnostics.mae == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("fit report serialization") {
    const auto fit = clsim::fit_gain_curve(kCganPoints, FitMethod::DirectNlls);
    const auto j = clsim::fit_report_json(fit, kCganPoints);

    CHECK(j.at("alpha").get<double>() == fit.curve.alpha);
    CHECK(j.at("beta").get<double>() == fit.curve.beta);
    CHECK(j.at("r_squared").get<double>() == fit.diagnostics.r_squared);
    CHECK(j.at("mae_percent").get<double>() == fit.diagnostics.mae);
    REQUIRE(j.at("points").size() == 8);
    CHECK(j.at("points")[0].at("label") == "UTKFace");

    // the base-form triple reproduces (alpha, beta)
    const auto& form = j.at("paper_form");
    CHECK(form.at("b").get<double>() == 0.94);
    const GainCurve from_triple = clsim::curve_from_triple(
        form.at("b").get<double>(), form.at("p").get<double>(), form.at("q").get<double>());
    CHECK(from_triple.alpha == Catch::Approx(fit.curve.alpha).epsilon(1e-12));
    CHECK(from_triple.beta == Catch::Approx(fit.curve.beta).epsilon(1e-12));

    // round-trip through the curve reader
    const GainCurve back = clsim::curve_from_json(j);
    CHECK(back.alpha == fit.curve.alpha);
    CHECK(back.beta == fit.curve.beta);

    // triple-only files are accepted too
    const auto triple_only = nlohmann::json::parse(R"({"paper_form":{"b":0.94,"p":202.74,"q":-79.92}})");
    const GainCurve published = clsim::curve_from_json(triple_only);
    CHECK(published.alpha == Catch::Approx(clsim::published_curve().alpha).epsilon(1e-12));

    CHECK_THROWS_AS(clsim::curve_from_json(nlohmann::json::parse(R"({"foo":1})")),
                    std::runtime_error);
}

TEST_CASE("points CSV parsing") {
    SECTION("well-formed input with CRLF and blank lines") {
        std::istringstream in(
            "label,x,improvement_percent\r\n"
            "Fungi,0.0880,50.00\n"
            "\n"
            "scene,0.2625,0.59\r\n");
        const auto pts = clsim::read_points_csv(in);
        REQUIRE(pts.size() == 2);
        CHECK(pts[0].label == "Fungi");
        CHECK(pts[0].x == 0.0880);
        CHECK(pts[0].improvement == 50.00);
        CHECK(pts[1].label == "scene");
    }

    SECTION("wrong header") {
        std::istringstream in("name,metric,gain\nFungi,0.0880,50.00\n");
        CHECK_THROWS_AS(clsim::read_points_csv(in), std::runtime_error);
    }

    SECTION("missing fields") {
        std::istringstream in("label,x,improvement_percent\nFungi,0.0880\n");
        CHECK_THROWS_AS(clsim::read_points_csv(in), std::runtime_error);
    }

    SECTION("non-numeric values") {
        std::istringstream in("label,x,improvement_percent\nFungi,low,50.00\n");
        CHECK_THROWS_AS(clsim::read_points_csv(in), std::runtime_error);
    }
}
