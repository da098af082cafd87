#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "support.hpp"
#include "tmq/analysis.hpp"
#include "tmq/errors.hpp"

using namespace tmq;

namespace {

Dataset sample(const Model& m, const std::vector<double>& p, const std::vector<double>& xs) {
    Dataset d;
    for (double x : xs) {
        d.x.push_back(x);
        d.y.push_back(m.f(x, p));
    }
    return d;
}

std::vector<double> linspace(double a, double b, int n) {
    std::vector<double> v;
    for (int i = 0; i < n; ++i) v.push_back(a + (b - a) * i / (n - 1));
    return v;
}

struct Case {
    std::string model;
    std::vector<double> truth;
    std::vector<double> xs;
};

// One representative parameter point per zoo model plus an abscissa grid.
std::vector<Case> zoo_cases() {
    return {
        {"two_body_loss", {5000.0, 16.4, 1.1e-9 / 1.6e-4 * 1.0}, linspace(0, 60, 15)},
        {"ramsey_fringe", {0.5, 0.95, 0.16, 0.3}, linspace(-25, 25, 30)},
        {"gaussian_decay", {0.97, 22.0}, linspace(0, 40, 12)},
        {"gaussian_decay_offset", {0.9, 25.0}, linspace(0.5, 40, 8)},
        {"exponential", {1000.0, 119e-6}, linspace(0, 600e-6, 10)},
        {"rabi_reflection", {kPi / 1e-3, std::sqrt(0.015), 0.112}, linspace(0, 20e-3, 25)},
        {"quadratic_growth", {93.75}, linspace(0, 1e-3, 6)},
        {"linear", {1.5, -2.0}, linspace(-1, 4, 7)},
        {"quadratic", {0.2, -1.0, 3.0}, linspace(-2, 2, 9)},
    };
}

}  // namespace

TEST(Fit, LinearExactDataGivesExactParameters) {
    const Model& m = find_model("linear");
    const Dataset d = sample(m, {3.0, 0.5}, linspace(0, 10, 11));
    const auto r = least_squares(m, d, {0.0, 0.0});
    EXPECT_NEAR(r.value("a"), 3.0, 1e-12);
    EXPECT_NEAR(r.value("b"), 0.5, 1e-12);
    EXPECT_LT(r.chi2, 1e-20);
    EXPECT_TRUE(r.unit_weights);
    EXPECT_EQ(r.dof, 9);
}

TEST(Fit, QuadraticThroughThreePointsInterpolates) {
    const Model& m = find_model("quadratic");
    Dataset d{{-1, 0, 2}, {4, 1, 7}, {}};
    const auto r = least_squares(m, d, {0, 0, 0});
    // Parabola through the points: y = 1 - x + 2 x^2.
    EXPECT_NEAR(r.params[0], 1.0, 1e-10);
    EXPECT_NEAR(r.params[1], -1.0, 1e-10);
    EXPECT_NEAR(r.params[2], 2.0, 1e-10);
    EXPECT_EQ(r.dof, 0);
}

TEST(Fit, RosenbrockMatchesGridSearchOracle) {
    Model rosen{"rosenbrock",
                {"a", "b"},
                [](double x, const std::vector<double>& p) { return x == 0.0 ? p[0] : 10.0 * (p[1] - p[0] * p[0]); },
                {}};
    const Dataset d{{0.0, 1.0}, {1.0, 0.0}, {}};
    auto chi2 = [](double a, double b) { return (1 - a) * (1 - a) + 100 * (b - a * a) * (b - a * a); };
    // Oracle: exhaustive 1000 x 1000 grid.
    double best = 1e300, ga = 0, gb = 0;
    const int n = 1000;
    for (int i = 0; i < n; ++i) {
        const double a = -2.0 + 4.0 * i / (n - 1);
        for (int j = 0; j < n; ++j) {
            const double b = -1.0 + 4.0 * j / (n - 1);
            const double c = chi2(a, b);
            if (c < best) best = c, ga = a, gb = b;
        }
    }
    FitOptions o;
    o.max_iterations = 500;
    const auto r = least_squares(rosen, d, {-1.2, 1.0}, o);
    EXPECT_LE(r.chi2, best + 1e-12);
    const double cell = 4.0 / (n - 1);
    EXPECT_NEAR(r.params[0], ga, 2 * cell);
    EXPECT_NEAR(r.params[1], gb, 4 * cell);
}

TEST(Fit, AnalyticGradientsMatchFiniteDifferences) {
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> jitter(0.8, 1.2);
    for (const auto& c : zoo_cases()) {
        const Model& m = find_model(c.model);
        if (!m.gradient) continue;
        for (int trial = 0; trial < 5; ++trial) {
            std::vector<double> p = c.truth;
            for (double& v : p) v *= jitter(rng);
            const Eigen::MatrixXd fd = numerical_jacobian(m, c.xs, p);
            for (size_t i = 0; i < c.xs.size(); ++i) {
                const auto g = m.gradient(c.xs[i], p);
                for (size_t k = 0; k < p.size(); ++k) {
                    const double scale = std::max(std::abs(g[k]), fd.col(k).cwiseAbs().maxCoeff());
                    EXPECT_NEAR(g[k], fd(i, k), 1e-6 * scale + 1e-300) << c.model << " p" << k << " x=" << c.xs[i];
                }
            }
        }
    }
}

TEST(Fit, FitOnSelfConvergesImmediately) {
    for (const auto& c : zoo_cases()) {
        const Model& m = find_model(c.model);
        const Dataset d = sample(m, c.truth, c.xs);
        const auto r = least_squares(m, d, c.truth);
        EXPECT_LE(r.iterations, 3) << c.model;
        EXPECT_LT(r.chi2, 1e-18) << c.model;
        for (size_t k = 0; k < c.truth.size(); ++k) EXPECT_NEAR(r.params[k], c.truth[k], 1e-9 * std::abs(c.truth[k]));
    }
}

TEST(Fit, InvariantUnderUniformSigmaRescaling) {
    std::mt19937_64 rng(22);
    std::normal_distribution<double> g;
    for (const auto& c : zoo_cases()) {
        const Model& m = find_model(c.model);
        Dataset d = sample(m, c.truth, c.xs);
        for (size_t i = 0; i < d.size(); ++i) {
            const double s = 0.01 * (std::abs(d.y[i]) + 0.01 * std::abs(c.truth[0]));
            d.y[i] += s * g(rng);
            d.sigma.push_back(s);
        }
        Dataset scaled = d;
        for (double& s : scaled.sigma) s *= 37.0;
        const auto a = least_squares(m, d, c.truth);
        const auto b = least_squares(m, scaled, c.truth);
        for (size_t k = 0; k < c.truth.size(); ++k)
            EXPECT_NEAR(a.params[k], b.params[k], 1e-8 * (std::abs(a.params[k]) + a.error(m.parameters[k]))) << c.model;
        EXPECT_NEAR(a.chi2, b.chi2 * 37.0 * 37.0, 1e-6 * a.chi2);
    }
}

TEST(Fit, CovarianceScalesWithReducedChi2ForUnitWeights) {
    std::mt19937_64 rng(23);
    std::normal_distribution<double> g;
    const Model& m = find_model("linear");
    Dataset d = sample(m, {1.0, 2.0}, linspace(0, 1, 50));
    for (double& y : d.y) y += 0.1 * g(rng);
    const auto unit = least_squares(m, d, {0, 0});
    Dataset weighted = d;
    weighted.sigma.assign(d.size(), 0.1);
    const auto w = least_squares(m, weighted, {0, 0});
    EXPECT_NEAR(unit.error("b") / w.error("b"), std::sqrt(unit.reduced_chi2() / 0.01), 1e-6);
    EXPECT_NEAR(w.reduced_chi2(), 1.0, 0.4);
}

TEST(Fit, ProfileOfQuadraticChi2IsOneSigma) {
    std::mt19937_64 rng(24);
    std::normal_distribution<double> g;
    const Model& m = find_model("linear");
    Dataset d = sample(m, {1.0, 2.0}, linspace(0, 1, 20));
    for (double& y : d.y) y += 0.05 * g(rng);
    d.sigma.assign(d.size(), 0.05);
    const auto r = least_squares(m, d, {0, 0});
    const auto [lo, hi] = chi2_profile(m, d, r, "b");
    const double s = r.error("b");
    EXPECT_NEAR((r.value("b") - lo) / s, 1.0, 0.01);
    EXPECT_NEAR((hi - r.value("b")) / s, 1.0, 0.01);
    EXPECT_NEAR(profile_chi2_at(m, d, r, "b", r.value("b") + s) - r.chi2, 1.0, 1e-6);
}

TEST(Fit, FlatProfileIsDegenerate) {
    // A saturating model whose chi2 never rises past +1 along k.
    Model sat{"sat",
              {"a", "k"},
              [](double x, const std::vector<double>& p) { return p[0] + 1e-3 * std::tanh(p[1]) * x; },
              {}};
    Dataset d{{0, 1, 2, 3}, {0.0, 0.0, 0.0, 0.0}, {1, 1, 1, 1}};
    const auto r = least_squares(sat, d, {0.1, 0.0});
    EXPECT_THROW(
        {
            try {
                chi2_profile(sat, d, r, "k");
            } catch (const FitError& e) {
                EXPECT_EQ(e.kind(), FitError::Kind::DegenerateProfile);
                throw;
            }
        },
        FitError);
}

TEST(Fit, ErrorKinds) {
    const Model& m = find_model("gaussian_decay");
    const Dataset two{{0, 1}, {1, 0.9}, {}};
    auto kind_of = [](auto&& f) {
        try {
            f();
        } catch (const FitError& e) {
            return static_cast<int>(e.kind());
        }
        return -1;
    };
    EXPECT_EQ(kind_of([&] { least_squares(m, Dataset{{0}, {1}, {}}, {1, 1}); }), int(FitError::Kind::BadInput));
    EXPECT_EQ(kind_of([&] { least_squares(m, two, {1}); }), int(FitError::Kind::BadInput));
    EXPECT_EQ(kind_of([&] { least_squares(m, Dataset{{0, 1}, {1, 2}, {1, -1}}, {1, 1}); }),
              int(FitError::Kind::BadInput));
    const Model dead{"dead", {"a", "b"}, [](double x, const std::vector<double>& p) { return p[0] * x; }, {}};
    EXPECT_EQ(kind_of([&] { least_squares(dead, Dataset{{0, 1, 2}, {0, 1, 2}, {}}, {0.5, 1.0}); }),
              int(FitError::Kind::SingularNormalMatrix));
    FitOptions o;
    o.max_iterations = 1;
    const Model& f = find_model("ramsey_fringe");
    const Dataset d = sample(f, {0.5, 1.0, 0.16, 0.2}, linspace(-25, 25, 30));
    EXPECT_EQ(kind_of([&] { least_squares(f, d, {0.4, 0.6, 0.15, 0.0}, o); }), int(FitError::Kind::NonConvergence));
}

TEST(Fit, FixedParametersStayPut) {
    const Model& m = find_model("two_body_loss");
    const Dataset d = sample(m, {5000, 16.4, 5e-6}, linspace(0, 60, 15));
    FitOptions o;
    o.fixed = {false, true, false};
    const auto r = least_squares(m, d, {4000, 16.4, 1e-6}, o);
    EXPECT_EQ(r.value("tau"), 16.4);
    EXPECT_EQ(r.error("tau"), 0.0);
    EXPECT_NEAR(r.value("beta_over_V"), 5e-6, 1e-12);
    EXPECT_EQ(r.dof, 13);
}

TEST(Models, Limits) {
    EXPECT_DOUBLE_EQ(model_two_body_loss(0.0, 5000, 16.4, 1e-5), 5000);
    EXPECT_NEAR(model_two_body_loss(5.0, 5000, 16.4, 0.0), 5000 * std::exp(-5.0 / 16.4), 1e-9);
    EXPECT_DOUBLE_EQ(contrast_from_eta(1.0), 1.0);
    EXPECT_DOUBLE_EQ(contrast_from_eta(0.5), 0.0);
    EXPECT_DOUBLE_EQ(model_exponential(0.0, 3.0, 1.0), 3.0);
    EXPECT_DOUBLE_EQ(model_exponential(1.0, 0.0, 1.0), 0.0);
    EXPECT_DOUBLE_EQ(model_gaussian_decay(0.0, 0.8, 22), 0.8);
    EXPECT_NEAR(model_gaussian_decay(22.0, 1.0, 22), std::exp(-1.0), 1e-15);
    EXPECT_DOUBLE_EQ(model_gaussian_decay_offset(0.0, 1.0, 5.0), 1.0);
    EXPECT_NEAR(model_ramsey_fringe(1.0 / 0.08, 0.5, 1.0, 2 * 0.08, 0.0), 1.0, 1e-12);
}

TEST(Models, RabiReflectionWithoutReflectionIsExact) {
    for (double t : {0.0, 0.3e-3, 1e-3, 2.5e-3, 10e-3}) {
        const double exact = 0.5 * (1 - std::cos(kPi / 1e-3 * t)) * std::exp(-t / (2 * 0.112));
        EXPECT_DOUBLE_EQ(model_rabi_reflection(t, kPi / 1e-3, 0.0, 0.112), exact);
    }
}

TEST(Models, RabiReflectionMatchesRiemannOracle) {
    const double a = 0.1225, omega0 = kPi / 1e-3;
    for (double t : {1e-3, 4.3e-3, 17e-3}) {
        auto f = [&](double u) { return 0.5 * (1 - std::cos(omega0 * std::sqrt(1 + a * a + a * std::cos(u)) * t)); };
        const double oracle = test::midpoint(f, 0.0, kPi, 100000) / kPi * std::exp(-t / (2 * 0.112));
        EXPECT_NEAR(model_rabi_reflection(t, omega0, a, 0.112), oracle, 1e-6) << t;
    }
    // The reflection suppresses the first maximum below unity.
    EXPECT_LT(model_rabi_reflection(1e-3, omega0, a, 1e9), 0.999);
}

TEST(Contrast, PeakToPeakOnFullFringeMatchesFit) {
    const Model& m = find_model("ramsey_fringe");
    const std::vector<double> p{0.5, 0.93, 0.16, 0.0};
    // Grid containing the exact extremes of the cosine.
    const Dataset d = sample(m, p, linspace(-25, 25, 201));
    const auto r = least_squares(m, d, {0.45, 0.8, 0.16, 0.05});
    EXPECT_NEAR(peak_to_peak_contrast(d.y), r.value("C"), 1e-6);
}

TEST(Contrast, PeakToPeakIsBoundedByEnvelopeUnderPhaseDrift) {
    std::mt19937_64 rng(25);
    std::normal_distribution<double> g;
    const Model& m = find_model("ramsey_fringe");
    for (int trial = 0; trial < 20; ++trial) {
        Dataset d;
        double phase = 0.0;
        for (double x : linspace(-25, 25, 40)) {
            phase += 0.1 * g(rng);  // slow drift between points
            d.x.push_back(x);
            d.y.push_back(model_ramsey_fringe(x, 0.5, 0.9, 0.16, phase));
        }
        // Every sample lies inside the unshifted envelope, and a dense scan
        // still nearly reaches both edges whatever the phase does.
        const double ptp = peak_to_peak_contrast(d.y);
        EXPECT_LE(ptp, 0.9 + 1e-12);
        EXPECT_GT(ptp, 0.85);
    }
}

TEST(DatasetIo, CsvRoundTripAndMissingSigma) {
    Dataset d{{0.1, 0.2, 1.0 / 3.0}, {1e-9, -2.5, 3.0}, {0.01, 0.02, 0.03}};
    const auto back = read_dataset_csv(write_dataset_csv(d));
    EXPECT_EQ(back.x, d.x);
    EXPECT_EQ(back.y, d.y);
    EXPECT_EQ(back.sigma, d.sigma);
    const auto nosig = read_dataset_csv("# comment\nx,y\n1,2\n3,4\n");
    EXPECT_FALSE(nosig.has_sigma());
    EXPECT_EQ(nosig.size(), 2u);
    const auto reordered = read_dataset_csv("sigma,extra,y,x\n0.5,9,2,1\n");
    EXPECT_EQ(reordered.x[0], 1.0);
    EXPECT_EQ(reordered.sigma[0], 0.5);
    EXPECT_THROW(read_dataset_csv("x,y\n1,abc\n"), ParseError);
    EXPECT_THROW(read_dataset_csv("a,b\n1,2\n"), ConfigError);
    EXPECT_THROW(load_dataset("/nonexistent/file.csv"), IoError);
}

TEST(ModelZoo, NamesResolve) {
    for (const auto& n : model_names()) EXPECT_EQ(find_model(n).name, n);
    EXPECT_THROW(find_model("nope"), ConfigError);
    EXPECT_EQ(find_model("ramsey_fringe").index_of("phi0"), 3u);
}
