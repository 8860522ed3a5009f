#include "doctest.h"
#include "glehomog/errors.hpp"
#include "glehomog/harness.hpp"
#include "support.hpp"

using namespace glehomog;
using testsupport::max_abs;
using testsupport::named;

TEST_SUITE("harness") {

TEST_CASE("rate fit recovers exact power laws") {
    const std::vector<double> eps{0.2, 0.1, 0.05, 0.02};
    for (double p : {1.0, 0.5}) {
        std::vector<double> err;
        for (double e : eps) err.push_back(3.0 * std::pow(e, p));
        RateFit f = fit_rate(eps, err);
        CHECK(f.slope == doctest::Approx(p).epsilon(1e-12));
        CHECK(f.intercept == doctest::Approx(std::log(3.0)).epsilon(1e-12));
        CHECK(f.r2 == doctest::Approx(1.0));
    }
    CHECK_THROWS_AS(fit_rate({0.1, 0.05}, {1.0, 0.5}), Error);
    CHECK_THROWS_AS(fit_rate({0.2, 0.1, 0.05}, {1.0, 0.0, 0.5}), Error);
}

TEST_CASE("rate fit under multiplicative noise stays within 0.1") {
    testsupport::Rng rng(41);
    std::vector<double> eps;
    for (int i = 0; i < 12; ++i) eps.push_back(0.3 * std::pow(0.7, i));
    for (int rep = 0; rep < 20; ++rep) {
        std::vector<double> err;
        for (double e : eps) err.push_back(std::sqrt(e) * std::exp(0.05 * rng.normal()));
        CHECK(std::abs(fit_rate(eps, err).slope - 0.5) < 0.1);
    }
}

TEST_CASE("mean and stderr do not depend on the order of the samples") {
    testsupport::Rng rng(42);
    std::vector<double> v(1001);
    for (auto& x : v) x = 1e3 * rng.normal() + 1e-3 * rng.normal();
    MeanStderr a = mean_stderr(v);
    std::reverse(v.begin(), v.end());
    MeanStderr b = mean_stderr(v);
    std::shuffle(v.begin(), v.end(), rng.eng);
    MeanStderr c = mean_stderr(v);
    CHECK(a.mean == b.mean);
    CHECK(a.mean == c.mean);
    CHECK(a.stderr_ == c.stderr_);
    MeanStderr k = mean_stderr({1.0, 2.0, 3.0, 4.0});
    CHECK(k.mean == doctest::Approx(2.5));
    CHECK(k.stderr_ == doctest::Approx(std::sqrt(5.0 / 3.0 / 4.0)));
}

TEST_CASE("ladder validation") {
    EpsilonLadder l;
    l.values = {0.1, 0.2};
    CHECK_THROWS_AS(l.validate(), Error);
    l.values = {0.2, 0.1};
    l.paths = 0;
    CHECK_THROWS_AS(l.validate(), Error);
    l.paths = 10;
    CHECK_NOTHROW(l.validate());
}

TEST_CASE("self comparison gives zero error") {
    EpsilonLadder l;
    l.values = {1.0};
    l.paths = 4;
    l.T = 0.2;
    ConvergenceReport r = run_convergence(named("diagonal_nd", {{"dim", 1}}), Procedure::none, l);
    REQUIRE(r.points.size() == 1);
    CHECK(r.points[0].mean.at("x") == 0.0);
    CHECK(r.points[0].mean.at("v") == 0.0);
}

TEST_CASE("convergence reports are reproducible and converge") {
    EpsilonLadder l;
    l.values = {0.2, 0.05, 0.01};
    l.paths = 12;
    l.T = 0.5;
    l.seed = 3;
    GleSpec s = named("diagonal_nd", {{"dim", 1}, {"state_dependent", 0.0}});
    ConvergenceReport a = run_convergence(s, Procedure::joint, l);
    ConvergenceReport b = run_convergence(s, Procedure::joint, l);
    for (size_t j = 0; j < a.points.size(); ++j) CHECK(a.points[j].mean.at("x") == b.points[j].mean.at("x"));
    CHECK(a.points.back().mean.at("x") < a.points.front().mean.at("x"));
    CHECK(a.rates.at("x").slope > 0.2);
}

TEST_CASE("functional convergence reports the expected keys") {
    EpsilonLadder l;
    l.values = {0.1, 0.05, 0.02};
    l.paths = 6;
    l.T = 0.3;
    ConvergenceReport r = run_functional_convergence(
        named("temperature_gradient", {{"dim", 2}, {"fast_skew", 2.0}, {"k", 1.0}}), Procedure::markov, l);
    for (const char* key : {"W", "W_noanom", "W_generic", "R", "R_noanom", "R_generic", "Q", "Q_noanom", "W_T", "Q_T",
                            "B_literal", "B_centered"})
        CHECK(r.points[0].mean.count(key) == 1);
}

TEST_CASE("Green-Kubo estimator on a small ensemble") {
    Mat U2(2, 2), sig = Mat::Identity(2, 2);
    U2 << 1.0, 0.8, -0.8, 1.5;
    GreenKuboReport g = green_kubo_mu(U2, sig, 2000, 12.0, 0.06, 5);
    CHECK(max_abs(g.mu_exact - U2.inverse() * solve_lyapunov(U2, sig * sig.transpose())) < 1e-12);
    CHECK(g.max_z < 4.0);
}

TEST_CASE("area demo control has zero mean") {
    AreaDemoReport r = area_anomaly_demo(0.0, {0.05}, 200, 1.0, 2, 1e-3, false);
    REQUIRE(r.points.size() == 1);
    CHECK(std::abs(r.points[0].area.mean) < 4 * r.points[0].area.stderr_);
    CHECK(r.predicted_limit_mean == 0.0);
}

TEST_CASE("commutativity probe") {
    CommutativityReport fdr = commutativity_probe(named("temperature_gradient", {{"dim", 1}, {"gamma_slope", 0.5}}));
    CHECK(fdr.predicate);
    CHECK(fdr.drift_sup < 1e-10);
    CHECK(fdr.consistent);
}

}
