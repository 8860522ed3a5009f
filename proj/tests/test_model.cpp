#include "doctest.h"
#include "glehomog/errors.hpp"
#include "support.hpp"

using namespace glehomog;
using testsupport::max_abs;
using testsupport::named;

TEST_SUITE("model") {

TEST_CASE("make_triple solves for the stationary covariance") {
    testsupport::Rng rng(21);
    for (int k = 0; k < 5; ++k) {
        const int n = 1 + k;
        NoiseTriple tr = make_triple(rng.stable(n), rng.gauss(2, n), rng.gauss(n, n));
        CHECK(lyapunov_residual(tr.Gamma, tr.M, tr.Sigma * tr.Sigma.transpose()) < 1e-10);
        CHECK_NOTHROW(validate_triple(tr, "t"));
    }
}

TEST_CASE("kernel of the exponential triple") {
    const double a = 1.7;
    Mat A(1, 1), I = Mat::Identity(1, 1);
    A << a;
    NoiseTriple tr = make_triple(A, I, A);
    for (double t : {0.0, 0.3, 2.0}) CHECK(kernel_eval(tr, t)(0, 0) == doctest::Approx(0.5 * a * std::exp(-a * t)));
    CHECK(k_matrix(tr)(0, 0) == doctest::Approx(0.5));
}

TEST_CASE("kernel symmetry in time and its integral") {
    testsupport::Rng rng(22);
    NoiseTriple tr = make_triple(rng.stable(3, 1.0), rng.gauss(2, 3), rng.gauss(3, 3));
    CHECK(max_abs(kernel_eval(tr, -0.4) - kernel_eval(tr, 0.4).transpose()) < 1e-14);
    // Composite Simpson on [0, 40]; the kernel has decayed below round-off there.
    const int n = 8000;
    const double h = 40.0 / n;
    Mat acc = kernel_eval(tr, 0.0) + kernel_eval(tr, 40.0);
    for (int i = 1; i < n; ++i) acc += (i % 2 ? 4.0 : 2.0) * kernel_eval(tr, i * h);
    acc *= h / 3.0;
    CHECK(max_abs(acc - k_matrix(tr)) < 1e-8);
}

TEST_CASE("similarity transform leaves the kernel unchanged") {
    testsupport::Rng rng(23);
    NoiseTriple tr = make_triple(rng.stable(3), rng.gauss(2, 3), rng.gauss(3, 3));
    Mat T = rng.gauss(3, 3) + 3.0 * Mat::Identity(3, 3);
    NoiseTriple tt = transform_triple(tr, T);
    for (double t : {0.0, 0.5, 1.5}) CHECK(max_abs(kernel_eval(tr, t) - kernel_eval(tt, t)) < 1e-11);
}

TEST_CASE("invalid triples are rejected") {
    Mat G(1, 1), I = Mat::Identity(1, 1);
    G << -1.0;
    NoiseTriple tr{G, I, I, I};
    CHECK_THROWS_AS(validate_triple(tr, "bad"), Error);
}

TEST_CASE("fluctuation-dissipation checks") {
    CHECK(check_fdr(named("temperature_gradient", {{"dim", 2}, {"gamma_slope", 0.5}, {"twist", 0.3}})).fdr2);
    CHECK_FALSE(check_fdr(named("temperature_gradient", {{"dim", 2}, {"T1", 0.5}})).fdr2);
    CHECK_FALSE(check_fdr(named("temperature_gradient", {{"dim", 1}, {"T0", 2.0}})).fdr2);
    CHECK(check_fdr(named("magnetic", {{"omega", 0.0}})).fdr1);
    CHECK_FALSE(check_fdr(named("magnetic", {{"omega", 1.0}})).fdr1);
}

TEST_CASE("scenario registry") {
    for (const auto& name : scenario_names()) {
        if (name == "custom") {
            CHECK_THROWS_AS(scenario(name, {}), Error);
            CHECK(scenario_param_names(name).empty());
            continue;
        }
        GleSpec s = scenario(name, {});
        CHECK_NOTHROW(validate_spec(s));
        CHECK_FALSE(scenario_param_names(name).empty());
    }
    CHECK_THROWS_AS(scenario("nope", {}), Error);
    CHECK_THROWS_AS(scenario_param_names("nope"), Error);
    CHECK_THROWS_AS(named("temperature_gradient", {{"dim", 3}, {"fast_skew", 1.0}}), Error);
}

TEST_CASE("embedding shapes per procedure") {
    GleSpec s = named("temperature_gradient", {{"dim", 2}});
    EmbeddedSystem none = embed(s, Procedure::none, 0.1);
    CHECK(none.nX == 4);
    CHECK(none.nY == 4);
    EmbeddedSystem markov = embed(s, Procedure::markov, 0.1);
    CHECK(markov.nX == 4);
    CHECK(markov.nY == 4);
    CHECK_THROWS_AS(embed(s, Procedure::mass, 0.1), Error);  // gamma0 = 0
    EmbeddedSystem mass = embed(named("diagonal_nd", {{"dim", 2}}), Procedure::mass, 0.1);
    CHECK(mass.nY == 2);
    CHECK(mass.find(BlockKind::v)->fast);
    EmbeddedSystem joint = embed(s, Procedure::joint, 0.1);
    CHECK(joint.nX == 2);
    CHECK(joint.nY == 6);
}

TEST_CASE("procedure names round trip") {
    for (Procedure p : {Procedure::none, Procedure::markov, Procedure::markov_then_mass, Procedure::mass,
                        Procedure::mass_then_markov, Procedure::joint})
        CHECK(procedure_from_string(to_string(p)) == p);
    CHECK_THROWS_AS(procedure_from_string("sideways"), Error);
}

}
