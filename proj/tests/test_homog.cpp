#include "doctest.h"
#include "glehomog/errors.hpp"
#include "support.hpp"

using namespace glehomog;
using testsupport::max_abs;
using testsupport::named;

namespace {

const std::vector<Procedure> kLimits = {Procedure::markov, Procedure::markov_then_mass, Procedure::mass,
                                        Procedure::mass_then_markov, Procedure::joint};

double sup_over_grid(const HomogenizedModel& m, const std::string& key) {
    double s = 0.0;
    for (const Vec& x : m.spec.grid()) {
        Vec X = Vec::Zero(m.limit.nX);
        X.head(m.spec.dim) = x;
        s = std::max(s, max_abs(m.matrices(0.0, X).at(key)));
    }
    return s;
}

GleSpec with_rotational_force(GleSpec s) {
    s.f_nc.zero = false;
    s.f_nc.eval = [](double, const Vec& x) {
        Vec f(2);
        f << -x(1) * (1.0 + 0.5 * x(0)), x(0);
        return f;
    };
    return s;
}

}  // namespace

TEST_SUITE("homog") {

TEST_CASE("one-dimensional specs carry no antisymmetric anomaly") {
    const std::vector<GleSpec> specs = {
        named("temperature_gradient", {{"dim", 1}, {"gamma_slope", 0.5}, {"T1", 0.3}, {"k", 1.0}}),
        named("diagonal_nd", {{"dim", 1}}),
        named("diagonal_nd", {{"dim", 1}, {"gamma0", 0.0}}),
        named("active_matter", {{"dim", 1}}),
    };
    int reports = 0;
    for (const GleSpec& s : specs)
        for (Procedure p : kLimits) {
            HomogenizedModel m;
            try {
                m = homogenize(s, p);
            } catch (const Error&) {
                continue;
            }
            AnomalyReport rep = anomaly_report(m, s.grid());
            for (const auto& [name, v] : rep.sup_norms) {
                INFO(s.name, " ", to_string(p), " ", name);
                // mass_then_markov's mu lives on the fast (y, beta_f) space; only its projection is d x d.
                if (p == Procedure::mass_then_markov) continue;
                CHECK(v == 0.0);
            }
            if (p == Procedure::mass_then_markov) {
                auto M = m.matrices(0.0, s.x0);
                CHECK(max_abs(M.at("Phi") * M.at("mu_A") * M.at("Phi").transpose()) == 0.0);
            }
            ++reports;
        }
    CHECK(reports >= 10);
}

TEST_CASE("fast-space mobility of mass_then_markov can be skew in one dimension") {
    HomogenizedModel m = mass_then_markov(named("diagonal_nd", {{"dim", 1}}));
    CHECK(sup_over_grid(m, "mu_A") > 1e-3);
    for (const Vec& x : m.spec.grid()) CHECK(m.dW_anom(0.0, x) == 0.0);
}

TEST_CASE("detailed-balance fast triple gives Theta_A = 0; a skewed one does not") {
    GleSpec db = named("temperature_gradient", {{"dim", 2}, {"rate_split", 0.5}, {"twist", 0.3}, {"gamma_slope", 0.4}});
    CHECK(sup_over_grid(markovian_limit(db), "Theta_A") < 1e-10);
    GleSpec sk = named("temperature_gradient", {{"dim", 2}, {"fast_skew", 2.0}});
    CHECK(sup_over_grid(markovian_limit(sk), "Theta_A") > 0.1);
}

TEST_CASE("markov_then_mass anomalous drifts vanish with symmetric K") {
    GleSpec s = with_rotational_force(
        named("temperature_gradient", {{"dim", 2}, {"twist", 0.3}, {"gamma_slope", 0.5}, {"k", 1.0}}));
    HomogenizedModel m = markov_then_mass(s);
    CHECK(sup_over_grid(m, "K_A") < 1e-10);
    for (const Vec& x : s.grid()) {
        CHECK(std::abs(m.dW_anom(0.0, x)) < 1e-10);
        CHECK(std::abs(m.dR_anom(0.0, x)) < 1e-10);
    }
    GleSpec sk = named("temperature_gradient", {{"dim", 2}, {"fast_skew", 2.0}});
    CHECK_THROWS_AS(markov_then_mass(sk), Error);
}

TEST_CASE("diagonal spec gives lambda_A = 0") {
    HomogenizedModel m = joint_limit(named("diagonal_nd", {{"dim", 3}}));
    CHECK(sup_over_grid(m, "lambda_A") < 1e-10);
}

TEST_CASE("FDR spec: J12 = J13, m0 J11 = I and the two joint drifts coincide") {
    GleSpec s = named("temperature_gradient",
                      {{"dim", 2}, {"twist", 0.3}, {"rate_split", 0.5}, {"gamma_slope", 0.5}, {"mass", 0.7}});
    REQUIRE(check_fdr(s).fdr2);
    HomogenizedModel m = joint_limit(s);
    for (const Vec& x : s.grid()) {
        auto M = m.matrices(0.0, x);
        CHECK(max_abs(M.at("J21") - M.at("J31")) < 1e-10);
        CHECK(max_abs(s.mass * M.at("J11") - Mat::Identity(2, 2)) < 1e-10);
        CHECK(max_abs(M.at("S") - M.at("S_fdr")) < 1e-6);
    }
}

TEST_CASE("limit drifts agree with the generic reducer on the embedding") {
    GleSpec s = named("temperature_gradient", {{"dim", 2}, {"gamma_slope", 0.5}, {"T1", 0.3}, {"k", 1.0}});
    HomogenizedModel m = markovian_limit(s);
    SlowFastSystem view = slow_fast_view(embed(s, Procedure::markov, 1.0));
    testsupport::Rng rng(31);
    for (int i = 0; i < 4; ++i) {
        Vec X = 0.5 * rng.gauss(m.limit.nX, 1);
        GeneralReduction r = reduce_general(view, 0.0, X);
        CHECK(max_abs(m.drift_x(0.0, X) - r.drift) < 1e-6);
    }
}

TEST_CASE("constant coefficients have no noise-induced drift") {
    GleSpec s = named("diagonal_nd", {{"dim", 2}, {"state_dependent", 0.0}});
    for (Procedure p : kLimits) {
        HomogenizedModel m = homogenize(s, p);
        AnomalyReport rep = anomaly_report(m, s.grid());
        CHECK(rep.noise_induced_sup < 1e-8);
    }
}

TEST_CASE("alpha conventions: bracket and index forms agree only at alpha = 1/2") {
    MatrixField A1;
    A1.rows = A1.cols = 2;
    A1.eval = [](double, const Vec& x) {
        Mat a(2, 2);
        a << 1 + x(0) * x(0), std::sin(x(1)), x(0), 1;
        return a;
    };
    Mat a2(2, 2);
    a2 << -2, -1, 1, -3;
    MatrixField A2 = MatrixField::constant_field(a2);
    MatrixField S2 = MatrixField::constant_field(Mat::Identity(2, 2));
    Vec X(2);
    X << 0.4, -0.3;
    CHECK(max_abs(drift_alpha(A1, A2, S2, 0.5, 0.0, X) - drift_alpha_index(A1, A2, S2, 0.5, 0.0, X)) < 1e-7);
    CHECK(max_abs(drift_alpha(A1, A2, S2, 0.0, 0.0, X) - drift_alpha_index(A1, A2, S2, 0.0, 0.0, X)) > 1e-3);
    CHECK_THROWS_AS(drift_alpha(A1, A2, S2, 1.5, 0.0, X), Error);
}

TEST_CASE("index-free and index forms of the Ito functional drift agree") {
    GleSpec s = with_rotational_force(named("temperature_gradient", {{"dim", 2}, {"fast_skew", 2.0}, {"gamma_slope", 0.5}}));
    SlowFastSystem view = slow_fast_view(embed(s, Procedure::markov, 1.0));
    Vec X = Vec::Zero(4);
    X << 0.3, -0.2, 0.1, 0.5;
    GeneralReduction r = reduce_general(view, 0.0, X);
    CHECK(max_abs(r.functional_ito - r.functional_ito_free) < 1e-6);
    CHECK(max_abs(r.H_str_index - r.H_str_bracket) < 1e-6);
}

TEST_CASE("magnetic white-noise mass limit has an antisymmetric mobility") {
    HomogenizedModel m = mass_limit(named("magnetic", {{"omega", 1.0}}));
    AnomalyReport rep = anomaly_report(m, m.spec.grid());
    CHECK(rep.sup_norms.at("mu_A") > 0.1);
    CHECK_FALSE(rep.vanishing.at("mu_A"));
}

}
