#include "doctest.h"
#include "glehomog/errors.hpp"
#include "support.hpp"

using namespace glehomog;
using testsupport::first_law_gap;
using testsupport::max_abs;
using testsupport::named;

namespace {

Trajectory run(const GleSpec& s, Procedure p, double eps, std::uint64_t seed, std::uint64_t path, double T,
               Scheme scheme = Scheme::automatic) {
    EmbeddedSystem sys = embed(s, p, eps);
    const double dt = default_dt(resolve_scheme(scheme, eps), eps);
    WienerPath w = generate_path(seed, path, sys.noise.source_dims(), T, int(std::lround(T / dt)));
    const BlockInfo* bf = sys.find(BlockKind::beta_f);
    const BlockInfo* bs = sys.find(BlockKind::beta_s);
    InitNormals xi = draw_init(seed, path, bf ? bf->dim : 0, bs ? bs->dim : 0);
    return simulate(sys, w, xi, SimOptions{scheme, dt, 1});
}

}  // namespace

TEST_SUITE("engine") {

TEST_CASE("keyed substreams are reproducible and distinct") {
    KeyedRng a(7, 3, 2), b(7, 3, 2), c(7, 4, 2), d(7, 3, 5);
    const double x = a.normal();
    CHECK(x == b.normal());
    CHECK(x != c.normal());
    CHECK(x != d.normal());
}

TEST_CASE("Brownian bridge refinement keeps the coarse increments") {
    WienerPath p = generate_path(3, 0, {1, 2, 0}, 2.0, 64);
    CHECK(p.dims() == 3);
    CHECK(p.dt() == doctest::Approx(2.0 / 64));
    WienerPath f = refine(refine(p));
    CHECK(f.steps() == 256);
    CHECK(max_abs(coarsen(coarsen(f)).inc - p.inc) < 1e-14);
    CHECK_THROWS_AS(coarsen(p), Error);
    // Same key gives the same refinement; the fine increments carry variance dt / 4.
    CHECK(max_abs(refine(p).inc - refine(p).inc) == 0.0);
    WienerPath big = refine(generate_path(9, 1, {4}, 1.0, 5000));
    const double var = big.inc.squaredNorm() / double(big.inc.size());
    CHECK(var == doctest::Approx(big.dt()).epsilon(0.03));
}

TEST_CASE("scheme helpers") {
    CHECK(scheme_from_string(to_string(Scheme::exp_ou_splitting)) == Scheme::exp_ou_splitting);
    CHECK(scheme_from_string(to_string(Scheme::euler_maruyama)) == Scheme::euler_maruyama);
    CHECK(resolve_scheme(Scheme::automatic, 0.5) == Scheme::euler_maruyama);
    CHECK(resolve_scheme(Scheme::automatic, 0.001) == Scheme::exp_ou_splitting);
    CHECK(default_dt(Scheme::euler_maruyama, 0.01) == doctest::Approx(5e-4));
    CHECK_THROWS_AS(scheme_from_string("rk4"), Error);
}

TEST_CASE("simulation is deterministic for a fixed key") {
    GleSpec s = named("temperature_gradient", {{"dim", 2}, {"gamma_slope", 0.5}, {"k", 1.0}});
    Trajectory a = run(s, Procedure::markov, 0.05, 4, 2, 0.5);
    Trajectory b = run(s, Procedure::markov, 0.05, 4, 2, 0.5);
    CHECK(a.Z.rows() == b.Z.rows());
    CHECK(max_abs(a.Z - b.Z) == 0.0);
    Trajectory c = run(s, Procedure::markov, 0.05, 4, 3, 0.5);
    CHECK(max_abs(a.Z - c.Z) > 0.0);
}

TEST_CASE("incommensurate step is refused") {
    GleSpec s = named("diagonal_nd", {{"dim", 1}});
    EmbeddedSystem sys = embed(s, Procedure::markov, 0.1);
    WienerPath w = generate_path(1, 0, sys.noise.source_dims(), 1.0, 100);
    CHECK_THROWS_AS(simulate(sys, w, draw_init(1, 0, 1, 0), SimOptions{Scheme::euler_maruyama, 0.015, 1}), Error);
}

TEST_CASE("fast noise keeps its stationary variance M / eps") {
    // diagonal_nd in one dimension has Gamma_f = Sigma_f = 1, so M = 1/2.
    GleSpec s = named("diagonal_nd", {{"dim", 1}, {"state_dependent", 0.0}});
    const double eps = 0.1, target = 0.5 / eps;
    for (Scheme sc : {Scheme::euler_maruyama, Scheme::exp_ou_splitting}) {
        std::vector<double> sq(400);
        for (int i = 0; i < 400; ++i) {
            Trajectory tr = run(s, Procedure::markov, eps, 17, i, 1.0, sc);
            const double b = tr.block(tr.Z.rows() - 1, BlockKind::beta_f)(0);
            sq[i] = b * b;
        }
        double m = 0, v = 0;
        for (double q : sq) m += q;
        m /= sq.size();
        for (double q : sq) v += (q - m) * (q - m);
        const double se = std::sqrt(v / (sq.size() - 1) / sq.size());
        // Euler carries a step bias of about h / (2 eps) = 2.5 percent.
        CHECK(std::abs(m - target) < 4 * se + 0.03 * target);
    }
}

TEST_CASE("first law holds on every simulated trajectory") {
    struct Case {
        std::string name;
        std::map<std::string, double> params;
    };
    const std::vector<Case> cases = {
        {"temperature_gradient", {{"dim", 2}, {"gamma_slope", 0.5}, {"T1", 0.3}, {"k", 1.0}}},
        {"temperature_gradient", {{"dim", 1}, {"gamma_slope", 0.5}, {"k", 2.0}}},
        {"diagonal_nd", {{"dim", 2}, {"k", 1.0}}},
        {"active_matter", {{"dim", 2}}},
    };
    int checked = 0;
    for (const auto& c : cases) {
        GleSpec s = named(c.name, c.params);
        for (Procedure p : {Procedure::none, Procedure::markov, Procedure::markov_then_mass, Procedure::mass,
                            Procedure::mass_then_markov, Procedure::joint}) {
            Trajectory tr;
            try {
                tr = run(s, p, 0.05, 8, checked, 0.5);
            } catch (const Error&) {
                continue;  // procedure not admissible for this spec
            }
            FunctionalLedger L = accumulate(tr, s, FunctionalSet::all());
            CHECK(first_law_gap(L) < 1e-9);
            ++checked;
        }
    }
    CHECK(checked >= 16);
}

TEST_CASE("heat is refused under white noise") {
    GleSpec s = named("magnetic", {});
    Trajectory tr = run(s, Procedure::none, 0.1, 1, 0, 0.1);
    CHECK_THROWS_AS(accumulate(tr, s, FunctionalSet::all()), Error);
    FunctionalLedger L = accumulate(tr, s, FunctionalSet::no_kinetic());
    CHECK(L.area.size() == tr.t.size());
}

TEST_CASE("area of a unit circle traversed once") {
    // Records along the circle; the polygonal area tends to pi.
    const int n = 2000;
    Trajectory tr;
    tr.blocks = {BlockInfo{BlockKind::x, 2, false, 0}};
    tr.Z.resize(n + 1, 2);
    for (int k = 0; k <= n; ++k) {
        const double th = 2 * M_PI * k / n;
        tr.t.push_back(double(k) / n);
        tr.Z.row(k) << std::cos(th), std::sin(th);
    }
    GleSpec s = named("diagonal_nd", {{"dim", 2}});
    FunctionalLedger L = accumulate(tr, s, FunctionalSet::no_kinetic());
    CHECK(L.area.back() == doctest::Approx(M_PI).epsilon(1e-5));
}

TEST_CASE("parallel_for writes every index once") {
    std::vector<int> hits(1000, 0);
    parallel_for(1000, [&](int i) { hits[i] += 1; });
    for (int h : hits) CHECK(h == 1);
    CHECK_THROWS(parallel_for(10, [](int i) {
        if (i == 5) throw std::runtime_error("x");
    }));
}

}
