// Acceptance checks. Prints one PASS/FAIL line per criterion and exits nonzero when any fails.
// Usage: acceptance [criterion ...]   (no arguments runs all of them)

#include <chrono>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <unistd.h>

#include "glehomog/commands.hpp"
#include "glehomog/errors.hpp"
#include "glehomog/harness.hpp"
#include "support.hpp"

using namespace glehomog;
using testsupport::first_law_gap;
using testsupport::kron_lyapunov;
using testsupport::kron_sylvester;
using testsupport::max_abs;
using testsupport::named;
namespace fs = std::filesystem;

namespace {

struct Verdict {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
    char buf[512];
    va_list ap;
    va_start(ap, f);
    std::vsnprintf(buf, sizeof buf, f, ap);
    va_end(ap);
    return buf;
}

Verdict levy_area() {
    AreaDemoReport on = area_anomaly_demo(1.0, {0.02}, 10000, 1.0, 11, 1e-3, false);
    AreaDemoReport off = area_anomaly_demo(0.0, {0.02}, 10000, 1.0, 12, 1e-3, false);
    const MeanStderr a = on.points[0].area, c = off.points[0].area;
    const bool ok = std::abs(a.mean + 0.5) < 3 * a.stderr_ + 0.05 && std::abs(c.mean) < 3 * c.stderr_;
    return {ok, fmt("omega=1 mean %.4f +- %.4f (target -0.5); omega=0 mean %.4f +- %.4f", a.mean, a.stderr_, c.mean,
                    c.stderr_)};
}

double rel_lyap(const Mat& A, const Mat& J, const Mat& Q) {
    return (A * J + J * A.transpose() - Q).norm() / (2 * A.norm() * J.norm() + Q.norm());
}

Verdict matrix_equations() {
    testsupport::Rng rng(2024);
    double worst_res = 0, worst_gap = 0;
    int lyap = 0, sylv = 0, five = 0;
    for (int k = 0; k < 50; ++k, ++lyap) {
        const int n = 1 + k % 6;
        Mat A = rng.stable(n), B = rng.gauss(n, n);
        Mat Q = B * B.transpose();
        Mat J = solve_lyapunov(A, Q);
        worst_res = std::max(worst_res, rel_lyap(A, J, Q));
        worst_gap = std::max(worst_gap, max_abs(J - kron_lyapunov(A, Q)));
    }
    for (int k = 0; k < 50; ++k, ++sylv) {
        const int n = 1 + k % 5, m = 1 + (k / 5) % 4;
        Mat A = rng.stable(n), B = rng.stable(m), C = rng.gauss(n, m);
        Mat X = solve_sylvester(A, B, C);
        worst_res = std::max(worst_res, (A * X + X * B - C).norm() / (A.norm() * X.norm() + X.norm() * B.norm() + C.norm()));
        worst_gap = std::max(worst_gap, max_abs(X - kron_sylvester(A, B, C)));
    }
    for (int attempt = 0; five < 50 && attempt < 2000; ++attempt) {
        const int d = 1 + attempt % 3, d1 = 1 + (attempt / 3) % 3, df = 1 + (attempt / 9) % 2;
        CoupledFiveInput in;
        in.m0 = 0.3 + rng.uniform();
        in.gamma0 = rng.stable(d, 0.2);
        in.g = 0.6 * rng.gauss(d, d1);
        in.h = 0.6 * rng.gauss(d1, d);
        in.sigma_f = rng.gauss(d, df);
        NoiseTriple m = make_triple(rng.stable(d1), rng.gauss(d1, d1) + 2 * Mat::Identity(d1, d1), rng.gauss(d1, d1));
        NoiseTriple f = make_triple(rng.stable(df), Mat::Identity(df, df), rng.gauss(df, df));
        in.Gamma1 = m.Gamma;
        in.M1 = m.M;
        in.C1 = m.C;
        in.Gammaf = f.Gamma;
        in.Mf = f.M;
        in.Cf = f.C;
        const int n = d + d1 + df;
        Mat U = Mat::Zero(n, n);
        U.topLeftCorner(d, d) = in.gamma0 / in.m0;
        U.block(0, d, d, d1) = in.g * in.C1 / in.m0;
        U.block(0, d + d1, d, df) = -in.sigma_f * in.Cf / in.m0;
        U.block(d, 0, d1, d) = -in.M1 * in.C1.transpose() * in.h;
        U.block(d, d, d1, d1) = in.Gamma1;
        U.block(d + d1, d + d1, df, df) = in.Gammaf;
        if (!is_positive_stable(U, 0.05)) continue;
        Mat Qf = Mat::Zero(n, n);
        Qf.bottomRightCorner(df, df) = f.Sigma * f.Sigma.transpose();
        Mat P = kron_lyapunov(U, Qf);
        CoupledFiveSolution s = solve_coupled_five(in);
        for (double r : s.residuals) worst_res = std::max(worst_res, r);
        worst_gap = std::max({worst_gap, max_abs(s.J11 - P.block(0, 0, d, d)), max_abs(s.J12 - P.block(0, d, d, d1)),
                              max_abs(s.J13 - P.block(0, d + d1, d, df)), max_abs(s.J22 - P.block(d, d, d1, d1)),
                              max_abs(s.J23 - P.block(d, d + d1, d1, df))});
        ++five;
    }
    const bool ok = lyap == 50 && sylv == 50 && five == 50 && worst_res < 1e-9 && worst_gap < 1e-10;
    return {ok, fmt("%d/%d/%d instances; worst relative residual %.2e; worst oracle gap %.2e", lyap, sylv, five,
                    worst_res, worst_gap)};
}

GleSpec rotational(GleSpec s) {
    s.f_nc.zero = false;
    s.f_nc.eval = [](double, const Vec& x) {
        Vec f(2);
        f << -x(1) * (1.0 + 0.5 * x(0)), x(0);
        return f;
    };
    return s;
}

Verdict first_law() {
    const std::vector<GleSpec> specs = {
        named("temperature_gradient", {{"dim", 2}, {"gamma_slope", 0.5}, {"T1", 0.3}, {"k", 1.0}}),
        rotational(named("temperature_gradient", {{"dim", 2}, {"fast_skew", 2.0}, {"k", 1.0}})),
        named("temperature_gradient", {{"dim", 1}, {"gamma_slope", 0.5}, {"k", 2.0}}),
        named("diagonal_nd", {{"dim", 3}, {"k", 1.0}}),
        named("active_matter", {{"dim", 2}, {"active_slope", 0.5}}),
        named("magnetic", {{"colored", 1.0}}),
    };
    int count = 0;
    double worst = 0;
    for (const GleSpec& s : specs)
        for (Procedure p : {Procedure::none, Procedure::markov, Procedure::markov_then_mass, Procedure::mass,
                            Procedure::mass_then_markov, Procedure::joint})
            for (double eps : {0.1, 0.02}) {
                EmbeddedSystem pre;
                EmbeddedSystem lim;
                bool has_limit = p != Procedure::none;
                try {
                    pre = embed(s, p, eps);
                    if (has_limit) lim = homogenize(s, p).limit;
                } catch (const Error&) {
                    continue;  // not admissible for this spec
                }
                const double dt = default_dt(resolve_scheme(Scheme::automatic, eps), eps);
                const int steps = int(std::lround(1.0 / dt));
                for (int i = 0; i < 5; ++i) {
                    WienerPath w = generate_path(31, i, pre.noise.source_dims(), 1.0, steps);
                    InitNormals xi = draw_init(31, i, s.fast_noise.state_dim(), s.slow_noise.state_dim());
                    std::vector<Trajectory> trs{simulate(pre, w, xi, SimOptions{Scheme::automatic, dt, 1})};
                    if (has_limit) trs.push_back(simulate(lim, w, xi, SimOptions{Scheme::euler_maruyama, dt, 1}));
                    for (const Trajectory& tr : trs) {
                        worst = std::max(worst, first_law_gap(accumulate(tr, s, FunctionalSet::all())));
                        ++count;
                    }
                }
            }
    return {count > 0 && worst < 1e-9, fmt("%d trajectories; worst relative gap %.2e", count, worst)};
}

Verdict green_kubo() {
    testsupport::Rng rng(404);
    Mat U2 = rng.stable(3, 0.5), sigma = rng.gauss(3, 3);
    const double T = 20.0 / min_real_eigenvalue(U2);
    GreenKuboReport g = green_kubo_mu(U2, sigma, 10000, T, T / 50, 9);
    double z = 0;
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) z = std::max(z, std::abs(g.mean(a, b) - g.mu_exact(a, b)) / g.stderr_(a, b));
    return {z < 3.0, fmt("T = %.2f; max |mean - mu| / stderr = %.2f (finite-T target %.2f)", T, z, g.max_z)};
}

double sup_on_grid(const HomogenizedModel& m, const std::string& key) {
    double s = 0;
    for (const Vec& x : m.spec.grid()) {
        Vec X = Vec::Zero(m.limit.nX);
        X.head(m.spec.dim) = x;
        auto M = m.matrices(0.0, X);
        if (M.count(key)) s = std::max(s, max_abs(M.at(key)));
    }
    return s;
}

Verdict vanishing() {
    const double tol = 1e-10;
    std::vector<std::string> bad;
    // (a) one-dimensional scenarios with gamma0 = 0, every admissible procedure
    int models = 0;
    for (const GleSpec& s : {named("temperature_gradient", {{"dim", 1}, {"gamma_slope", 0.5}, {"T1", 0.3}}),
                             named("diagonal_nd", {{"dim", 1}, {"gamma0", 0.0}}), named("active_matter", {{"dim", 1}})})
        for (Procedure p : {Procedure::markov, Procedure::markov_then_mass, Procedure::mass, Procedure::mass_then_markov,
                            Procedure::joint}) {
            HomogenizedModel m;
            try {
                m = homogenize(s, p);
            } catch (const Error&) {
                continue;
            }
            ++models;
            for (const auto& name : {"Theta_A", "K_A", "mu_A", "lambda_A"})
                if (sup_on_grid(m, name) != 0.0) bad.push_back(std::string("a:") + s.name + "/" + to_string(p) + "/" + name);
        }
    // (b) detailed-balance fast triple
    GleSpec db = named("temperature_gradient", {{"dim", 2}, {"rate_split", 0.5}, {"twist", 0.3}, {"gamma_slope", 0.4}});
    const double thA = sup_on_grid(markovian_limit(db), "Theta_A");
    if (!(thA < tol)) bad.push_back("b");
    // (c) symmetric K: anomalous work and force drifts of markov_then_mass
    GleSpec c = rotational(named("temperature_gradient", {{"dim", 2}, {"twist", 0.3}, {"gamma_slope", 0.5}, {"k", 1.0}}));
    HomogenizedModel mc = markov_then_mass(c);
    double dw = 0;
    for (const Vec& x : c.grid()) dw = std::max({dw, std::abs(mc.dW_anom(0, x)), std::abs(mc.dR_anom(0, x))});
    if (!(dw < tol)) bad.push_back("c");
    // (d) diagonal spec under the joint limit
    const double la = sup_on_grid(joint_limit(named("diagonal_nd", {{"dim", 3}})), "lambda_A");
    if (!(la < tol)) bad.push_back("d");
    // (e) FDR spec
    GleSpec e = named("temperature_gradient", {{"dim", 2}, {"twist", 0.3}, {"rate_split", 0.5}, {"gamma_slope", 0.5}});
    HomogenizedModel me = joint_limit(e);
    double j = 0;
    for (const Vec& x : e.grid()) {
        auto M = me.matrices(0.0, x);
        j = std::max(j, max_abs(M.at("J21") - M.at("J31")));
    }
    if (!(j < tol)) bad.push_back("e");
    // With gamma0 != 0 the mass_then_markov mobility is a fast-space matrix; only its projection is d x d.
    HomogenizedModel mm = mass_then_markov(named("diagonal_nd", {{"dim", 1}}));
    auto M = mm.matrices(0.0, mm.spec.x0);
    const double fast_mu = max_abs(M.at("mu_A"));
    const double proj = max_abs(M.at("Phi") * M.at("mu_A") * M.at("Phi").transpose());
    std::string detail = fmt("(a) %d models; (b) %.1e; (c) %.1e; (d) %.1e; (e) %.1e; gamma0=1 1-D fast-space mu_A %.3f, "
                             "projected %.1e",
                             models, thA, dw, la, j, fast_mu, proj);
    for (const auto& b : bad) detail += " fail:" + b;
    return {bad.empty() && models >= 9, detail};
}

Verdict pathwise() {
    EpsilonLadder l;
    l.values = {0.2, 0.1, 0.05, 0.02};
    l.paths = 200;
    l.T = 10.0;
    l.seed = 6;
    l.scheme = Scheme::exp_ou_splitting;
    ConvergenceReport r = run_convergence(named("diagonal_nd", {{"dim", 1}, {"state_dependent", 0.0}}), Procedure::joint, l);
    bool mono = true;
    std::string errs;
    for (size_t j = 0; j < r.points.size(); ++j) {
        errs += fmt("%s%.3f", j ? "/" : "", r.points[j].mean.at("x"));
        if (j > 0 && !(r.points[j].mean.at("x") < r.points[j - 1].mean.at("x") + r.points[j].stderr_.at("x")))
            mono = false;
    }
    const double slope = r.rates.at("x").slope;
    return {mono && slope > 0.4, fmt("errors %s; rate %.3f; monotone %s", errs.c_str(), slope, mono ? "yes" : "no")};
}

Verdict anomalous_heat() {
    EpsilonLadder l;
    l.values = {0.02};
    l.paths = 2000;
    l.T = 1.0;
    l.seed = 7;
    GleSpec s = named("temperature_gradient", {{"dim", 2}, {"fast_skew", 2.0}, {"gamma_slope", 0.5}, {"k", 1.0}});
    const double thA = sup_on_grid(markovian_limit(s), "Theta_A");
    ConvergenceReport r = run_functional_convergence(s, Procedure::markov, l);
    const double with = r.points[0].mean.at("Q_T"), without = r.points[0].mean.at("Q_noanom_T");
    return {without >= 5 * with,
            fmt("Theta_A sup %.3f; terminal heat error with %.4f, without %.4f, ratio %.2f (needs 5)", thA, with, without,
                without / with)};
}

Verdict b_functional() {
    EpsilonLadder l;
    l.values = {0.2, 0.02};
    l.paths = 200;
    l.T = 1.0;
    l.seed = 8;
    ConvergenceReport r =
        run_functional_convergence(named("diagonal_nd", {{"dim", 1}, {"state_dependent", 0.0}}), Procedure::joint, l);
    const double a = r.points[0].mean.at("B_literal"), b = r.points[1].mean.at("B_literal");
    const double ca = r.points[0].mean.at("B_centered"), cb = r.points[1].mean.at("B_centered");
    return {a >= 2 * b, fmt("int |B - TrJ| %.3f -> %.3f, ratio %.2f (needs 2); centered diagnostic %.3f -> %.3f", a, b,
                            a / b, ca, cb)};
}

Verdict noncommuting() {
    CommutativityReport nc = commutativity_probe(named("temperature_gradient", {{"dim", 2}, {"T1", 0.5}, {"gamma_slope", 0.5}}));
    CommutativityReport fdr = commutativity_probe(named("temperature_gradient", {{"dim", 1}, {"gamma_slope", 0.5}}));
    const bool ok = nc.drift_sup > 1e-3 && nc.drift_sup_general > 1e-3 && fdr.drift_sup < 1e-10 &&
                    fdr.drift_sup_general < 1e-10;
    return {ok, fmt("2-D gap %.3e / %.3e; scalar FDR gap %.1e / %.1e", nc.drift_sup, nc.drift_sup_general, fdr.drift_sup,
                    fdr.drift_sup_general)};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

Verdict reproducible() {
    const fs::path root = fs::temp_directory_path() / ("glehomog_accept_" + std::to_string(::getpid()));
    fs::remove_all(root);
    fs::create_directories(root);
    {
        std::ofstream f(root / "tg.yaml");
        f << "scenario: temperature_gradient\nprocedure: markov\nseed: 5\nparams:\n  dim: 2\n  gamma_slope: 0.5\n"
             "  k: 1\nsimulation:\n  eps: 0.05\n  T: 0.5\nladder:\n  eps: [0.2, 0.1, 0.05]\n  paths: 10\n  T: 0.5\n";
    }
    int files = 0;
    std::vector<std::string> differing;
    for (const char* cmd : {"simulate", "reduce", "converge", "area-demo", "commute-probe", "report"}) {
        std::map<std::string, std::string> first;
        for (int rep = 0; rep < 2; ++rep) {
            CommandOptions o;
            o.command = cmd;
            o.out = (root / cmd).string();
            fs::remove_all(*o.out);
            if (o.command == "area-demo") {
                o.paths = 100;
                o.eps = std::vector<double>{0.1, 0.05};
                o.seed = 3;
            } else {
                o.config_path = (root / "tg.yaml").string();
            }
            std::ostringstream out, err;
            if (run_command(o, out, err) != 0) {
                differing.push_back(std::string(cmd) + " failed: " + err.str());
                break;
            }
            std::map<std::string, std::string> now;
            for (const auto& e : fs::directory_iterator(*o.out)) now[e.path().filename().string()] = slurp(e.path());
            if (rep == 0) {
                first = now;
                files += int(now.size());
            } else if (now != first) {
                differing.push_back(cmd);
            }
        }
    }
    fs::remove_all(root);
    std::string detail = fmt("6 commands, %d files compared", files);
    for (const auto& d : differing) detail += "; differs: " + d;
    return {differing.empty(), detail};
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria = {
        {"levy area anomaly", levy_area},
        {"matrix equation residuals", matrix_equations},
        {"first law ledger", first_law},
        {"green-kubo mobility", green_kubo},
        {"vanishing anomaly suites", vanishing},
        {"pathwise convergence", pathwise},
        {"anomalous heat necessity", anomalous_heat},
        {"B functional limit", b_functional},
        {"non-commutativity probe", noncommuting},
        {"reproducibility", reproducible},
    };
    std::set<int> chosen;
    for (int i = 1; i < argc; ++i) chosen.insert(std::atoi(argv[i]));
    int failures = 0;
    for (size_t k = 0; k < criteria.size(); ++k) {
        const int id = int(k) + 1;
        if (!chosen.empty() && !chosen.count(id)) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Verdict v;
        try {
            v = criteria[k].second();
        } catch (const std::exception& e) {
            v = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("criterion %2d %-28s %s  %s  [%.1fs]\n", id, criteria[k].first, v.pass ? "PASS" : "FAIL",
                    v.detail.c_str(), secs);
        std::fflush(stdout);
        if (!v.pass) ++failures;
    }
    return failures == 0 ? 0 : 1;
}
