#include "glehomog/harness.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <sstream>

#include "glehomog/errors.hpp"

namespace glehomog {

void EpsilonLadder::validate() const {
    if (values.empty()) fail(ErrorKind::config, "ladder: no eps values");
    for (size_t i = 0; i < values.size(); ++i) {
        if (!(values[i] > 0)) fail(ErrorKind::config, "ladder: eps values must be positive");
        if (i > 0 && !(values[i] < values[i - 1])) fail(ErrorKind::config, "ladder: eps values must strictly decrease");
    }
    if (paths < 1) fail(ErrorKind::config, "ladder: paths must be positive");
    if (!(T > 0)) fail(ErrorKind::config, "ladder: T must be positive");
    if (dt < 0) fail(ErrorKind::config, "ladder: dt must be nonnegative");
}

double EpsilonLadder::common_dt() const {
    if (dt > 0) return dt;
    double h = default_dt(scheme, values.front());
    for (double e : values) h = std::min(h, default_dt(scheme, e));
    return h;
}

MeanStderr mean_stderr(std::vector<double> values) {
    MeanStderr r;
    const size_t n = values.size();
    if (n == 0) return r;
    std::sort(values.begin(), values.end());
    double s = 0.0;
    for (double v : values) s += v;
    r.mean = s / double(n);
    if (n < 2) return r;
    std::vector<double> dev(n);
    for (size_t i = 0; i < n; ++i) dev[i] = (values[i] - r.mean) * (values[i] - r.mean);
    std::sort(dev.begin(), dev.end());
    double ss = 0.0;
    for (double v : dev) ss += v;
    r.stderr_ = std::sqrt(ss / double(n - 1) / double(n));
    return r;
}

RateFit fit_rate(const std::vector<double>& eps, const std::vector<double>& errors) {
    if (eps.size() != errors.size()) fail(ErrorKind::dimension, "fit_rate: size mismatch");
    if (eps.size() < 3) fail(ErrorKind::config, "fit_rate: needs at least 3 points");
    const size_t n = eps.size();
    std::vector<double> lx(n), ly(n);
    for (size_t i = 0; i < n; ++i) {
        if (!(eps[i] > 0) || !(errors[i] > 0)) fail(ErrorKind::numerical, "fit_rate: nonpositive value");
        lx[i] = std::log(eps[i]);
        ly[i] = std::log(errors[i]);
    }
    double mx = 0, my = 0;
    for (size_t i = 0; i < n; ++i) mx += lx[i], my += ly[i];
    mx /= double(n);
    my /= double(n);
    double sxx = 0, sxy = 0, syy = 0;
    for (size_t i = 0; i < n; ++i) {
        sxx += (lx[i] - mx) * (lx[i] - mx);
        sxy += (lx[i] - mx) * (ly[i] - my);
        syy += (ly[i] - my) * (ly[i] - my);
    }
    if (sxx == 0) fail(ErrorKind::numerical, "fit_rate: eps values coincide");
    RateFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    double res = 0;
    for (size_t i = 0; i < n; ++i) {
        const double e = ly[i] - f.intercept - f.slope * lx[i];
        res += e * e;
    }
    f.r2 = syy > 0 ? 1.0 - res / syy : 1.0;
    return f;
}

namespace {

int step_count(double T, double dt) {
    const long n = std::lround(T / dt);
    if (n < 1 || std::abs(n * dt - T) > 1e-9 * T) fail(ErrorKind::config, "harness: T is not a multiple of dt");
    return int(n);
}

void check_layouts(const EmbeddedSystem& a, const EmbeddedSystem& b) {
    if (a.noise.d0 != b.noise.d0 || a.noise.qf != b.noise.qf || a.noise.qs != b.noise.qs)
        fail(ErrorKind::dimension, "harness: limit and pre-limit noise layouts differ");
}

// Per-key values indexed [eps][path].
using Samples = std::map<std::string, std::vector<std::vector<double>>>;

void put(Samples& s, const std::string& key, size_t n_eps, int n_paths, size_t j, int i, double v) {
    auto& slot = s[key];
    if (slot.empty()) slot.assign(n_eps, std::vector<double>(size_t(n_paths), 0.0));
    slot[j][size_t(i)] = v;
}

ConvergenceReport assemble(const GleSpec& spec, Procedure p, const EpsilonLadder& ladder, double dt,
                           const Samples& samples) {
    ConvergenceReport rep;
    rep.scenario = spec.name;
    rep.procedure = to_string(p);
    rep.seed = ladder.seed;
    rep.dt = dt;
    rep.T = ladder.T;
    for (size_t j = 0; j < ladder.values.size(); ++j) {
        LadderPoint pt;
        pt.eps = ladder.values[j];
        pt.n_paths = ladder.paths;
        for (const auto& [key, per_eps] : samples) {
            const MeanStderr ms = mean_stderr(per_eps[j]);
            pt.mean[key] = ms.mean;
            pt.stderr_[key] = ms.stderr_;
        }
        rep.points.push_back(pt);
    }
    if (ladder.values.size() >= 3) {
        for (const auto& kv : samples) {
            std::vector<double> m;
            for (const auto& pt : rep.points) m.push_back(pt.mean.at(kv.first));
            if (std::all_of(m.begin(), m.end(), [](double v) { return v > 0; }))
                rep.rates[kv.first] = fit_rate(ladder.values, m);
            else
                rep.notes.push_back("no rate for " + kv.first + ": nonpositive mean error");
        }
    } else {
        rep.notes.push_back("no rate fits: fewer than 3 ladder points");
    }
    return rep;
}

struct Setup {
    std::vector<EmbeddedSystem> pre;
    EmbeddedSystem limit;
    HomogenizedModel model;
    bool self = false;
    Eigen::Index df = 0, ds = 0;
};

Setup make_setup(const GleSpec& spec, Procedure p, const EpsilonLadder& ladder) {
    Setup s;
    s.self = p == Procedure::none;
    for (double e : ladder.values) s.pre.push_back(embed(spec, p, e));
    if (!s.self) {
        s.model = homogenize(spec, p);
        s.limit = s.model.limit;
        for (const auto& sys : s.pre) check_layouts(sys, s.limit);
    }
    s.df = spec.fast_noise.state_dim();
    s.ds = spec.slow_noise.state_dim();
    return s;
}

}  // namespace

ConvergenceReport run_convergence(const GleSpec& spec, Procedure procedure, const EpsilonLadder& ladder) {
    ladder.validate();
    const double dt = ladder.common_dt();
    const int steps = step_count(ladder.T, dt);
    const Setup S = make_setup(spec, procedure, ladder);
    const size_t ne = ladder.values.size();
    std::vector<BlockKind> tracked{BlockKind::x};
    if (S.self || S.limit.find(BlockKind::v)) tracked.push_back(BlockKind::v);

    std::vector<std::vector<std::vector<double>>> err(tracked.size(),
                                                      std::vector<std::vector<double>>(ne, std::vector<double>(ladder.paths)));
    parallel_for(ladder.paths, [&](int i) {
        const WienerPath path = generate_path(ladder.seed, std::uint64_t(i), S.pre.front().noise.source_dims(), ladder.T, steps);
        const InitNormals init = draw_init(ladder.seed, std::uint64_t(i), S.df, S.ds);
        Trajectory lim;
        if (!S.self) lim = simulate(S.limit, path, init, SimOptions{Scheme::euler_maruyama, dt, 1});
        for (size_t j = 0; j < ne; ++j) {
            const Trajectory tr = simulate(S.pre[j], path, init, SimOptions{ladder.scheme, dt, 1});
            const Trajectory& ref = S.self ? tr : lim;
            for (size_t b = 0; b < tracked.size(); ++b) err[b][j][size_t(i)] = sup_distance(tr, ref, tracked[b]);
        }
    });
    Samples samples;
    for (size_t b = 0; b < tracked.size(); ++b) samples[to_string(tracked[b])] = err[b];
    ConvergenceReport rep = assemble(spec, procedure, ladder, dt, samples);
    if (S.self) rep.notes.push_back("procedure none: each trajectory is compared with itself");
    return rep;
}

ConvergenceReport run_functional_convergence(const GleSpec& spec, Procedure procedure, const EpsilonLadder& ladder) {
    ladder.validate();
    const double dt = ladder.common_dt();
    const int steps = step_count(ladder.T, dt);
    const Setup S = make_setup(spec, procedure, ladder);
    const size_t ne = ladder.values.size();
    const int np = ladder.paths;

    const bool thermal = !spec.has_white_noise() && (spec.fnc_acts || spec.f_nc.zero);
    const bool with_q = thermal && (S.self || S.limit.find(BlockKind::v) != nullptr);
    FunctionalSet which{with_q, true, true, false, false, false, true};

    Samples samples;
    std::mutex mu;
    parallel_for(np, [&](int i) {
        const WienerPath path = generate_path(ladder.seed, std::uint64_t(i), S.pre.front().noise.source_dims(), ladder.T, steps);
        const InitNormals init = draw_init(ladder.seed, std::uint64_t(i), S.df, S.ds);
        Trajectory lim;
        FunctionalLedger Llim;
        std::vector<double> aW, aR, aWg, aRg, aQ;
        if (!S.self) {
            lim = simulate(S.limit, path, init, SimOptions{Scheme::euler_maruyama, dt, 1});
            Llim = accumulate(lim, spec, which);
            const size_t n = lim.t.size();
            aW.assign(n, 0.0), aR = aW, aWg = aW, aRg = aW, aQ = aW;
            for (size_t k = 0; k + 1 < n; ++k) {
                const double t = lim.t[k], h = lim.t[k + 1] - lim.t[k];
                const Vec x = lim.block(Eigen::Index(k), BlockKind::x);
                aW[k + 1] = aW[k] + S.model.dW_anom(t, x) * h;
                aR[k + 1] = aR[k] + S.model.dR_anom(t, x) * h;
                aWg[k + 1] = aWg[k] + S.model.dW_anom_generic(t, x) * h;
                aRg[k + 1] = aRg[k] + S.model.dR_anom_generic(t, x) * h;
                if (with_q) aQ[k + 1] = aQ[k] + S.model.dQ_anom(t, x, lim.block(Eigen::Index(k), BlockKind::v)) * h;
            }
        }
        std::vector<std::pair<std::string, double>> out;
        for (size_t j = 0; j < ne; ++j) {
            const EmbeddedSystem& sys = S.pre[j];
            const Trajectory tr = simulate(sys, path, init, SimOptions{ladder.scheme, dt, 1});
            const FunctionalLedger L = accumulate(tr, spec, which);
            const size_t n = tr.t.size();
            auto compare = [&](const std::string& key, const std::vector<double>& pre, const std::vector<double>& ref,
                               const std::vector<double>* anom) {
                double sup = 0, term = 0;
                for (size_t k = 0; k < n; ++k) {
                    const double pred = S.self ? pre[k] : ref[k] + (anom ? (*anom)[k] : 0.0);
                    const double e = std::abs(pre[k] - pred);
                    sup = std::max(sup, e);
                    if (k + 1 == n) term = e;
                }
                out.emplace_back(key, sup);
                out.emplace_back(key + "_T", term);
            };
            compare("W", L.W, Llim.W, &aW);
            compare("W_noanom", L.W, Llim.W, nullptr);
            compare("W_generic", L.W, Llim.W, &aWg);
            compare("R", L.R, Llim.R, &aR);
            compare("R_noanom", L.R, Llim.R, nullptr);
            compare("R_generic", L.R, Llim.R, &aRg);
            if (with_q) {
                compare("Q", L.Q, Llim.Q, &aQ);
                compare("Q_noanom", L.Q, Llim.Q, nullptr);
            }
            // B ledger against Tr J at the current slow state
            double lit = 0, run = 0, cen = 0, trJ = 0;
            bool have_J = false;
            Coefficients c;
            for (size_t k = 0; k + 1 < n; ++k) {
                const double h = tr.t[k + 1] - tr.t[k];
                if (!have_J || !sys.fast_constant) {
                    Vec X, Y;
                    sys.split(tr.Z.row(Eigen::Index(k)).transpose(), X, Y);
                    sys.coeffs(tr.t[k], X, c);
                    trJ = sys.nY > 0 ? solve_lyapunov(c.U2, c.sigma * c.sigma.transpose()).trace() : 0.0;
                    have_J = true;
                }
                lit += std::abs(L.B[k] - trJ) * h;
                run += (L.B[k] - 0.5 * trJ) * h;
                cen = std::max(cen, std::abs(run));
            }
            out.emplace_back("B_literal", lit);
            out.emplace_back("B_centered", cen);
            std::lock_guard<std::mutex> lk(mu);
            for (const auto& [key, v] : out) put(samples, key, ne, np, j, i, v);
            out.clear();
        }
    });
    ConvergenceReport rep = assemble(spec, procedure, ladder, dt, samples);
    if (!with_q) rep.notes.push_back("heat not compared: undefined for this spec or procedure");
    if (S.self) rep.notes.push_back("procedure none: each trajectory is compared with itself");
    return rep;
}

AreaDemoReport area_anomaly_demo(double omega, const std::vector<double>& eps, int paths, double T, std::uint64_t seed,
                                 double dt, bool with_limit) {
    EpsilonLadder ladder;
    ladder.values = eps;
    ladder.paths = paths;
    ladder.seed = seed;
    ladder.T = T;
    ladder.dt = dt;
    ladder.validate();
    const int steps = step_count(T, dt);
    ScenarioParams params;
    params.values["omega"] = omega;
    const GleSpec spec = scenario("magnetic", params);
    const Setup S = make_setup(spec, Procedure::mass, ladder);
    const size_t ne = eps.size();
    const FunctionalSet which{false, false, false, false, false, true, false};

    std::vector<std::vector<double>> area(ne, std::vector<double>(size_t(paths))), diff = area;
    std::vector<double> lim_area(size_t(paths), 0.0);
    parallel_for(paths, [&](int i) {
        const WienerPath path = generate_path(seed, std::uint64_t(i), S.pre.front().noise.source_dims(), T, steps);
        const InitNormals init = draw_init(seed, std::uint64_t(i), S.df, S.ds);
        double a_lim = 0.0;
        if (with_limit) {
            const Trajectory lim = simulate(S.limit, path, init, SimOptions{Scheme::euler_maruyama, dt, 1});
            a_lim = accumulate(lim, spec, which).area.back();
        }
        lim_area[size_t(i)] = a_lim;
        for (size_t j = 0; j < ne; ++j) {
            const Trajectory tr = simulate(S.pre[j], path, init, SimOptions{Scheme::automatic, dt, 1});
            const double a = accumulate(tr, spec, which).area.back();
            area[j][size_t(i)] = a;
            diff[j][size_t(i)] = a - a_lim;
        }
    });
    AreaDemoReport rep;
    rep.omega = omega;
    rep.T = T;
    rep.seed = seed;
    rep.paths = paths;
    rep.dt = dt;
    rep.predicted_limit_mean = -0.5 * omega * T;
    for (size_t j = 0; j < ne; ++j) {
        AreaDemoPoint pt;
        pt.eps = eps[j];
        pt.area = mean_stderr(area[j]);
        if (with_limit) {
            pt.limit_area = mean_stderr(lim_area);
            pt.pathwise = mean_stderr(diff[j]);
        }
        rep.points.push_back(pt);
    }
    rep.anomaly_estimate = rep.points.back().area;
    return rep;
}

CommutativityReport commutativity_probe(const GleSpec& spec) {
    const HomogenizedModel a = markov_then_mass(spec);
    const HomogenizedModel b = joint_limit(spec);
    const EmbeddedSystem ea = embed(spec, Procedure::markov_then_mass, 1.0);
    const EmbeddedSystem eb = embed(spec, Procedure::joint, 1.0);
    const SlowFastSystem va = slow_fast_view(ea), vb = slow_fast_view(eb);
    const Eigen::Index d = spec.dim;
    auto padded = [d](const Vec& x, Eigen::Index n) {
        Vec X = Vec::Zero(n);
        X.head(d) = x;
        return X;
    };
    CommutativityReport r;
    for (const Vec& x : spec.grid()) {
        const Vec Xa = padded(x, a.limit.nX), Xb = padded(x, b.limit.nX);
        r.drift_sup = std::max(r.drift_sup, (a.drift_x(0.0, Xa).head(d) - b.drift_x(0.0, Xb).head(d)).norm());
        r.functional_sup = std::max(r.functional_sup, std::abs(a.dW_anom(0.0, Xa) - b.dW_anom(0.0, Xb)));
        const Vec ga = reduce_general(va, 0.0, padded(x, ea.nX)).drift.head(d);
        const Vec gb = reduce_general(vb, 0.0, padded(x, eb.nX)).drift.head(d);
        r.drift_sup_general = std::max(r.drift_sup_general, (ga - gb).norm());
    }
    r.predicate = spec.dim == 1 && check_fdr(spec).fdr2;
    r.consistent = !r.predicate || std::max(r.drift_sup, r.drift_sup_general) < 1e-10;
    std::ostringstream os;
    if (r.predicate)
        os << (r.consistent ? "commuting case confirmed" : "commuting case violated");
    else
        os << (std::max(r.drift_sup, r.drift_sup_general) > 1e-3 ? "limits differ" : "limits agree on the grid");
    r.verdict = os.str();
    return r;
}

GreenKuboReport green_kubo_mu(const Mat& U2, const Mat& sigma, int paths, double T, double dt, std::uint64_t seed) {
    const Eigen::Index n = U2.rows(), q = sigma.cols();
    require_dims(U2.cols() == n && sigma.rows() == n, "green_kubo_mu: shape mismatch");
    if (!is_positive_stable(U2)) fail(ErrorKind::numerical, "green_kubo_mu: U2 is not positive stable");
    if (paths < 2) fail(ErrorKind::config, "green_kubo_mu: needs at least 2 paths");
    const int steps = step_count(T, dt);
    const Mat J = solve_lyapunov(U2, sigma * sigma.transpose());
    const Mat I = Mat::Identity(n, n);
    GreenKuboReport rep;
    rep.mu_exact = U2.partialPivLu().solve(J);
    rep.mu_finite_T = U2.partialPivLu().solve((I - expm(-U2 * T)) * J);

    EmbeddedSystem sys;
    sys.eps = 1.0;
    sys.nX = n;
    sys.nY = n;
    sys.noise = NoiseLayout{0, q, 0};
    sys.blocks = {BlockInfo{BlockKind::x, n, false, 0}, BlockInfo{BlockKind::beta_f, n, true, 0}};
    sys.coeffs = [n, q, U2, sigma](double, const Vec&, Coefficients& c) {
        c.U1 = Mat::Identity(n, n);
        c.u1 = Vec::Zero(n);
        c.sigma_tilde = Mat::Zero(n, q);
        c.U2 = U2;
        c.sigma = sigma;
        c.u2 = Vec::Zero(n);
    };
    sys.fast_constant = true;
    sys.x0 = Vec::Zero(n);
    sys.chol_beta_f = Eigen::LLT<Mat>(J).matrixL();
    sys.chol_beta_s = Mat(0, 0);

    std::vector<std::vector<double>> s(size_t(n * n), std::vector<double>(size_t(paths)));
    parallel_for(paths, [&](int i) {
        const WienerPath path = generate_path(seed, std::uint64_t(i), sys.noise.source_dims(), T, steps);
        const InitNormals init = draw_init(seed, std::uint64_t(i), n, 0);
        const Trajectory tr = simulate(sys, path, init, SimOptions{Scheme::exp_ou_splitting, dt, steps});
        const Vec y0 = tr.block(0, BlockKind::beta_f);
        const Vec IT = tr.block(tr.Z.rows() - 1, BlockKind::x);
        for (Eigen::Index a = 0; a < n; ++a)
            for (Eigen::Index b = 0; b < n; ++b) s[size_t(a * n + b)][size_t(i)] = IT(a) * y0(b);
    });
    rep.mean.resize(n, n);
    rep.stderr_.resize(n, n);
    for (Eigen::Index a = 0; a < n; ++a)
        for (Eigen::Index b = 0; b < n; ++b) {
            const MeanStderr ms = mean_stderr(s[size_t(a * n + b)]);
            rep.mean(a, b) = ms.mean;
            rep.stderr_(a, b) = ms.stderr_;
            rep.max_z = std::max(rep.max_z, std::abs(ms.mean - rep.mu_finite_T(a, b)) / std::max(ms.stderr_, 1e-300));
        }
    return rep;
}

}  // namespace glehomog
