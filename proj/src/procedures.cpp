#include <cmath>
#include <sstream>

#include "glehomog/errors.hpp"
#include "glehomog/homog.hpp"

namespace glehomog {

namespace {

using FieldFn = std::function<Vec(double, const Vec&)>;

struct Layout {
    Eigen::Index d, d1, df, ds, d0, wf, ws;
};

Layout layout_of(const GleSpec& s) {
    return Layout{s.dim,
                  s.memory.state_dim(),
                  s.fast_noise.state_dim(),
                  s.slow_noise.state_dim(),
                  s.sigma0.cols,
                  s.fast_noise.noise_dim(),
                  s.slow_noise.noise_dim()};
}

Mat solve_left(const Mat& A, const Mat& B) { return A.partialPivLu().solve(B); }

Mat gamma_eff(const GleSpec& s, double t, const Vec& x) {
    Mat G = s.gamma0(t, x);
    if (!s.memory.empty()) G += s.g(t, x) * k_matrix(s.memory) * s.h(t, x);
    return G;
}

// sigma_f C_f Gamma_f^{-1} Sigma_f
Mat sigma_eff(const GleSpec& s, double t, const Vec& x) {
    if (s.fast_noise.empty()) return Mat::Zero(s.dim, s.fast_noise.noise_dim());
    return s.sigma_f(t, x) * s.fast_noise.C * solve_left(s.fast_noise.Gamma, s.fast_noise.Sigma);
}

Mat theta_of(const GleSpec& s, double t, const Vec& x) {
    if (s.fast_noise.empty()) return Mat::Zero(s.dim, s.dim);
    Mat sf = s.sigma_f(t, x);
    return sf * k_matrix(s.fast_noise).transpose() * sf.transpose();
}

Vec slow_forcing(const GleSpec& s, double t, const Vec& x, const Vec& bs) {
    Vec F = s.force(t, x);
    if (bs.size() > 0) F += s.sigma_s(t, x) * s.slow_noise.C * bs;
    return F;
}

// div(P^T N) - P^T div(N), P a vector field and N a square matrix field of x.
double closed_form_anomaly(const FieldFn& P, const MatFn& N, double t, const Vec& x) {
    MatFn PN = [&](const Vec& z) -> Mat { return P(t, z).transpose() * N(z); };
    return divergence(PN, x)(0) - P(t, x).dot(divergence(N, x));
}

FieldFn fnc_field(const GleSpec& s) {
    return [s](double t, const Vec& x) -> Vec { return s.f_nc(t, x); };
}

FieldFn force_field(const GleSpec& s) {
    return [s](double t, const Vec& x) -> Vec { return s.force(t, x); };
}

// Functional drift from the generic reducer for P = [p(x)^T, 0], on the pre-limit arrangement of p.
std::function<double(double, const Vec&)> generic_anomaly(const GleSpec& spec, Procedure p, const FieldFn& field) {
    EmbeddedSystem pre = embed(spec, p, 1.0);
    SlowFastSystem sf = slow_fast_view(pre);
    const Eigen::Index d = spec.dim, nX = pre.nX;
    sf.P.rows = 1;
    sf.P.cols = nX;
    sf.P.constant = false;
    sf.P.eval = [field, d, nX](double t, const Vec& X) -> Mat {
        Mat P = Mat::Zero(1, nX);
        P.leftCols(d) = field(t, X.head(d)).transpose();
        return P;
    };
    return [sf, nX, d](double t, const Vec& x) {
        Vec X = Vec::Zero(nX);
        X.head(d) = x;
        return functional_strat_drift(sf, t, X)(0);
    };
}

// Slow-only system with the given drift and diffusion on the listed blocks.
EmbeddedSystem make_limit(const GleSpec& spec, Procedure p, const std::vector<std::pair<BlockKind, Eigen::Index>>& blocks,
                          std::function<Vec(double, const Vec&)> drift, std::function<Mat(double, const Vec&)> diffusion) {
    const Layout L = layout_of(spec);
    EmbeddedSystem sys;
    sys.procedure = p;
    sys.eps = 0.0;
    sys.mass = spec.mass;
    sys.noise = NoiseLayout{L.d0, L.wf, L.ws};
    sys.x0 = spec.x0;
    sys.v0 = spec.v0;
    for (const auto& [k, dim] : blocks) {
        sys.blocks.push_back(BlockInfo{k, dim, false, sys.nX});
        sys.nX += dim;
    }
    const Eigen::Index nX = sys.nX, nW = sys.noise.total();
    sys.coeffs = [drift, diffusion, nX, nW](double t, const Vec& X, Coefficients& c) {
        c.u1 = drift(t, X);
        c.sigma_tilde = diffusion(t, X);
        c.U1.setZero(nX, 0);
        c.U2.setZero(0, 0);
        c.sigma.setZero(0, nW);
        c.u2.setZero(0);
    };
    sys.fast_constant = true;
    auto chol = [](const Mat& M) -> Mat {
        if (M.rows() == 0) return Mat(0, 0);
        return Eigen::LLT<Mat>(M).matrixL();
    };
    sys.chol_beta_s = chol(spec.slow_noise.M);
    sys.chol_beta_f = chol(spec.fast_noise.M);
    if (!sys.find(BlockKind::beta_f)) sys.chol_beta_f = Mat(0, 0);
    return sys;
}

void check_positive_stable_on_grid(const GleSpec& s, const std::function<Mat(const Vec&)>& f, const std::string& what) {
    for (const Vec& p : s.grid())
        if (!is_positive_stable(f(p))) fail(ErrorKind::numerical, what + " is not positive stable on the sampled grid");
}

Mat as_column(const Vec& v) { return Mat(v); }

}  // namespace

HomogenizedModel markovian_limit(const GleSpec& spec) {
    validate_spec(spec);
    const Layout L = layout_of(spec);
    const double m = spec.mass;
    HomogenizedModel hm;
    hm.procedure = Procedure::markov;
    hm.spec = spec;
    auto drift = [spec, L, m](double t, const Vec& X) -> Vec {
        Vec x = X.head(L.d), v = X.segment(L.d, L.d), bs = X.tail(L.ds);
        Vec out = Vec::Zero(X.size());
        out.head(L.d) = v;
        out.segment(L.d, L.d) = (slow_forcing(spec, t, x, bs) - gamma_eff(spec, t, x) * v) / m;
        if (L.ds > 0) out.tail(L.ds) = -spec.slow_noise.Gamma * bs;
        return out;
    };
    auto diffusion = [spec, L, m](double t, const Vec& X) -> Mat {
        Vec x = X.head(L.d);
        Mat S = Mat::Zero(X.size(), L.d0 + L.wf + L.ws);
        if (L.d0 > 0) S.block(L.d, 0, L.d, L.d0) = spec.sigma0(t, x) / m;
        if (L.df > 0) S.block(L.d, L.d0, L.d, L.wf) = sigma_eff(spec, t, x) / m;
        if (L.ds > 0) S.block(2 * L.d, L.d0 + L.wf, L.ds, L.ws) = spec.slow_noise.Sigma;
        return S;
    };
    hm.limit = make_limit(spec, Procedure::markov, {{BlockKind::x, L.d}, {BlockKind::v, L.d}, {BlockKind::beta_s, L.ds}},
                          drift, diffusion);
    hm.drift_x = drift;
    hm.diffusion_x = diffusion;
    hm.noise_induced = [L](double, const Vec&) -> Vec { return Vec::Zero(L.d); };
    hm.matrices = [spec](double t, const Vec& X) {
        Vec x = X.head(spec.dim);
        Mat Th = theta_of(spec, t, x);
        return std::map<std::string, Mat>{{"Gamma", gamma_eff(spec, t, x)},
                                          {"Sigma", sigma_eff(spec, t, x)},
                                          {"Theta", Th},
                                          {"Theta_A", antisym(Th)}};
    };
    hm.dQ_anom = [spec, m](double t, const Vec& x, const Vec& v) {
        const Mat ThA = antisym(theta_of(spec, t, x));
        // (1/m) div_v (v^T Theta_A), differentiated in v
        MatFn row = [&](const Vec& w) -> Mat { return w.transpose() * ThA; };
        return divergence(row, v)(0) / m;
    };
    hm.dW_anom = [](double, const Vec&) { return 0.0; };
    hm.dR_anom = [](double, const Vec&) { return 0.0; };
    hm.dW_anom_generic = hm.dW_anom;
    hm.dR_anom_generic = hm.dR_anom;
    hm.antisym_names = {"Theta_A"};
    return hm;
}

HomogenizedModel markov_then_mass(const GleSpec& spec) {
    validate_spec(spec);
    if (spec.has_white_noise()) fail(ErrorKind::config, "markov_then_mass: sigma0 must vanish");
    const Layout L = layout_of(spec);
    const double tol = 1e-9;
    for (const Vec& p : spec.grid()) {
        Mat Th = theta_of(spec, 0.0, p);
        if (antisym(Th).norm() > tol * std::max(1.0, Th.norm()))
            fail(ErrorKind::refusal, "markov_then_mass: anomalous heat divergence (Theta_A != 0), the heat functional has no limit");
    }
    check_positive_stable_on_grid(spec, [&](const Vec& p) { return gamma_eff(spec, 0.0, p); }, "Gamma = gamma0 + g K1 h");
    HomogenizedModel hm;
    hm.procedure = Procedure::markov_then_mass;
    hm.spec = spec;

    auto Jf = [spec](double t, const Vec& x) -> Mat {
        Mat Th = theta_of(spec, t, x);
        return solve_lyapunov(gamma_eff(spec, t, x), sym(Th + Th.transpose()));
    };
    auto H = [spec, Jf](double t, const Vec& x) -> Vec {
        const Mat G = gamma_eff(spec, t, x);
        const Mat Sg = sigma_eff(spec, t, x);
        if (is_symmetric(G * Sg * Sg.transpose(), 1e-12)) {
            // detailed-balance shortcut
            MatFn a = [&](const Vec& z) -> Mat {
                Mat Gz = gamma_eff(spec, t, z);
                return solve_left(Gz * Gz, theta_of(spec, t, z));
            };
            MatFn b = [&](const Vec& z) -> Mat { return solve_left(gamma_eff(spec, t, z), theta_of(spec, t, z)); };
            return divergence(a, x) - solve_left(G, divergence(b, x));
        }
        MatFn a = [&](const Vec& z) -> Mat { return solve_left(gamma_eff(spec, t, z), Jf(t, z)); };
        MatFn b = [&](const Vec& z) -> Mat { return Jf(t, z); };
        return divergence(a, x) - solve_left(G, divergence(b, x));
    };
    auto drift = [spec, L, H](double t, const Vec& X) -> Vec {
        Vec x = X.head(L.d), bs = X.tail(L.ds);
        Vec out = Vec::Zero(X.size());
        out.head(L.d) = solve_left(gamma_eff(spec, t, x), slow_forcing(spec, t, x, bs)) + H(t, x);
        if (L.ds > 0) out.tail(L.ds) = -spec.slow_noise.Gamma * bs;
        return out;
    };
    auto diffusion = [spec, L](double t, const Vec& X) -> Mat {
        Vec x = X.head(L.d);
        Mat S = Mat::Zero(X.size(), L.d0 + L.wf + L.ws);
        if (L.df > 0) S.block(0, L.d0, L.d, L.wf) = solve_left(gamma_eff(spec, t, x), sigma_eff(spec, t, x));
        if (L.ds > 0) S.block(L.d, L.d0 + L.wf, L.ds, L.ws) = spec.slow_noise.Sigma;
        return S;
    };
    hm.limit = make_limit(spec, Procedure::markov_then_mass, {{BlockKind::x, L.d}, {BlockKind::beta_s, L.ds}}, drift,
                          diffusion);
    hm.drift_x = drift;
    hm.diffusion_x = diffusion;
    hm.noise_induced = [H, L](double t, const Vec& X) -> Vec { return H(t, X.head(L.d)); };
    auto K = [spec, Jf](double t, const Vec& x) -> Mat { return solve_left(gamma_eff(spec, t, x), Jf(t, x)); };
    hm.matrices = [spec, Jf, K, H](double t, const Vec& X) {
        Vec x = X.head(spec.dim);
        Mat G = gamma_eff(spec, t, x), Th = theta_of(spec, t, x), Kx = K(t, x);
        return std::map<std::string, Mat>{{"Gamma", G},
                                          {"Sigma", sigma_eff(spec, t, x)},
                                          {"Theta", Th},
                                          {"Theta_A", antisym(Th)},
                                          {"J", Jf(t, x)},
                                          {"K", Kx},
                                          {"K_A", antisym(Kx)},
                                          {"K_db", solve_left(G * G, Th)},
                                          {"H", as_column(H(t, x))}};
    };
    hm.dQ_anom = [](double, const Vec&, const Vec&) { return 0.0; };
    auto KAt = [K](double t) {
        return [K, t](const Vec& z) -> Mat { return Mat(antisym(K(t, z)).transpose()); };
    };
    FieldFn f = fnc_field(spec), F = force_field(spec);
    hm.dW_anom = [f, KAt](double t, const Vec& x) { return closed_form_anomaly(f, KAt(t), t, x); };
    hm.dR_anom = [F, KAt](double t, const Vec& x) { return closed_form_anomaly(F, KAt(t), t, x); };
    hm.dW_anom_generic = generic_anomaly(spec, Procedure::markov_then_mass, f);
    hm.dR_anom_generic = generic_anomaly(spec, Procedure::markov_then_mass, F);
    hm.antisym_names = {"Theta_A", "K_A"};
    return hm;
}

HomogenizedModel mass_limit(const GleSpec& spec) {
    validate_spec(spec);
    check_positive_stable_on_grid(spec, [&](const Vec& p) { return spec.gamma0(0.0, p); }, "gamma0");
    const Layout L = layout_of(spec);
    const bool white = spec.has_white_noise();
    HomogenizedModel hm;
    hm.procedure = Procedure::mass;
    hm.spec = spec;
    const Eigen::Index oy = L.d, of = L.d + L.d1, os = L.d + L.d1 + L.df;
    std::function<Vec(double, const Vec&)> S_ito = [L](double, const Vec&) -> Vec { return Vec::Zero(L.d + L.d1 + L.df + L.ds); };
    const bool frozen = spec.gamma0.constant && spec.sigma0.constant && spec.g.constant && spec.h.constant &&
                        spec.sigma_f.constant;
    if (white && !frozen) {
        // With white noise on v the generic noise-induced drift applies.
        SlowFastSystem sf = slow_fast_view(embed(spec, Procedure::mass, 1.0));
        S_ito = [sf](double t, const Vec& X) -> Vec {
            const Mat U1 = sf.U1(t, X);
            auto Jf = [&](const Vec& Z) {
                Mat s = sf.sigma(t, Z);
                return solve_lyapunov(sf.U2(t, Z), s * s.transpose());
            };
            auto Gf = [&](const Vec& Z) -> Mat {
                return sf.U2(t, Z).transpose().partialPivLu().solve(sf.U1(t, Z).transpose()).transpose();
            };
            MatFn GJU = [&](const Vec& Z) -> Mat { return Gf(Z) * Jf(Z) * sf.U1(t, Z).transpose(); };
            MatFn JU = [&](const Vec& Z) -> Mat { return Jf(Z) * sf.U1(t, Z).transpose(); };
            return divergence(GJU, X) - Gf(X) * divergence(JU, X);
        };
    }
    auto drift = [spec, L, oy, of, os, S_ito](double t, const Vec& X) -> Vec {
        Vec x = X.head(L.d), y = X.segment(oy, L.d1), bf = X.segment(of, L.df), bs = X.segment(os, L.ds);
        Vec rhs = slow_forcing(spec, t, x, bs);
        if (L.d1 > 0) rhs -= spec.g(t, x) * spec.memory.C * y;
        if (L.df > 0) rhs += spec.sigma_f(t, x) * spec.fast_noise.C * bf;
        Vec vx = solve_left(spec.gamma0(t, x), rhs);
        Vec out(X.size());
        out.head(L.d) = vx;
        if (L.d1 > 0) out.segment(oy, L.d1) = -spec.memory.Gamma * y + spec.memory.M * spec.memory.C.transpose() * spec.h(t, x) * vx;
        if (L.df > 0) out.segment(of, L.df) = -spec.fast_noise.Gamma * bf;
        if (L.ds > 0) out.segment(os, L.ds) = -spec.slow_noise.Gamma * bs;
        return Vec(out + S_ito(t, X));
    };
    auto diffusion = [spec, L, oy, of, os](double t, const Vec& X) -> Mat {
        Vec x = X.head(L.d);
        Mat S = Mat::Zero(X.size(), L.d0 + L.wf + L.ws);
        if (L.d0 > 0) {
            Mat w = solve_left(spec.gamma0(t, x), spec.sigma0(t, x));
            S.block(0, 0, L.d, L.d0) = w;
            if (L.d1 > 0) S.block(oy, 0, L.d1, L.d0) = spec.memory.M * spec.memory.C.transpose() * spec.h(t, x) * w;
        }
        if (L.df > 0) S.block(of, L.d0, L.df, L.wf) = spec.fast_noise.Sigma;
        if (L.ds > 0) S.block(os, L.d0 + L.wf, L.ds, L.ws) = spec.slow_noise.Sigma;
        return S;
    };
    hm.limit = make_limit(spec, Procedure::mass,
                          {{BlockKind::x, L.d}, {BlockKind::y, L.d1}, {BlockKind::beta_f, L.df}, {BlockKind::beta_s, L.ds}},
                          drift, diffusion);
    hm.drift_x = drift;
    hm.diffusion_x = diffusion;
    hm.noise_induced = [S_ito, L](double t, const Vec& X) -> Vec { return S_ito(t, X).head(L.d); };
    hm.matrices = [spec, white](double t, const Vec& X) {
        Vec x = X.head(spec.dim);
        std::map<std::string, Mat> out{{"gamma0", spec.gamma0(t, x)}};
        if (white) {
            Mat g0 = spec.gamma0(t, x) / spec.mass, s0 = spec.sigma0(t, x) / spec.mass;
            OnsagerDecomposition o = onsager_decompose(g0, s0);
            out["mu"] = o.mu;
            out["mu_A"] = antisym(o.mu);
            out["Q"] = o.Q;
        }
        return out;
    };
    hm.dQ_anom = [](double, const Vec&, const Vec&) { return 0.0; };
    FieldFn f = fnc_field(spec), F = force_field(spec);
    if (white) {
        hm.dW_anom = generic_anomaly(spec, Procedure::mass, f);
        hm.dR_anom = generic_anomaly(spec, Procedure::mass, F);
        hm.antisym_names = {"mu_A"};
    } else {
        hm.dW_anom = [](double, const Vec&) { return 0.0; };
        hm.dR_anom = [](double, const Vec&) { return 0.0; };
    }
    hm.dW_anom_generic = white ? hm.dW_anom : generic_anomaly(spec, Procedure::mass, f);
    hm.dR_anom_generic = white ? hm.dR_anom : generic_anomaly(spec, Procedure::mass, F);
    return hm;
}

MassFdrReduced mass_limit_fdr_reduced(const GleSpec& spec, double t, const Vec& x, const Vec& z) {
    if (!check_fdr(spec).fdr2) fail(ErrorKind::config, "mass_limit_fdr_reduced: the spec does not satisfy fdr2");
    const Mat g0 = spec.gamma0(t, x), g = spec.g(t, x);
    const Mat& C1 = spec.memory.C;
    const Mat& M1 = spec.memory.M;
    const Vec F = spec.force(t, x);
    MassFdrReduced r;
    r.dx = solve_left(g0, F + g * C1 * z);
    const Mat B = M1 * C1.transpose() * g.transpose();
    r.dz = -(spec.memory.Gamma + B * solve_left(g0, g * C1)) * z - B * solve_left(g0, F);
    return r;
}

namespace {

struct MtmParts {
    Mat g0i, gamma1, J11, J12, gamma2inv, R, T, Phi, mu, noise;
};

MtmParts mtm_parts(const GleSpec& s, double t, const Vec& x) {
    const Eigen::Index d = s.dim, d1 = s.memory.state_dim(), df = s.fast_noise.state_dim();
    MtmParts p;
    const Mat g0 = s.gamma0(t, x);
    auto lu = g0.partialPivLu();
    p.g0i = lu.inverse();
    const Mat& C1 = s.memory.C;
    const Mat& M1 = s.memory.M;
    const Mat& Cf = s.fast_noise.C;
    const Mat& Gf = s.fast_noise.Gamma;
    const Mat& Mf = s.fast_noise.M;
    const Mat gC1 = d1 > 0 ? Mat(s.g(t, x) * C1) : Mat(Mat::Zero(d, 0));
    const Mat MCh = d1 > 0 ? Mat(M1 * C1.transpose() * s.h(t, x)) : Mat(Mat::Zero(0, d));
    const Mat sfCf = df > 0 ? Mat(s.sigma_f(t, x) * Cf) : Mat(Mat::Zero(d, 0));
    p.gamma1 = d1 > 0 ? Mat(s.memory.Gamma + MCh * p.g0i * gC1) : Mat(0, 0);
    if (d1 > 0 && !is_positive_stable(p.gamma1)) fail(ErrorKind::numerical, "mass_then_markov: gamma1 is not positive stable");
    const Mat Bm = MCh * p.g0i * sfCf;  // d1 x df
    p.J12 = solve_sylvester(p.gamma1, Gf.transpose(), Bm * Mf);
    p.J11 = solve_lyapunov(p.gamma1, sym(Bm * p.J12.transpose() + p.J12 * Bm.transpose()));
    const Mat g1i = d1 > 0 ? Mat(p.gamma1.inverse()) : Mat(0, 0);
    const Mat Gfi = df > 0 ? Mat(Gf.inverse()) : Mat(0, 0);
    p.gamma2inv = p.g0i * (Mat::Identity(d, d) - gC1 * g1i * MCh * p.g0i);
    p.R.resize(d, d1 + df);
    p.R.leftCols(d1) = -p.g0i * gC1 * g1i;
    p.R.rightCols(df) = -p.g0i * (gC1 * g1i * Bm * Gfi - sfCf * Gfi);
    const Mat g0it = p.g0i.transpose();
    p.T.resize(d1 + df, d);
    p.T.topRows(d1) = -p.J11 * gC1.transpose() * g0it + p.J12 * sfCf.transpose() * g0it;
    p.T.bottomRows(df) = -p.J12.transpose() * gC1.transpose() * g0it + Mf * sfCf.transpose() * g0it;
    p.Phi.resize(d, d1 + df);
    p.Phi.leftCols(d1) = -p.g0i * gC1;
    p.Phi.rightCols(df) = p.g0i * sfCf;
    p.mu.resize(d1 + df, d1 + df);
    p.mu.topLeftCorner(d1, d1) = g1i * (p.J11 + Bm * Gfi * p.J12.transpose());
    p.mu.topRightCorner(d1, df) = g1i * (p.J12 + Bm * Gfi * Mf);
    p.mu.bottomLeftCorner(df, d1) = Gfi * p.J12.transpose();
    p.mu.bottomRightCorner(df, df) = Gfi * Mf;
    p.noise = df > 0 ? Mat(p.gamma2inv * sfCf * Gfi * s.fast_noise.Sigma) : Mat(Mat::Zero(d, 0));
    return p;
}

}  // namespace

HomogenizedModel mass_then_markov(const GleSpec& spec) {
    validate_spec(spec);
    if (spec.has_white_noise()) fail(ErrorKind::config, "mass_then_markov: sigma0 must vanish");
    check_positive_stable_on_grid(spec, [&](const Vec& p) { return spec.gamma0(0.0, p); }, "gamma0");
    const Layout L = layout_of(spec);
    HomogenizedModel hm;
    hm.procedure = Procedure::mass_then_markov;
    hm.spec = spec;
    auto S = [spec](double t, const Vec& x) -> Vec {
        const MtmParts p = mtm_parts(spec, t, x);
        MatFn R = [&](const Vec& z) -> Mat { return mtm_parts(spec, t, z).R; };
        Vec out = Vec::Zero(spec.dim);
        // S^i = dR^{ij}/dx^l T^{jl}
        for (Eigen::Index l = 0; l < spec.dim; ++l) out += partial(R, x, l) * p.T.col(l);
        return out;
    };
    auto drift = [spec, L, S](double t, const Vec& X) -> Vec {
        Vec x = X.head(L.d), bs = X.tail(L.ds);
        Vec out = Vec::Zero(X.size());
        out.head(L.d) = mtm_parts(spec, t, x).gamma2inv * slow_forcing(spec, t, x, bs) + S(t, x);
        if (L.ds > 0) out.tail(L.ds) = -spec.slow_noise.Gamma * bs;
        return out;
    };
    auto diffusion = [spec, L](double t, const Vec& X) -> Mat {
        Vec x = X.head(L.d);
        Mat Sg = Mat::Zero(X.size(), L.d0 + L.wf + L.ws);
        if (L.df > 0) Sg.block(0, L.d0, L.d, L.wf) = mtm_parts(spec, t, x).noise;
        if (L.ds > 0) Sg.block(L.d, L.d0 + L.wf, L.ds, L.ws) = spec.slow_noise.Sigma;
        return Sg;
    };
    hm.limit = make_limit(spec, Procedure::mass_then_markov, {{BlockKind::x, L.d}, {BlockKind::beta_s, L.ds}}, drift,
                          diffusion);
    hm.drift_x = drift;
    hm.diffusion_x = diffusion;
    hm.noise_induced = [S, L](double t, const Vec& X) -> Vec { return S(t, X.head(L.d)); };
    hm.matrices = [spec, S](double t, const Vec& X) {
        Vec x = X.head(spec.dim);
        const MtmParts p = mtm_parts(spec, t, x);
        return std::map<std::string, Mat>{{"gamma1", p.gamma1},
                                          {"gamma2", p.gamma2inv.inverse()},
                                          {"J11", p.J11},
                                          {"J12", p.J12},
                                          {"CouplingR", p.R},
                                          {"CouplingT", p.T},
                                          {"Phi", p.Phi},
                                          {"mu", p.mu},
                                          {"mu_A", antisym(p.mu)},
                                          {"S", as_column(S(t, x))}};
    };
    hm.dQ_anom = [](double, const Vec&, const Vec&) { return 0.0; };
    auto N = [spec](double t) {
        return [spec, t](const Vec& z) -> Mat {
            const MtmParts p = mtm_parts(spec, t, z);
            return p.Phi * antisym(p.mu).transpose() * p.Phi.transpose();
        };
    };
    FieldFn f = fnc_field(spec), F = force_field(spec);
    hm.dW_anom = [f, N](double t, const Vec& x) { return closed_form_anomaly(f, N(t), t, x); };
    hm.dR_anom = [F, N](double t, const Vec& x) { return closed_form_anomaly(F, N(t), t, x); };
    hm.dW_anom_generic = generic_anomaly(spec, Procedure::mass_then_markov, f);
    hm.dR_anom_generic = generic_anomaly(spec, Procedure::mass_then_markov, F);
    hm.antisym_names = {"mu_A"};
    return hm;
}

namespace {

struct JointParts {
    Mat Gamma, Gi, J11, J21, J31, lambda, Sigma;
};

JointParts joint_parts(const GleSpec& s, double t, const Vec& x) {
    const Eigen::Index d = s.dim, d1 = s.memory.state_dim(), df = s.fast_noise.state_dim();
    CoupledFiveInput in{s.gamma0(t, x), s.g(t, x), s.h(t, x), s.sigma_f(t, x),
                        s.memory.Gamma, s.memory.M, s.memory.C,
                        s.fast_noise.Gamma, s.fast_noise.M, s.fast_noise.C, s.mass};
    JointParts p;
    if (s.has_white_noise()) {
        // The five equations with the white-noise term added to the first block.
        Mat U = joint_fast_generator(in);
        Mat sig = Mat::Zero(U.rows(), s.sigma0.cols + s.fast_noise.noise_dim());
        sig.topLeftCorner(d, s.sigma0.cols) = s.sigma0(t, x) / s.mass;
        if (df > 0) sig.bottomRightCorner(df, s.fast_noise.noise_dim()) = s.fast_noise.Sigma;
        Mat J = solve_lyapunov(U, sig * sig.transpose());
        p.J11 = J.topLeftCorner(d, d);
        p.J21 = J.block(d, 0, d1, d);
        p.J31 = J.block(d + d1, 0, df, d);
    } else {
        CoupledFiveSolution sol = solve_coupled_five(in);
        p.J11 = sol.J11;
        p.J21 = sol.J12.transpose();
        p.J31 = sol.J13.transpose();
    }
    p.Gamma = gamma_eff(s, t, x);
    p.Gi = p.Gamma.inverse();
    const double m0 = s.mass;
    p.lambda = -m0 * p.Gi * p.J11;
    if (d1 > 0) p.lambda += p.Gi * in.g * in.C1 * solve_left(in.Gamma1, p.J21);
    if (df > 0) p.lambda -= p.Gi * in.sigma_f * in.Cf * solve_left(in.Gammaf, p.J31);
    p.Sigma = sigma_eff(s, t, x);
    return p;
}

// C1 Gamma1^{-1} J21 and Cf Gammaf^{-1} J31
Mat mem_part(const GleSpec& s, const JointParts& p) {
    if (s.memory.empty()) return Mat::Zero(0, s.dim);
    return s.memory.C * solve_left(s.memory.Gamma, p.J21);
}
Mat fast_part(const GleSpec& s, const JointParts& p) {
    if (s.fast_noise.empty()) return Mat::Zero(0, s.dim);
    return s.fast_noise.C * solve_left(s.fast_noise.Gamma, p.J31);
}

}  // namespace

HomogenizedModel joint_limit(const GleSpec& spec) {
    validate_spec(spec);
    check_positive_stable_on_grid(spec, [&](const Vec& p) { return gamma_eff(spec, 0.0, p); }, "Gamma = gamma0 + g K1 h");
    const Layout L = layout_of(spec);
    const double m0 = spec.mass;
    HomogenizedModel hm;
    hm.procedure = Procedure::joint;
    hm.spec = spec;
    auto S = [spec, m0](double t, const Vec& x) -> Vec {
        const JointParts p = joint_parts(spec, t, x);
        MatFn inner = [&](const Vec& z) -> Mat {
            JointParts q = joint_parts(spec, t, z);
            Mat A = m0 * q.J11;
            if (!spec.memory.empty()) A -= spec.g(t, z) * mem_part(spec, q);
            if (!spec.fast_noise.empty()) A += spec.sigma_f(t, z) * fast_part(spec, q);
            return q.Gi * A;
        };
        Vec rest = -m0 * divergence(MatFn([&](const Vec& z) -> Mat { return joint_parts(spec, t, z).J11; }), x);
        if (!spec.memory.empty())
            rest += spec.g(t, x) * divergence(MatFn([&](const Vec& z) -> Mat { return mem_part(spec, joint_parts(spec, t, z)); }), x);
        if (!spec.fast_noise.empty())
            rest -= spec.sigma_f(t, x) *
                    divergence(MatFn([&](const Vec& z) -> Mat { return fast_part(spec, joint_parts(spec, t, z)); }), x);
        return divergence(inner, x) + p.Gi * rest;
    };
    auto drift = [spec, L, S](double t, const Vec& X) -> Vec {
        Vec x = X.head(L.d), bs = X.tail(L.ds);
        Vec out = Vec::Zero(X.size());
        out.head(L.d) = solve_left(gamma_eff(spec, t, x), slow_forcing(spec, t, x, bs)) + S(t, x);
        if (L.ds > 0) out.tail(L.ds) = -spec.slow_noise.Gamma * bs;
        return out;
    };
    auto diffusion = [spec, L](double t, const Vec& X) -> Mat {
        Vec x = X.head(L.d);
        Mat Sg = Mat::Zero(X.size(), L.d0 + L.wf + L.ws);
        Mat G = gamma_eff(spec, t, x);
        if (L.d0 > 0) Sg.block(0, 0, L.d, L.d0) = solve_left(G, spec.sigma0(t, x));
        if (L.df > 0) Sg.block(0, L.d0, L.d, L.wf) = solve_left(G, sigma_eff(spec, t, x));
        if (L.ds > 0) Sg.block(L.d, L.d0 + L.wf, L.ds, L.ws) = spec.slow_noise.Sigma;
        return Sg;
    };
    hm.limit = make_limit(spec, Procedure::joint, {{BlockKind::x, L.d}, {BlockKind::beta_s, L.ds}}, drift, diffusion);
    hm.drift_x = drift;
    hm.diffusion_x = diffusion;
    hm.noise_induced = [S, L](double t, const Vec& X) -> Vec { return S(t, X.head(L.d)); };
    auto S_fdr = [spec, m0](double t, const Vec& x) -> Vec {
        MatFn a = [&](const Vec& z) -> Mat {
            JointParts q = joint_parts(spec, t, z);
            return q.Gi * q.J11;
        };
        MatFn b = [&](const Vec& z) -> Mat { return joint_parts(spec, t, z).J11; };
        return m0 * (divergence(a, x) - gamma_eff(spec, t, x).inverse() * divergence(b, x));
    };
    hm.matrices = [spec, S, S_fdr, m0](double t, const Vec& X) {
        Vec x = X.head(spec.dim);
        const JointParts p = joint_parts(spec, t, x);
        Mat ke(1, 1);
        ke(0, 0) = 0.5 * m0 * p.J11.trace();
        return std::map<std::string, Mat>{{"Gamma", p.Gamma},
                                          {"Sigma", p.Sigma},
                                          {"J11", p.J11},
                                          {"J21", p.J21},
                                          {"J31", p.J31},
                                          {"lambda", p.lambda},
                                          {"lambda_A", antisym(p.lambda)},
                                          {"kinetic_mean", ke},
                                          {"S", as_column(S(t, x))},
                                          {"S_fdr", as_column(S_fdr(t, x))}};
    };
    hm.dQ_anom = [](double, const Vec&, const Vec&) { return 0.0; };
    auto N = [spec](double t) {
        return [spec, t](const Vec& z) -> Mat { return antisym(joint_parts(spec, t, z).lambda); };
    };
    FieldFn f = fnc_field(spec), F = force_field(spec);
    hm.dW_anom = [f, N](double t, const Vec& x) { return closed_form_anomaly(f, N(t), t, x); };
    hm.dR_anom = [F, N](double t, const Vec& x) { return closed_form_anomaly(F, N(t), t, x); };
    hm.dW_anom_generic = generic_anomaly(spec, Procedure::joint, f);
    hm.dR_anom_generic = generic_anomaly(spec, Procedure::joint, F);
    hm.antisym_names = {"lambda_A"};
    return hm;
}

HomogenizedModel homogenize(const GleSpec& spec, Procedure p) {
    switch (p) {
        case Procedure::markov: return markovian_limit(spec);
        case Procedure::markov_then_mass: return markov_then_mass(spec);
        case Procedure::mass: return mass_limit(spec);
        case Procedure::mass_then_markov: return mass_then_markov(spec);
        case Procedure::joint: return joint_limit(spec);
        case Procedure::none: break;
    }
    fail(ErrorKind::config, "homogenize: procedure 'none' has no limit model");
}

namespace {

double entry_max(const Mat& A) { return A.size() == 0 ? 0.0 : A.cwiseAbs().maxCoeff(); }

bool all_diagonal(const GleSpec& s, const std::vector<Vec>& grid) {
    auto diag = [](const Mat& A) { return A.rows() != A.cols() || A.size() == 0 || A.isDiagonal(0.0); };
    for (const NoiseTriple* tr : {&s.memory, &s.fast_noise})
        if (!diag(tr->Gamma) || !diag(tr->M) || !diag(tr->C)) return false;
    for (const Vec& p : grid)
        for (const MatrixField* f : {&s.gamma0, &s.g, &s.h, &s.sigma_f})
            if (f->cols > 0 && !diag((*f)(0.0, p))) return false;
    return true;
}

}  // namespace

AnomalyReport anomaly_report(const HomogenizedModel& model, const std::vector<Vec>& grid) {
    AnomalyReport rep;
    rep.procedure = to_string(model.procedure);
    const GleSpec& s = model.spec;
    const Eigen::Index nX = model.limit.nX;
    std::map<std::string, double> scale;
    for (const Vec& p : grid) {
        Vec X = Vec::Zero(nX);
        X.head(s.dim) = p;
        auto mats = model.matrices(0.0, X);
        for (const auto& name : model.antisym_names) {
            const Mat& A = mats.at(name);
            rep.sup_norms[name] = std::max(rep.sup_norms[name], entry_max(A));
            std::string full = name.substr(0, name.size() - 2);
            double sc = mats.count(full) ? entry_max(mats.at(full)) : entry_max(A);
            scale[name] = std::max(scale[name], sc);
        }
        rep.noise_induced_sup = std::max(rep.noise_induced_sup, model.noise_induced(0.0, X).cwiseAbs().maxCoeff());
        // Onsager matrix of the fast block of the pre-limit arrangement
        EmbeddedSystem pre = embed(s, model.procedure, 1.0);
        Coefficients c;
        Vec Xp = Vec::Zero(pre.nX);
        Xp.head(s.dim) = p;
        pre.coeffs(0.0, Xp, c);
        if (c.U2.rows() > 0) rep.onsager_q_norm = std::max(rep.onsager_q_norm, entry_max(onsager_decompose(c.U2, c.sigma).Q));
    }
    const bool one_d = s.dim == 1;
    const bool diagonal = all_diagonal(s, grid);
    const FdrReport fdr = check_fdr(s);
    bool detailed_balance = true;
    if (!s.fast_noise.empty()) {
        const Mat& Gf = s.fast_noise.Gamma;
        detailed_balance = is_symmetric(Gf * s.fast_noise.Sigma * s.fast_noise.Sigma.transpose(), 1e-9);
    }
    for (const auto& name : model.antisym_names) {
        const bool zero = rep.sup_norms[name] < 1e-8 * std::max(1.0, scale[name]);
        rep.vanishing[name] = zero;
        std::ostringstream os;
        os << name << ": " << (zero ? "vanishes" : "non-zero") << " (sup " << rep.sup_norms[name] << ")";
        if (zero) {
            std::vector<std::string> why;
            if (one_d) why.push_back("1-D");
            if (diagonal) why.push_back("diagonal coefficients");
            if (detailed_balance && name == "Theta_A") why.push_back("detailed balance");
            if (fdr.fdr2) why.push_back("FDR");
            if (why.empty()) why.push_back("no listed sufficient condition");
            os << "; conditions:";
            for (const auto& w : why) os << " " << w << ";";
        }
        rep.verdicts.push_back(os.str());
    }
    return rep;
}

}  // namespace glehomog
