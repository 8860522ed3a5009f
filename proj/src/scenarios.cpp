#include <cmath>

#include "glehomog/errors.hpp"
#include "glehomog/model.hpp"

namespace glehomog {

namespace {

Mat rot2() {
    Mat J(2, 2);
    J << 0, -1, 1, 0;
    return J;
}

GleSpec blank(const std::string& name, int d) {
    GleSpec s;
    s.name = name;
    s.dim = d;
    s.gamma0 = MatrixField::zero(d, d);
    s.sigma0 = MatrixField::zero(d, 0);
    s.potential = ScalarField::zero_field();
    s.f_nc = VectorField::zero_field(d);
    s.memory = empty_triple(0);
    s.fast_noise = empty_triple(0);
    s.slow_noise = empty_triple(0);
    s.g = MatrixField::zero(d, 0);
    s.h = MatrixField::zero(0, d);
    s.sigma_f = MatrixField::zero(d, 0);
    s.sigma_s = MatrixField::zero(d, 0);
    s.x0 = Vec::Zero(d);
    s.v0 = Vec::Zero(d);
    s.box_lo = Vec::Constant(d, -1.0);
    s.box_hi = Vec::Constant(d, 1.0);
    return s;
}

// Exponential kernel (alpha/2) e^{-alpha|t|} in every coordinate.
NoiseTriple exp_triple(int d, double alpha) {
    Mat I = Mat::Identity(d, d);
    return make_triple(alpha * I, I, alpha * I);
}

MatrixField scalar_times_identity(int d, std::function<double(double, const Vec&)> f) {
    MatrixField m;
    m.rows = m.cols = d;
    m.diagonal = true;
    m.eval = [d, f](double t, const Vec& x) { return Mat(f(t, x) * Mat::Identity(d, d)); };
    return m;
}

GleSpec magnetic(const ScenarioParams& p) {
    const double omega = p.get("omega", 1.0);
    GleSpec s = blank("magnetic", 2);
    s.mass = p.get("mass", 1.0);
    Mat A = Mat::Identity(2, 2) + omega * rot2();
    s.gamma0 = MatrixField::constant_field(A);
    s.sigma0 = MatrixField::constant_field(A);
    s.f_nc.zero = false;
    s.f_nc.eval = [](double, const Vec& x) {
        Vec f(2);
        f << -0.5 * x(1), 0.5 * x(0);
        return f;
    };
    s.fnc_acts = p.get("fnc_acts", 0.0) != 0.0;
    return s;
}

// Charged particle with colored noise and a position dependent field B(x) along e3.
GleSpec magnetic_colored(const ScenarioParams& p) {
    const double q = p.get("charge", 1.0), b0 = p.get("B0", 1.0), kT = p.get("kT", 1.0), alpha = p.get("alpha", 1.0);
    GleSpec s = blank("magnetic", 2);
    s.mass = p.get("mass", 1.0);
    s.gamma0.constant = false;
    s.gamma0.eval = [q, b0](double, const Vec& x) { return Mat(-q * b0 * 0.5 * (1.0 + std::tanh(x(0))) * rot2()); };
    s.memory = exp_triple(2, alpha);
    s.fast_noise = exp_triple(2, alpha);
    Mat I = Mat::Identity(2, 2);
    s.g = MatrixField::constant_field(I);
    s.h = MatrixField::constant_field(I);
    s.sigma_f = MatrixField::constant_field(std::sqrt(kT) * I);
    return s;
}

GleSpec temperature_gradient(const ScenarioParams& p) {
    const int d = int(p.get("dim", 2));
    const double T0 = p.get("T0", 1.0), T1 = p.get("T1", 0.0), g0 = p.get("gamma", 1.0), g1 = p.get("gamma_slope", 0.0);
    const double alpha = p.get("alpha", 1.0), k = p.get("k", 0.0);
    // twist mixes coordinates in g = h^T; rate_split spreads the triple rates; fast_skew rotates Gamma_f (2-D).
    const double twist = p.get("twist", 0.0), split = p.get("rate_split", 0.0), skew = p.get("fast_skew", 0.0);
    GleSpec s = blank("temperature_gradient", d);
    s.mass = p.get("mass", 1.0);
    auto gam = [g0, g1](const Vec& x) { return g0 * (1.0 + g1 * std::tanh(x(0))); };
    auto temp = [T0, T1](const Vec& x) { return T0 * (1.0 + T1 * std::tanh(x(0))); };
    Vec rates(d);
    for (int i = 0; i < d; ++i) rates(i) = alpha * (1.0 + split * i);
    Mat R = rates.asDiagonal();
    s.memory = make_triple(R, Mat::Identity(d, d), R);
    Mat Rf = R;
    if (skew != 0.0) {
        if (d != 2) fail(ErrorKind::config, "temperature_gradient: fast_skew needs dim = 2");
        Rf += skew * alpha * rot2();
    }
    s.fast_noise = make_triple(Rf, Mat::Identity(d, d), R);
    Mat N = Mat::Zero(d, d);
    for (int i = 0; i + 1 < d; ++i) N(i, i + 1) = N(i + 1, i) = 1.0;
    auto shape = [d, twist, N](const Vec& x) -> Mat {
        return Mat::Identity(d, d) + twist * std::tanh(x(0)) * N;
    };
    s.g.rows = s.g.cols = d;
    s.g.eval = [gam, shape](double, const Vec& x) { return Mat(std::sqrt(gam(x)) * shape(x)); };
    s.h.rows = s.h.cols = d;
    s.h.eval = [gam, shape](double, const Vec& x) { return Mat(std::sqrt(gam(x)) * shape(x).transpose()); };
    s.sigma_f.rows = s.sigma_f.cols = d;
    s.sigma_f.eval = [gam, temp, shape](double, const Vec& x) { return Mat(std::sqrt(temp(x) * gam(x)) * shape(x)); };
    const bool still = g1 == 0.0 && twist == 0.0;
    s.g.constant = s.h.constant = still;
    s.sigma_f.constant = still && T1 == 0.0;
    s.g.diagonal = s.h.diagonal = s.sigma_f.diagonal = twist == 0.0;
    if (k != 0.0) {
        s.potential.zero = false;
        s.potential.eval = [k](double, const Vec& x) { return 0.5 * k * x.squaredNorm(); };
    }
    return s;
}

GleSpec active_matter(const ScenarioParams& p) {
    const int d = int(p.get("dim", 2));
    const double sp = p.get("sigma_p", 1.0), kT = p.get("kT", 1.0), alpha = p.get("alpha", 1.0);
    const double a0 = p.get("active", 0.5), a1 = p.get("active_slope", 0.0), rate = p.get("active_rate", 0.2);
    GleSpec s = blank("active_matter", d);
    s.mass = p.get("mass", 1.0);
    s.gamma0 = MatrixField::zero(d, d);
    Mat I = Mat::Identity(d, d);
    s.memory = exp_triple(d, alpha);
    s.fast_noise = exp_triple(d, alpha);
    s.g = MatrixField::constant_field(sp * I);
    s.h = MatrixField::constant_field(sp * I);
    s.sigma_f = MatrixField::constant_field(std::sqrt(kT) * sp * I);
    s.slow_noise = make_triple(rate * I, I, std::sqrt(2.0 * rate) * I);
    s.sigma_s = scalar_times_identity(d, [a0, a1](double, const Vec& x) { return a0 * (1.0 + a1 * std::tanh(x(0))); });
    if (a1 == 0.0) s.sigma_s.constant = true;
    return s;
}

GleSpec diagonal_nd(const ScenarioParams& p) {
    const int d = int(p.get("dim", 2));
    const bool varying = p.get("state_dependent", 1.0) != 0.0;
    const double gam = p.get("gamma0", 1.0), k = p.get("k", 0.0), amp = p.get("amplitude", 0.3);
    GleSpec s = blank("diagonal_nd", d);
    s.mass = p.get("mass", 1.0);
    Vec rates(d), gdiag(d), sdiag(d);
    for (int i = 0; i < d; ++i) {
        rates(i) = 1.0 + 0.5 * i;
        gdiag(i) = 1.0 + 0.25 * i;
        sdiag(i) = 1.0 + 0.1 * i;
    }
    Mat R = rates.asDiagonal();
    s.memory = make_triple(R, Mat::Identity(d, d), R);
    s.fast_noise = make_triple(R, Mat::Identity(d, d), R);
    s.gamma0 = MatrixField::constant_field(gam * Mat::Identity(d, d));
    auto diag_field = [d, varying, amp](Vec base, int phase) {
        MatrixField m;
        m.rows = m.cols = d;
        m.diagonal = true;
        m.constant = !varying;
        m.eval = [d, varying, amp, base, phase](double, const Vec& x) {
            Mat D = Mat::Zero(d, d);
            for (int i = 0; i < d; ++i)
                D(i, i) = base(i) * (varying ? 1.0 + amp * std::sin(x(i) + phase) : 1.0);
            return D;
        };
        return m;
    };
    s.g = diag_field(gdiag, 0);
    s.h = diag_field(gdiag, 0);
    s.sigma_f = diag_field(sdiag, 1);
    if (k != 0.0) {
        s.potential.zero = false;
        s.potential.eval = [k](double, const Vec& x) { return 0.5 * k * x.squaredNorm(); };
    }
    return s;
}

}  // namespace

std::vector<std::string> scenario_names() {
    return {"magnetic", "temperature_gradient", "active_matter", "diagonal_nd", "custom"};
}

std::vector<std::string> scenario_param_names(const std::string& name) {
    if (name == "magnetic") return {"omega", "mass", "fnc_acts", "colored", "charge", "B0", "kT", "alpha"};
    if (name == "temperature_gradient")
        return {"dim", "T0", "T1", "gamma", "gamma_slope", "alpha", "k", "twist", "rate_split", "fast_skew", "mass"};
    if (name == "active_matter") return {"dim", "sigma_p", "kT", "alpha", "active", "active_slope", "active_rate", "mass"};
    if (name == "diagonal_nd") return {"dim", "state_dependent", "gamma0", "k", "amplitude", "mass"};
    if (name == "custom") return {};
    fail(ErrorKind::config, "unknown scenario '" + name + "'");
}

GleSpec scenario(const std::string& name, const ScenarioParams& params) {
    GleSpec s;
    if (name == "magnetic")
        s = params.get("colored", 0.0) != 0.0 ? magnetic_colored(params) : magnetic(params);
    else if (name == "temperature_gradient")
        s = temperature_gradient(params);
    else if (name == "active_matter")
        s = active_matter(params);
    else if (name == "diagonal_nd")
        s = diagonal_nd(params);
    else if (name == "custom")
        fail(ErrorKind::config, "scenario 'custom' needs an inline spec section");
    else
        fail(ErrorKind::config, "unknown scenario '" + name + "'");
    validate_spec(s);
    return s;
}

}  // namespace glehomog
