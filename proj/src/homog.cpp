#include "glehomog/homog.hpp"

#include <cmath>

#include "glehomog/errors.hpp"

namespace glehomog {

Mat partial(const MatFn& f, const Vec& x, Eigen::Index k) {
    const double h = fd_step(x(k));
    Vec xp = x, xm = x;
    xp(k) += h;
    xm(k) -= h;
    return (f(xp) - f(xm)) / (xp(k) - xm(k));
}

Vec divergence(const MatFn& f, const Vec& x) {
    Vec out;
    for (Eigen::Index j = 0; j < x.size(); ++j) {
        Mat dj = partial(f, x, j);
        if (j == 0) out = Vec::Zero(dj.rows());
        require_dims(dj.cols() == x.size(), "divergence: column count must equal the state dimension");
        out += dj.col(j);
    }
    return out;
}

Vec divergence(const MatrixField& field, double t, const Vec& x) {
    require_dims(field.cols == x.size(), "divergence: column count must equal the state dimension");
    Vec out = Vec::Zero(field.rows);
    if (field.constant) return out;
    for (Eigen::Index j = 0; j < x.size(); ++j) out += field.derivative(t, x, int(j)).col(j);
    return out;
}

namespace {

Vec eval_vec(const VectorField& f, double t, const Vec& X) { return f(t, X); }

Mat right_solve(const Mat& A, const Mat& U2) {
    // A U2^{-1}
    return U2.transpose().partialPivLu().solve(A.transpose()).transpose();
}

// 1/2 Q^{lp} [G_l, G_p] with brackets from directional central differences.
Vec bracket_drift(const MatFn& G, const Mat& Q, const Vec& X) {
    Mat G0 = G(X);
    const Eigen::Index n = G0.rows(), m = G0.cols();
    std::vector<Mat> D(m);  // D[l].col(p) = (G_l . grad) G_p
    for (Eigen::Index l = 0; l < m; ++l) {
        const double nl = G0.col(l).norm();
        if (nl == 0.0) {
            D[l] = Mat::Zero(n, m);
            continue;
        }
        const double h = 1e-5 * std::max(1.0, X.norm()) / nl;
        D[l] = (G(X + h * G0.col(l)) - G(X - h * G0.col(l))) / (2.0 * h);
    }
    Vec H = Vec::Zero(n);
    for (Eigen::Index l = 0; l < m; ++l)
        for (Eigen::Index p = 0; p < m; ++p)
            if (Q(l, p) != 0.0) H += 0.5 * Q(l, p) * (D[l].col(p) - D[p].col(l));
    return H;
}

}  // namespace

SlowFastSystem slow_fast_view(const EmbeddedSystem& sys) {
    SlowFastSystem s;
    auto field = [&sys](Eigen::Index r, Eigen::Index c, Mat Coefficients::*member) {
        MatrixField f;
        f.rows = r;
        f.cols = c;
        f.eval = [sys, member](double t, const Vec& X) {
            Coefficients c;
            sys.coeffs(t, X, c);
            return Mat(c.*member);
        };
        return f;
    };
    auto vfield = [&sys](Eigen::Index n, Vec Coefficients::*member) {
        VectorField f;
        f.dim = n;
        f.eval = [sys, member](double t, const Vec& X) {
            Coefficients c;
            sys.coeffs(t, X, c);
            return Vec(c.*member);
        };
        return f;
    };
    const auto nW = sys.noise.total();
    s.U1 = field(sys.nX, sys.nY, &Coefficients::U1);
    s.U2 = field(sys.nY, sys.nY, &Coefficients::U2);
    s.sigma_tilde = field(sys.nX, nW, &Coefficients::sigma_tilde);
    s.sigma = field(sys.nY, nW, &Coefficients::sigma);
    s.u1 = vfield(sys.nX, &Coefficients::u1);
    s.u2 = vfield(sys.nY, &Coefficients::u2);
    s.P = MatrixField::zero(0, sys.nX);
    s.r = VectorField::zero_field(0);
    return s;
}

GeneralReduction reduce_general(const SlowFastSystem& sys, double t, const Vec& X) {
    GeneralReduction out;
    const Mat U1 = sys.U1(t, X), U2 = sys.U2(t, X), sig = sys.sigma(t, X), sigt = sys.sigma_tilde(t, X);
    if (!is_positive_stable(U2)) fail(ErrorKind::numerical, "reduce_general: U2 is not positive stable");
    auto Jf = [&](const Vec& Z) {
        Mat s = sys.sigma(t, Z);
        return solve_lyapunov(sys.U2(t, Z), s * s.transpose());
    };
    auto Gf = [&](const Vec& Z) { return right_solve(sys.U1(t, Z), sys.U2(t, Z)); };
    out.J = Jf(X);
    out.mu = U2.partialPivLu().solve(out.J);
    out.Q = antisym(U2 * out.J);
    out.trJ = out.J.trace();
    const Mat G = Gf(X);

    MatFn GJU = [&](const Vec& Z) -> Mat { return Gf(Z) * Jf(Z) * sys.U1(t, Z).transpose(); };
    MatFn JU = [&](const Vec& Z) -> Mat { return Jf(Z) * sys.U1(t, Z).transpose(); };
    out.S_ito = divergence(GJU, X) - G * divergence(JU, X);
    out.drift = eval_vec(sys.u1, t, X) + G * eval_vec(sys.u2, t, X) + out.S_ito;
    out.diffusion = sigt + G * sig;

    MatFn Sig = [&](const Vec& Z) -> Mat { return sys.sigma_tilde(t, Z) + Gf(Z) * sys.sigma(t, Z); };
    out.ito_to_strat = Vec::Zero(X.size());
    for (Eigen::Index k = 0; k < X.size(); ++k) out.ito_to_strat += 0.5 * partial(Sig, X, k) * out.diffusion.row(k).transpose();

    const Mat GQ = G * out.Q;
    out.H_str_index = Vec::Zero(X.size());
    for (Eigen::Index k = 0; k < X.size(); ++k) out.H_str_index += partial(Gf, X, k) * GQ.row(k).transpose();
    out.H_str_bracket = bracket_drift(Gf, out.Q, X);

    const Eigen::Index l = sys.P.rows;
    out.functional_ito = Vec::Zero(l);
    out.functional_ito_free = Vec::Zero(l);
    out.functional_strat = Vec::Zero(l);
    if (l > 0) {
        const Mat M = U1 * out.mu * U1.transpose();
        for (Eigen::Index j = 0; j < X.size(); ++j) out.functional_ito += sys.P.derivative(t, X, int(j)) * M.col(j);
        out.functional_strat = functional_strat_drift(sys, t, X);
        auto Mf = [&](const Vec& Z) -> Mat {
            Mat u = sys.U1(t, Z), s = sys.sigma(t, Z), u2 = sys.U2(t, Z);
            return u * u2.partialPivLu().solve(solve_lyapunov(u2, s * s.transpose())) * u.transpose();
        };
        MatFn PM = [&](const Vec& Z) -> Mat { return sys.P(t, Z) * Mf(Z); };
        out.functional_ito_free = divergence(PM, X) - sys.P(t, X) * divergence(MatFn(Mf), X);
    }
    return out;
}

Vec functional_strat_drift(const SlowFastSystem& sys, double t, const Vec& X) {
    const Eigen::Index l = sys.P.rows;
    Vec out = Vec::Zero(l);
    if (l == 0) return out;
    const Mat U1 = sys.U1(t, X), U2 = sys.U2(t, X), sig = sys.sigma(t, X), sigt = sys.sigma_tilde(t, X);
    const Mat mu = U2.partialPivLu().solve(solve_lyapunov(U2, sig * sig.transpose()));
    const Mat MA = U1 * antisym(mu) * U1.transpose();
    const Mat D = sigt * sigt.transpose();
    for (Eigen::Index j = 0; j < X.size(); ++j) {
        Mat dP = sys.P.derivative(t, X, int(j));
        out += dP * MA.col(j) - 0.5 * dP * D.col(j);
    }
    return out;
}

namespace {

struct AlphaParts {
    MatFn G;
    Mat Q;
};

AlphaParts alpha_parts(const MatrixField& A1, const MatrixField& A2, const MatrixField& Sigma2, double alpha, double t,
                       const Vec& X) {
    if (alpha < 0.0 || alpha > 1.0) fail(ErrorKind::config, "drift_alpha: alpha must lie in [0, 1]");
    const Mat a2 = A2(t, X), s2 = Sigma2(t, X);
    if (!is_positive_stable(-a2)) fail(ErrorKind::numerical, "drift_alpha: A2 is not Hurwitz");
    const Mat J = solve_lyapunov(-a2, s2 * s2.transpose());
    AlphaParts p;
    p.Q = alpha * J * a2.transpose() - (1.0 - alpha) * a2 * J;
    p.G = [&A1, &A2, t](const Vec& Z) -> Mat { return right_solve(A1(t, Z), A2(t, Z)); };
    return p;
}

}  // namespace

Vec drift_alpha(const MatrixField& A1, const MatrixField& A2, const MatrixField& Sigma2, double alpha, double t,
                const Vec& X) {
    AlphaParts p = alpha_parts(A1, A2, Sigma2, alpha, t, X);
    return bracket_drift(p.G, p.Q, X);
}

Vec drift_alpha_index(const MatrixField& A1, const MatrixField& A2, const MatrixField& Sigma2, double alpha, double t,
                      const Vec& X) {
    AlphaParts p = alpha_parts(A1, A2, Sigma2, alpha, t, X);
    const Mat GQ = p.G(X) * p.Q;
    Vec H = Vec::Zero(X.size());
    for (Eigen::Index l = 0; l < X.size(); ++l) H += partial(p.G, X, l) * GQ.row(l).transpose();
    return H;
}

}  // namespace glehomog
