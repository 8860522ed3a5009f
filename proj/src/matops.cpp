#include "glehomog/matops.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <functional>
#include <sstream>

#include "glehomog/errors.hpp"

namespace glehomog {

namespace {

void require_square(const Mat& A, const char* who) {
    require_dims(A.rows() == A.cols(), std::string(who) + ": matrix is not square");
}

// Dense matrix of a linear map on rows x cols matrices, probed column by column.
Mat assemble_operator(Eigen::Index rows, Eigen::Index cols, const std::function<Mat(const Mat&)>& op) {
    const Eigen::Index n = rows * cols;
    Mat K(n, n);
    Mat E = Mat::Zero(rows, cols);
    for (Eigen::Index k = 0; k < n; ++k) {
        E(k % rows, k / rows) = 1.0;
        Mat image = op(E);
        K.col(k) = Eigen::Map<const Vec>(image.data(), n);
        E(k % rows, k / rows) = 0.0;
    }
    return K;
}

Mat solve_vectorized(const Mat& K, const Mat& rhs, const char* who, double* cond_out = nullptr) {
    Eigen::PartialPivLU<Mat> lu(K);
    const double rc = lu.rcond();
    const double cond = rc > 0 ? 1.0 / rc : INFINITY;
    if (cond_out) *cond_out = cond;
    if (!(cond <= kMaxCondition)) {
        std::ostringstream os;
        os << who << ": vectorized system is singular or ill-conditioned (condition " << cond << ")";
        fail(ErrorKind::numerical, os.str());
    }
    Vec b = Eigen::Map<const Vec>(rhs.data(), rhs.size());
    Vec x = lu.solve(b);
    return Eigen::Map<const Mat>(x.data(), rhs.rows(), rhs.cols());
}

double rel(const Mat& r, double scale) { return r.norm() / std::max(1.0, scale); }

}  // namespace

double min_real_eigenvalue(const Mat& A) {
    require_square(A, "min_real_eigenvalue");
    if (A.rows() == 0) return INFINITY;
    Eigen::EigenSolver<Mat> es(A, false);
    return es.eigenvalues().real().minCoeff();
}

bool is_positive_stable(const Mat& A, double tol) { return min_real_eigenvalue(A) > tol; }

Mat sym(const Mat& A) {
    require_square(A, "sym");
    return 0.5 * (A + A.transpose());
}

Mat antisym(const Mat& A) {
    require_square(A, "antisym");
    return 0.5 * (A - A.transpose());
}

bool is_symmetric(const Mat& A, double rel_tol) {
    require_square(A, "is_symmetric");
    return (A - A.transpose()).norm() <= rel_tol * std::max(1.0, A.norm());
}

double lyapunov_residual(const Mat& A, const Mat& J, const Mat& Q) {
    return rel(A * J + J * A.transpose() - Q, Q.norm());
}

double sylvester_residual(const Mat& A, const Mat& B, const Mat& X, const Mat& C) {
    return rel(A * X + X * B - C, C.norm());
}

Mat solve_lyapunov(const Mat& A, const Mat& Q) {
    require_square(A, "solve_lyapunov");
    require_dims(Q.rows() == A.rows() && Q.cols() == A.cols(), "solve_lyapunov: rhs shape mismatch");
    if (A.rows() == 0) return Mat(0, 0);
    if (!is_positive_stable(A)) fail(ErrorKind::numerical, "solve_lyapunov: matrix is not positive stable");
    if (!is_symmetric(Q)) fail(ErrorKind::numerical, "solve_lyapunov: right-hand side is not symmetric");
    Mat K = assemble_operator(A.rows(), A.cols(), [&](const Mat& X) -> Mat { return A * X + X * A.transpose(); });
    Mat J = solve_vectorized(K, Q, "solve_lyapunov");
    if (lyapunov_residual(A, J, Q) > kResidualTol) fail(ErrorKind::numerical, "solve_lyapunov: residual tolerance unmet");
    return J;
}

Mat solve_sylvester(const Mat& A, const Mat& B, const Mat& C) {
    require_square(A, "solve_sylvester");
    require_square(B, "solve_sylvester");
    require_dims(C.rows() == A.rows() && C.cols() == B.rows(), "solve_sylvester: rhs shape mismatch");
    if (C.size() == 0) return Mat::Zero(C.rows(), C.cols());
    Mat K = assemble_operator(C.rows(), C.cols(), [&](const Mat& X) -> Mat { return A * X + X * B; });
    Mat X = solve_vectorized(K, C, "solve_sylvester");
    if (sylvester_residual(A, B, X, C) > kResidualTol) fail(ErrorKind::numerical, "solve_sylvester: residual tolerance unmet");
    return X;
}

Mat joint_fast_generator(const CoupledFiveInput& in) {
    const auto d = in.gamma0.rows(), d1 = in.Gamma1.rows(), df = in.Gammaf.rows();
    Mat U = Mat::Zero(d + d1 + df, d + d1 + df);
    U.block(0, 0, d, d) = in.gamma0 / in.m0;
    if (d1 > 0) {
        U.block(0, d, d, d1) = in.g * in.C1 / in.m0;
        U.block(d, 0, d1, d) = -in.M1 * in.C1.transpose() * in.h;
        U.block(d, d, d1, d1) = in.Gamma1;
    }
    if (df > 0) {
        U.block(0, d + d1, d, df) = -in.sigma_f * in.Cf / in.m0;
        U.block(d + d1, d + d1, df, df) = in.Gammaf;
    }
    return U;
}

std::array<double, 5> coupled_five_residuals(const CoupledFiveInput& in, const CoupledFiveSolution& s) {
    const Mat& g0 = in.gamma0;
    const double m0 = in.m0;
    auto r = [](const Mat& lhs, const Mat& rhs) {
        return (lhs - rhs).norm() / std::max(1.0, std::max(lhs.norm(), rhs.norm()));
    };
    Mat J21 = s.J12.transpose();
    std::array<double, 5> out{};
    out[0] = r(g0 * s.J11 + s.J11 * g0.transpose() + in.g * in.C1 * J21 + s.J12 * in.C1.transpose() * in.g.transpose(),
               in.sigma_f * in.Cf * s.J13.transpose() + s.J13 * in.Cf.transpose() * in.sigma_f.transpose());
    out[1] = r(m0 * s.J11 * in.h.transpose() * in.C1 * in.M1 + in.sigma_f * in.Cf * s.J23.transpose(),
               in.g * in.C1 * s.J22 + m0 * s.J12 * in.Gamma1.transpose() + g0 * s.J12);
    out[2] = r(g0 * s.J13 + in.g * in.C1 * s.J23 + m0 * s.J13 * in.Gammaf.transpose(), in.sigma_f * in.Cf * in.Mf);
    out[3] = r(in.M1 * in.C1.transpose() * in.h * s.J12 + J21 * in.h.transpose() * in.C1 * in.M1,
               in.Gamma1 * s.J22 + s.J22 * in.Gamma1.transpose());
    out[4] = r(in.M1 * in.C1.transpose() * in.h * s.J13, in.Gamma1 * s.J23 + s.J23 * in.Gammaf.transpose());
    return out;
}

CoupledFiveSolution solve_coupled_five(const CoupledFiveInput& in) {
    const auto d = in.gamma0.rows(), d1 = in.Gamma1.rows(), df = in.Gammaf.rows();
    require_dims(in.gamma0.cols() == d && in.g.rows() == d && in.h.cols() == d && in.sigma_f.rows() == d,
                 "solve_coupled_five: force-space dimensions disagree");
    require_dims(in.C1.cols() == d1 && in.Cf.cols() == df && in.g.cols() == in.C1.rows() &&
                     in.h.rows() == in.C1.rows() && in.sigma_f.cols() == in.Cf.rows(),
                 "solve_coupled_five: triple dimensions disagree");
    if (!(in.m0 > 0)) fail(ErrorKind::numerical, "solve_coupled_five: m0 must be positive");
    Mat U = joint_fast_generator(in);
    if (!is_positive_stable(U)) fail(ErrorKind::numerical, "solve_coupled_five: fast block is not positive stable");
    const auto n = U.rows();
    Mat Q = Mat::Zero(n, n);
    if (df > 0) Q.block(d + d1, d + d1, df, df) = in.Gammaf * in.Mf + in.Mf * in.Gammaf.transpose();
    Mat K = assemble_operator(n, n, [&](const Mat& X) -> Mat { return U * X + X * U.transpose(); });
    CoupledFiveSolution s;
    Mat J = solve_vectorized(K, Q, "solve_coupled_five", &s.condition);
    s.J11 = J.block(0, 0, d, d);
    s.J12 = J.block(0, d, d, d1);
    s.J13 = J.block(0, d + d1, d, df);
    s.J22 = J.block(d, d, d1, d1);
    s.J23 = J.block(d, d + d1, d1, df);
    s.residuals = coupled_five_residuals(in, s);
    for (double r : s.residuals)
        if (!(r < 1e-9)) fail(ErrorKind::numerical, "solve_coupled_five: residual tolerance unmet");
    return s;
}

OnsagerDecomposition onsager_decompose(const Mat& U2, const Mat& sigma) {
    require_dims(sigma.rows() == U2.rows(), "onsager_decompose: sigma rows must match U2");
    OnsagerDecomposition o;
    o.D = sigma * sigma.transpose();
    o.J = solve_lyapunov(U2, o.D);
    o.L = U2 * o.J;
    o.Q = antisym(o.L);
    Eigen::PartialPivLU<Mat> lu(U2);
    o.mu = lu.solve(o.J);
    o.nu = lu.solve(sigma);
    return o;
}

Mat expm(const Mat& A) {
    require_square(A, "expm");
    if (A.rows() == 0) return A;
    return A.exp();
}

}  // namespace glehomog
