#pragma once

#include <Eigen/Dense>
#include <array>

namespace glehomog {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

inline constexpr double kStabilityTol = 1e-10;
inline constexpr double kSymmetryTol = 1e-10;
inline constexpr double kMaxCondition = 1e12;
inline constexpr double kResidualTol = 1e-10;

double min_real_eigenvalue(const Mat& A);
bool is_positive_stable(const Mat& A, double tol = kStabilityTol);

Mat sym(const Mat& A);
Mat antisym(const Mat& A);
bool is_symmetric(const Mat& A, double rel_tol = kSymmetryTol);

// AJ + JA^T = Q
Mat solve_lyapunov(const Mat& A, const Mat& Q);
// AX + XB = C
Mat solve_sylvester(const Mat& A, const Mat& B, const Mat& C);

double lyapunov_residual(const Mat& A, const Mat& J, const Mat& Q);
double sylvester_residual(const Mat& A, const Mat& B, const Mat& X, const Mat& C);

// Coefficients of the five coupled equations for the joint limit at one point.
struct CoupledFiveInput {
    Mat gamma0, g, h, sigma_f;
    Mat Gamma1, M1, C1;
    Mat Gammaf, Mf, Cf;
    double m0 = 1.0;
};

struct CoupledFiveSolution {
    Mat J11, J12, J13, J22, J23;
    std::array<double, 5> residuals{};
    double condition = 0.0;
};

// Block generator of the fast (v, y, beta_f) dynamics and its noise input.
Mat joint_fast_generator(const CoupledFiveInput& in);
std::array<double, 5> coupled_five_residuals(const CoupledFiveInput& in, const CoupledFiveSolution& s);
CoupledFiveSolution solve_coupled_five(const CoupledFiveInput& in);

struct OnsagerDecomposition {
    Mat L, D, Q, nu, mu, J;
};

OnsagerDecomposition onsager_decompose(const Mat& U2, const Mat& sigma);

Mat expm(const Mat& A);

}  // namespace glehomog
