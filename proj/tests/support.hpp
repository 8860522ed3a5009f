#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "glehomog/engine.hpp"
#include "glehomog/homog.hpp"
#include "glehomog/matops.hpp"
#include "glehomog/model.hpp"

namespace testsupport {

using glehomog::Mat;
using glehomog::Vec;

inline Mat kron(const Mat& A, const Mat& B) {
    Mat K(A.rows() * B.rows(), A.cols() * B.cols());
    for (Eigen::Index i = 0; i < A.rows(); ++i)
        for (Eigen::Index j = 0; j < A.cols(); ++j) K.block(i * B.rows(), j * B.cols(), B.rows(), B.cols()) = A(i, j) * B;
    return K;
}

inline Vec vec(const Mat& A) { return Eigen::Map<const Vec>(A.data(), A.size()); }

inline Mat unvec(const Vec& v, Eigen::Index r, Eigen::Index c) { return Eigen::Map<const Mat>(v.data(), r, c); }

// Dense oracle for A X + X B = C.
inline Mat kron_sylvester(const Mat& A, const Mat& B, const Mat& C) {
    Mat K = kron(Mat::Identity(B.rows(), B.rows()), A) + kron(B.transpose(), Mat::Identity(A.rows(), A.rows()));
    return unvec(K.fullPivLu().solve(vec(C)), C.rows(), C.cols());
}

inline Mat kron_lyapunov(const Mat& A, const Mat& Q) { return kron_sylvester(A, A.transpose(), Q); }

inline double max_abs(const Mat& A) { return A.size() == 0 ? 0.0 : A.cwiseAbs().maxCoeff(); }

struct Rng {
    std::mt19937_64 eng;
    std::normal_distribution<double> n{0.0, 1.0};
    std::uniform_real_distribution<double> u{0.0, 1.0};
    explicit Rng(std::uint64_t seed) : eng(seed) {}
    double normal() { return n(eng); }
    double uniform() { return u(eng); }
    Mat gauss(Eigen::Index r, Eigen::Index c) {
        Mat A(r, c);
        for (Eigen::Index j = 0; j < c; ++j)
            for (Eigen::Index i = 0; i < r; ++i) A(i, j) = normal();
        return A;
    }
    // Random matrix shifted until every eigenvalue has real part at least margin.
    Mat stable(Eigen::Index n, double margin = 0.5) {
        Mat A = gauss(n, n);
        double m = glehomog::min_real_eigenvalue(A);
        return A + (margin - m + uniform()) * Mat::Identity(n, n);
    }
};

// |E_T - E_0 - W_T - Q_T| / max(1, |E_T|) over every record.
inline double first_law_gap(const glehomog::FunctionalLedger& L) {
    double worst = 0.0;
    for (std::size_t k = 0; k < L.t.size(); ++k) {
        const double gap = std::abs(L.E[k] - L.E[0] - L.W[k] - L.Q[k]) / std::max(1.0, std::abs(L.E[k]));
        worst = std::max(worst, gap);
    }
    return worst;
}

inline glehomog::GleSpec named(const std::string& name, std::map<std::string, double> values) {
    return glehomog::scenario(name, glehomog::ScenarioParams{std::move(values)});
}

}  // namespace testsupport
