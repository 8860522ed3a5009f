#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "glehomog/model.hpp"

namespace glehomog {

using MatFn = std::function<Mat(const Vec&)>;
using VecFn = std::function<Vec(const Vec&)>;

// Row-wise divergence (div A)^i = sum_j dA^{ij}/dx^j.
Vec divergence(const MatrixField& field, double t, const Vec& x);
Vec divergence(const MatFn& f, const Vec& x);
// d f / d x^k by central differences.
Mat partial(const MatFn& f, const Vec& x, Eigen::Index k);

struct SlowFastSystem {
    MatrixField U1, U2, sigma_tilde, sigma, P;
    VectorField u1, u2, r;
};

SlowFastSystem slow_fast_view(const EmbeddedSystem& sys);

struct GeneralReduction {
    Vec drift;            // u1 + U1 U2^{-1} u2 + S_Ito
    Vec S_ito;
    Mat diffusion;        // sigma_tilde + U1 U2^{-1} sigma
    Mat J, mu, Q;
    double trJ = 0.0;
    Vec functional_ito;   // index form of the Ito functional drift
    Vec functional_ito_free;  // index-free form of the same
    Vec functional_strat; // drift of the Stratonovich functional
    Vec ito_to_strat;     // c = 1/2 d(Sigma)^{ij}/dX^k Sigma^{kj}
    Vec H_str_index;      // dG^{ip}/dX^k G^{kl} Q^{lp}
    Vec H_str_bracket;    // 1/2 Q^{lp} [G_l, G_p] by directional differences
};

GeneralReduction reduce_general(const SlowFastSystem& sys, double t, const Vec& X);
// Stratonovich functional drift in index form alone (cheaper than reduce_general).
Vec functional_strat_drift(const SlowFastSystem& sys, double t, const Vec& X);

// Lie-bracket drift for the alpha convention, A2 = -U2, G = A1 A2^{-1}.
Vec drift_alpha(const MatrixField& A1, const MatrixField& A2, const MatrixField& Sigma2, double alpha, double t,
                const Vec& X);
// Index form dG^{ij}/dX^l G^{lq} Q(alpha)^{qj}.
Vec drift_alpha_index(const MatrixField& A1, const MatrixField& A2, const MatrixField& Sigma2, double alpha, double t,
                      const Vec& X);

struct HomogenizedModel {
    Procedure procedure = Procedure::none;
    GleSpec spec;
    EmbeddedSystem limit;  // pure slow system
    std::function<Vec(double, const Vec&)> drift_x;
    std::function<Vec(double, const Vec&)> noise_induced;
    std::function<Mat(double, const Vec&)> diffusion_x;
    std::function<std::map<std::string, Mat>(double, const Vec&)> matrices;
    // Anomalous functional drift rates.
    std::function<double(double, const Vec&, const Vec&)> dQ_anom;
    std::function<double(double, const Vec&)> dW_anom, dR_anom;
    // Same drifts from the generic reducer applied to the pre-limit embedding.
    std::function<double(double, const Vec&)> dW_anom_generic, dR_anom_generic;
    std::vector<std::string> antisym_names;
};

HomogenizedModel markovian_limit(const GleSpec& spec);
HomogenizedModel markov_then_mass(const GleSpec& spec);
HomogenizedModel mass_limit(const GleSpec& spec);
HomogenizedModel mass_then_markov(const GleSpec& spec);
HomogenizedModel joint_limit(const GleSpec& spec);
HomogenizedModel homogenize(const GleSpec& spec, Procedure p);

// Reduced (x, z) system for an FDR spec in the small mass limit, z = beta_f - y.
struct MassFdrReduced {
    Vec dx, dz;
};
MassFdrReduced mass_limit_fdr_reduced(const GleSpec& spec, double t, const Vec& x, const Vec& z);

struct AnomalyReport {
    std::string procedure;
    std::map<std::string, double> sup_norms;
    std::map<std::string, bool> vanishing;
    std::vector<std::string> verdicts;
    double onsager_q_norm = 0.0;
    double noise_induced_sup = 0.0;
};

AnomalyReport anomaly_report(const HomogenizedModel& model, const std::vector<Vec>& grid);

}  // namespace glehomog
