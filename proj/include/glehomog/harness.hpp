#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "glehomog/engine.hpp"
#include "glehomog/homog.hpp"

namespace glehomog {

struct EpsilonLadder {
    std::vector<double> values;  // strictly decreasing
    int paths = 100;
    std::uint64_t seed = 1;
    double T = 1.0;
    Scheme scheme = Scheme::automatic;
    double dt = 0.0;  // 0: smallest default step over the ladder

    void validate() const;
    double common_dt() const;
};

struct LadderPoint {
    double eps = 0.0;
    std::map<std::string, double> mean, stderr_;
    int n_paths = 0;
};

struct RateFit {
    double slope = 0.0, intercept = 0.0, r2 = 0.0;
};

struct ConvergenceReport {
    std::string scenario, procedure;
    std::uint64_t seed = 0;
    double dt = 0.0, T = 0.0;
    std::vector<LadderPoint> points;
    std::map<std::string, RateFit> rates;
    std::vector<std::string> notes;
};

RateFit fit_rate(const std::vector<double>& eps, const std::vector<double>& errors);

// Mean and standard error with an order independent summation.
struct MeanStderr {
    double mean = 0.0, stderr_ = 0.0;
};
MeanStderr mean_stderr(std::vector<double> values);

ConvergenceReport run_convergence(const GleSpec& spec, Procedure procedure, const EpsilonLadder& ladder);

// Keys: W, R (and Q when defined) with the closed-form anomaly, *_noanom without it, W_generic and
// R_generic with the generic-reducer anomaly; suffix _T marks terminal rather than sup errors.
// B_literal integrates |B - Tr J|, B_centered is sup_t |int (B - Tr J / 2)|.
ConvergenceReport run_functional_convergence(const GleSpec& spec, Procedure procedure, const EpsilonLadder& ladder);

struct AreaDemoPoint {
    double eps = 0.0;
    MeanStderr area, limit_area, pathwise;
};

struct AreaDemoReport {
    double omega = 0.0, T = 0.0;
    std::uint64_t seed = 0;
    int paths = 0;
    double dt = 0.0;
    double predicted_limit_mean = 0.0;
    std::vector<AreaDemoPoint> points;
    // Mean area at the smallest eps; the Levy area itself has mean zero.
    MeanStderr anomaly_estimate;
};

AreaDemoReport area_anomaly_demo(double omega, const std::vector<double>& eps, int paths, double T, std::uint64_t seed,
                                 double dt = 1e-3, bool with_limit = true);

struct CommutativityReport {
    double drift_sup = 0.0;          // from the closed-form procedure formulas
    double drift_sup_general = 0.0;  // from reduce_general on both embeddings
    double functional_sup = 0.0;
    bool predicate = false;          // scalar spec obeying the second FDR
    bool consistent = true;
    std::string verdict;
};

CommutativityReport commutativity_probe(const GleSpec& spec);

struct GreenKuboReport {
    Mat mu_exact, mu_finite_T, mean, stderr_;
    double max_z = 0.0;  // max |mean - mu_finite_T| / stderr
};

GreenKuboReport green_kubo_mu(const Mat& U2, const Mat& sigma, int paths, double T, double dt, std::uint64_t seed);

}  // namespace glehomog
