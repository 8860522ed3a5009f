#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "glehomog/matops.hpp"

namespace glehomog {

struct NoiseTriple {
    Mat Gamma, M, C, Sigma;

    Eigen::Index state_dim() const { return Gamma.rows(); }
    Eigen::Index noise_dim() const { return Sigma.cols(); }
    Eigen::Index out_dim() const { return C.rows(); }
    bool empty() const { return Gamma.rows() == 0; }
};

// M is obtained from Gamma M + M Gamma^T = Sigma Sigma^T.
NoiseTriple make_triple(const Mat& Gamma, const Mat& C, const Mat& Sigma);
NoiseTriple empty_triple(Eigen::Index out_dim);
void validate_triple(const NoiseTriple& tr, const std::string& name);
Mat kernel_eval(const NoiseTriple& tr, double t);
Mat k_matrix(const NoiseTriple& tr);
NoiseTriple transform_triple(const NoiseTriple& tr, const Mat& T);

double fd_step(double xk);

struct MatrixField {
    Eigen::Index rows = 0, cols = 0;
    std::function<Mat(double, const Vec&)> eval;
    std::function<Mat(double, const Vec&, int)> jacobian;
    bool constant = false;
    bool diagonal = false;

    Mat operator()(double t, const Vec& x) const { return eval(t, x); }
    Mat derivative(double t, const Vec& x, int k) const;

    static MatrixField constant_field(const Mat& A);
    static MatrixField zero(Eigen::Index r, Eigen::Index c);
};

struct ScalarField {
    std::function<double(double, const Vec&)> eval;
    bool zero = false;
    double operator()(double t, const Vec& x) const { return zero ? 0.0 : eval(t, x); }
    Vec gradient(double t, const Vec& x) const;
    static ScalarField zero_field();
};

struct VectorField {
    Eigen::Index dim = 0;
    std::function<Vec(double, const Vec&)> eval;
    bool zero = false;
    Vec operator()(double t, const Vec& x) const { return zero ? Vec::Zero(dim) : eval(t, x); }
    static VectorField zero_field(Eigen::Index d);
};

struct GleSpec {
    std::string name = "custom";
    int dim = 1;
    double mass = 1.0;
    double beta = 1.0;
    MatrixField gamma0, g, h, sigma0, sigma_s, sigma_f;
    ScalarField potential;
    VectorField f_nc;
    // When false f_nc only defines the work functional and does not act on the particle.
    bool fnc_acts = true;
    NoiseTriple memory, slow_noise, fast_noise;
    Vec x0, v0;
    Vec box_lo, box_hi;
    int grid_n = 3;

    Vec force(double t, const Vec& x) const;
    std::vector<Vec> grid() const;
    bool has_white_noise() const;
};

void validate_spec(const GleSpec& spec);

struct FdrReport {
    bool fdr1 = false, fdr2 = false;
    std::string details;
};

FdrReport check_fdr(const GleSpec& spec);

enum class Procedure { none, markov, markov_then_mass, mass, mass_then_markov, joint };

std::string to_string(Procedure p);
Procedure procedure_from_string(const std::string& s);

enum class BlockKind { x, v, y, beta_f, beta_s };

std::string to_string(BlockKind k);

struct BlockInfo {
    BlockKind kind;
    Eigen::Index dim;
    bool fast;
    Eigen::Index offset;  // inside X or Y
};

struct NoiseLayout {
    Eigen::Index d0 = 0, qf = 0, qs = 0;
    Eigen::Index total() const { return d0 + qf + qs; }
    Eigen::Index off_f() const { return d0; }
    Eigen::Index off_s() const { return d0 + qf; }
    std::vector<int> source_dims() const { return {int(d0), int(qf), int(qs)}; }
};

// dX = (U1 Y + u1) dt + sigma_tilde dW,  eps dY = (-U2 Y + u2) dt + sigma dW.
struct Coefficients {
    Mat U1, sigma_tilde, U2, sigma;
    Vec u1, u2;
};

struct InitNormals {
    Vec beta_f, beta_s;
};

struct EmbeddedSystem {
    Procedure procedure = Procedure::none;
    double eps = 1.0;
    double mass = 1.0;
    Eigen::Index nX = 0, nY = 0;
    NoiseLayout noise;
    std::vector<BlockInfo> blocks;
    std::function<void(double, const Vec&, Coefficients&)> coeffs;
    // U2 and sigma independent of (t, X).
    bool fast_constant = false;
    Vec x0, v0;
    Mat chol_beta_f, chol_beta_s;

    const BlockInfo* find(BlockKind k) const;
    Eigen::Index z_dim() const { return nX + nY; }
    Eigen::Index z_offset(BlockKind k) const;
    Vec assemble(const Vec& X, const Vec& Y) const;
    void split(const Vec& z, Vec& X, Vec& Y) const;
    void initial_state(const InitNormals& xi, Vec& X, Vec& Y) const;
    // Full drift and diffusion of z, 1/eps included.
    Vec drift(double t, const Vec& z) const;
    Mat diffusion(double t, const Vec& z) const;
};

EmbeddedSystem embed(const GleSpec& spec, Procedure procedure, double eps);

struct ScenarioParams {
    std::map<std::string, double> values;
    double get(const std::string& key, double fallback) const;
};

GleSpec scenario(const std::string& name, const ScenarioParams& params);
std::vector<std::string> scenario_names();
std::vector<std::string> scenario_param_names(const std::string& name);

}  // namespace glehomog
