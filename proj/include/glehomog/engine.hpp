#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "glehomog/model.hpp"

namespace glehomog {

// Independent substream keyed by (seed, path, block).
class KeyedRng {
public:
    KeyedRng(std::uint64_t seed, std::uint64_t path, std::uint64_t block);
    double normal() { return dist_(engine_); }

private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> dist_;
};

// Stream ids below are offsets added to the per-coordinate block ids of the noise sources.
inline constexpr std::uint64_t kInitBlock = 1u << 20;
inline constexpr std::uint64_t kAuxBlock = 1u << 21;

struct WienerPath {
    std::uint64_t seed = 0, path = 0;
    std::vector<int> source_dims;
    double T = 1.0;
    int base_steps = 1;
    int level = 0;
    Mat inc;  // steps x dims

    int dims() const { return int(inc.cols()); }
    int steps() const { return int(inc.rows()); }
    double dt() const { return T / steps(); }
};

WienerPath generate_path(std::uint64_t seed, std::uint64_t path, const std::vector<int>& source_dims, double T,
                         int base_steps, int levels = 0);
WienerPath refine(const WienerPath& p);
WienerPath coarsen(const WienerPath& p);

InitNormals draw_init(std::uint64_t seed, std::uint64_t path, Eigen::Index df, Eigen::Index ds);

enum class Scheme { euler_maruyama, exp_ou_splitting, automatic };

std::string to_string(Scheme s);
Scheme scheme_from_string(const std::string& s);
Scheme resolve_scheme(Scheme s, double eps);
double default_dt(Scheme s, double eps);

struct Trajectory {
    std::vector<double> t;
    Mat Z;  // records x z_dim
    std::vector<BlockInfo> blocks;
    double eps = 1.0;
    double mass = 1.0;

    Eigen::Index z_offset(BlockKind k) const;
    const BlockInfo* find(BlockKind k) const;
    Vec block(Eigen::Index row, BlockKind k) const;
    // Squared norm of the fast components of a record.
    double fast_sq(Eigen::Index row) const;
};

struct SimOptions {
    Scheme scheme = Scheme::automatic;
    double dt = 0.0;  // 0 selects the default rule
    int stride = 0;   // 0 selects the default rule
};

Trajectory simulate(const EmbeddedSystem& sys, const WienerPath& path, const InitNormals& init, const SimOptions& opt);

struct FunctionalSet {
    bool Q = true, W = true, R = true, E = true, S_env = true, area = true, B = true;
    static FunctionalSet all() { return {}; }
    static FunctionalSet no_kinetic() { return {false, true, true, false, false, true, true}; }
};

struct FunctionalLedger {
    std::vector<double> t, Q, W, R, E, S_env, area, B;
    FunctionalSet which;
};

FunctionalLedger accumulate(const Trajectory& tr, const GleSpec& spec, const FunctionalSet& which);

// Sum over steps of p(t_mid, x_mid) (x_{k+1} - x_k) using the x block.
Vec stratonovich_integral(const MatrixField& p, const Trajectory& tr);
double sup_distance(const Trajectory& a, const Trajectory& b, BlockKind block);

// Worker count from GLEHOMOG_THREADS, defaulting to hardware concurrency.
int worker_count();
// Runs fn(i) for i in [0, n) over worker threads; results must be written by index.
void parallel_for(int n, const std::function<void(int)>& fn);

}  // namespace glehomog
