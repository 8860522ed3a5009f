#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "glehomog/harness.hpp"
#include "glehomog/model.hpp"

namespace glehomog {

// A coefficient field: either one expression times the identity, or a full matrix of expressions.
struct FieldConfig {
    bool scalar = false;
    std::vector<std::vector<std::string>> entries;
};

struct TripleConfig {
    Mat Gamma, C, Sigma;
};

struct SpecConfig {
    int dim = 1;
    double mass = 1.0, beta = 1.0;
    std::map<std::string, double> params;
    std::string potential;            // empty means zero
    std::vector<std::string> f_nc;    // empty means zero
    bool fnc_acts = true;
    std::map<std::string, FieldConfig> fields;  // gamma0, sigma0, g, h, sigma_f, sigma_s
    std::optional<TripleConfig> memory, fast_noise, slow_noise;
    std::vector<double> x0, v0, box_lo, box_hi;
    int grid_n = 3;
};

struct SimulationConfig {
    double eps = 0.05, T = 1.0, dt = 0.0;
    std::string scheme = "auto";
    int stride = 0;
};

struct LadderConfig {
    std::vector<double> eps{0.2, 0.1, 0.05, 0.02};
    int paths = 100;
    double T = 1.0, dt = 0.0;
    std::string scheme = "auto";
};

struct ScenarioConfig {
    std::string scenario = "custom";
    std::map<std::string, double> params;  // registry parameters
    std::optional<SpecConfig> spec;        // inline spec for scenario custom
    std::string procedure = "none";
    std::uint64_t seed = 1;
    std::string output = "out";
    SimulationConfig simulation;
    LadderConfig ladder;
};

// Errors carry "line L, column C" of the offending node.
ScenarioConfig parse_config(const std::string& text);
std::string print_config(const ScenarioConfig& cfg);

GleSpec build_spec(const ScenarioConfig& cfg);
EpsilonLadder build_ladder(const ScenarioConfig& cfg);

// Canonical decimal text for reals; '.' separator regardless of locale.
std::string format_real(double v);

}  // namespace glehomog
