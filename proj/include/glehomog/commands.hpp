#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace glehomog {

inline constexpr const char* kVersion = "0.1.0";

struct CommandOptions {
    std::string command;  // simulate, reduce, converge, area-demo, commute-probe, report
    std::optional<std::string> config_path, scenario, out, procedure;
    std::optional<std::uint64_t> seed;
    std::optional<int> paths;
    std::optional<std::vector<double>> eps;
    std::optional<double> omega, T;
};

// Returns the process exit code: 0 success, 2 configuration error, 3 numerical failure or refusal.
int run_command(const CommandOptions& opt, std::ostream& out, std::ostream& err);

std::uint64_t fnv1a(const std::string& bytes);

}  // namespace glehomog
