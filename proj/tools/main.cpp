#include <iostream>

#include <CLI11.hpp>

#include "glehomog/commands.hpp"

int main(int argc, char** argv) {
    CLI::App app{"GLE homogenization toolkit"};
    app.require_subcommand(1);
    app.set_version_flag("--version", glehomog::kVersion);
    glehomog::CommandOptions opt;

    std::string config, scenario, out, procedure;
    std::uint64_t seed = 0;
    int paths = 0;
    std::vector<double> eps;
    double omega = 0, T = 0;

    for (const char* name : {"simulate", "reduce", "converge", "area-demo", "commute-probe", "report"}) {
        CLI::App* sub = app.add_subcommand(name);
        sub->add_option("--config", config, "Scenario config file")->check(CLI::ExistingFile);
        sub->add_option("--scenario", scenario, "Registry scenario name");
        sub->add_option("--seed", seed, "Master seed");
        sub->add_option("--paths", paths, "Monte Carlo path count");
        sub->add_option("--out", out, "Output directory");
        sub->add_option("--procedure", procedure, "Homogenization procedure");
        sub->add_option("--eps", eps, "Eps values, decreasing")->delimiter(',');
        sub->add_option("--omega", omega, "Magnetic field strength (area-demo)");
        sub->add_option("--T", T, "Time horizon");
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }
    CLI::App* sub = app.get_subcommands().front();
    opt.command = sub->get_name();
    auto given = [sub](const char* flag) { return sub->count(flag) > 0; };
    if (given("--config")) opt.config_path = config;
    if (given("--scenario")) opt.scenario = scenario;
    if (given("--seed")) opt.seed = seed;
    if (given("--paths")) opt.paths = paths;
    if (given("--out")) opt.out = out;
    if (given("--procedure")) opt.procedure = procedure;
    if (given("--eps")) opt.eps = eps;
    if (given("--omega")) opt.omega = omega;
    if (given("--T")) opt.T = T;
    return glehomog::run_command(opt, std::cout, std::cerr);
}
