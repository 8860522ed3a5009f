#include "glehomog/commands.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "glehomog/config.hpp"
#include "glehomog/errors.hpp"
#include "glehomog/harness.hpp"
#include "glehomog/homog.hpp"

namespace glehomog {

using nlohmann::ordered_json;
namespace fs = std::filesystem;

std::uint64_t fnv1a(const std::string& bytes) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

namespace {

std::string hex(std::uint64_t v) {
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << v;
    return os.str();
}

std::string cell(double v) { return std::isfinite(v) ? format_real(v) : "nan"; }

ordered_json mat_json(const Mat& M) {
    ordered_json a = ordered_json::array();
    for (Eigen::Index i = 0; i < M.rows(); ++i) {
        ordered_json r = ordered_json::array();
        for (Eigen::Index j = 0; j < M.cols(); ++j) r.push_back(M(i, j));
        a.push_back(r);
    }
    return a;
}

ordered_json vec_json(const Vec& v) {
    ordered_json a = ordered_json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
}

void write_file(const fs::path& p, const std::string& text) {
    std::ofstream f(p, std::ios::binary);
    if (!f) fail(ErrorKind::config, "cannot write " + p.string());
    f << text;
}

std::string read_file(const std::string& p) {
    std::ifstream f(p, std::ios::binary);
    if (!f) fail(ErrorKind::config, "cannot read config file " + p);
    std::ostringstream os;
    os << f.rdbuf();
    return os.str();
}

struct Run {
    ScenarioConfig cfg;
    fs::path dir;
    std::vector<std::string> outputs;
    ordered_json flags = ordered_json::object();

    void emit(const std::string& name, const std::string& text) {
        write_file(dir / name, text);
        outputs.push_back(name);
    }
    void emit_json(const std::string& name, const ordered_json& j) { emit(name, j.dump(2) + "\n"); }
};

ScenarioConfig resolve(const CommandOptions& opt, bool scenario_optional) {
    ScenarioConfig cfg;
    bool have = false;
    if (opt.config_path) {
        cfg = parse_config(read_file(*opt.config_path));
        have = true;
    }
    if (opt.scenario) {
        if (*opt.scenario == "custom" && !cfg.spec) fail(ErrorKind::config, "--scenario custom needs a config with a spec section");
        if (*opt.scenario != cfg.scenario) cfg.params.clear();
        cfg.scenario = *opt.scenario;
        if (cfg.scenario != "custom") cfg.spec.reset();
        scenario_param_names(cfg.scenario);
        have = true;
    }
    if (!have) {
        if (!scenario_optional) fail(ErrorKind::config, "give --config PATH or --scenario NAME");
        cfg.scenario = "magnetic";
    }
    if (opt.seed) cfg.seed = *opt.seed;
    if (opt.paths) cfg.ladder.paths = *opt.paths;
    if (opt.procedure) {
        procedure_from_string(*opt.procedure);
        cfg.procedure = *opt.procedure;
    }
    if (opt.eps) {
        if (opt.eps->empty()) fail(ErrorKind::config, "--eps needs at least one value");
        cfg.ladder.eps = *opt.eps;
        cfg.simulation.eps = opt.eps->front();
    }
    if (opt.T) cfg.simulation.T = cfg.ladder.T = *opt.T;
    if (opt.out) cfg.output = *opt.out;
    if (cfg.ladder.paths < 1) fail(ErrorKind::config, "--paths must be positive");
    return cfg;
}

FunctionalSet thermal_set(const GleSpec& spec) {
    const bool thermal = !spec.has_white_noise() && (spec.fnc_acts || spec.f_nc.zero);
    return thermal ? FunctionalSet::all() : FunctionalSet::no_kinetic();
}

void cmd_simulate(Run& run) {
    const ScenarioConfig& c = run.cfg;
    const GleSpec spec = build_spec(c);
    const Procedure p = procedure_from_string(c.procedure);
    const EmbeddedSystem sys = embed(spec, p, c.simulation.eps);
    const Scheme scheme = scheme_from_string(c.simulation.scheme);
    const double dt = c.simulation.dt > 0 ? c.simulation.dt : default_dt(scheme, c.simulation.eps);
    const long steps = std::lround(c.simulation.T / dt);
    if (steps < 1 || std::abs(steps * dt - c.simulation.T) > 1e-9 * c.simulation.T)
        fail(ErrorKind::config, "simulation.T is not a multiple of dt");
    const WienerPath path = generate_path(c.seed, 0, sys.noise.source_dims(), c.simulation.T, int(steps));
    const InitNormals init = draw_init(c.seed, 0, spec.fast_noise.state_dim(), spec.slow_noise.state_dim());
    const Trajectory tr = simulate(sys, path, init, SimOptions{scheme, dt, c.simulation.stride});
    const FunctionalSet which = thermal_set(spec);
    const FunctionalLedger L = accumulate(tr, spec, which);

    const int d = spec.dim;
    std::ostringstream os;
    os << "t";
    for (int i = 1; i <= d; ++i) os << ",x" << i;
    for (int i = 1; i <= d; ++i) os << ",v" << i;
    os << ",Q,W,E,S_area,B\n";
    const bool has_v = tr.find(BlockKind::v) != nullptr;
    for (size_t k = 0; k < tr.t.size(); ++k) {
        const Eigen::Index r = Eigen::Index(k);
        os << cell(tr.t[k]);
        const Vec x = tr.block(r, BlockKind::x);
        for (int i = 0; i < d; ++i) os << ',' << cell(x(i));
        const Vec v = has_v ? tr.block(r, BlockKind::v) : Vec(Vec::Constant(d, NAN));
        for (int i = 0; i < d; ++i) os << ',' << cell(v(i));
        os << ',' << (which.Q ? cell(L.Q[k]) : "nan") << ',' << cell(L.W[k]) << ',' << (which.E ? cell(L.E[k]) : "nan")
           << ',' << cell(L.area[k]) << ',' << cell(L.B[k]) << '\n';
    }
    run.emit("trajectory.csv", os.str());
}

ordered_json model_json(const HomogenizedModel& hm, const GleSpec& spec) {
    const AnomalyReport rep = anomaly_report(hm, spec.grid());
    ordered_json j;
    j["procedure"] = rep.procedure;
    j["sup_norms"] = rep.sup_norms;
    j["vanishing"] = rep.vanishing;
    j["verdicts"] = rep.verdicts;
    j["onsager_q_norm"] = rep.onsager_q_norm;
    j["noise_induced_sup"] = rep.noise_induced_sup;
    ordered_json pts = ordered_json::array();
    for (const Vec& x : spec.grid()) {
        Vec X = Vec::Zero(hm.limit.nX);
        X.head(spec.dim) = x;
        ordered_json p;
        p["x"] = vec_json(x);
        p["drift"] = vec_json(hm.drift_x(0.0, X));
        p["noise_induced"] = vec_json(hm.noise_induced(0.0, X));
        p["diffusion"] = mat_json(hm.diffusion_x(0.0, X));
        p["dW_anom"] = hm.dW_anom(0.0, X);
        p["dR_anom"] = hm.dR_anom(0.0, X);
        p["dW_anom_generic"] = hm.dW_anom_generic(0.0, X);
        p["dR_anom_generic"] = hm.dR_anom_generic(0.0, X);
        ordered_json m = ordered_json::object();
        for (const auto& [name, M] : hm.matrices(0.0, X)) m[name] = mat_json(M);
        p["matrices"] = m;
        pts.push_back(p);
    }
    j["grid"] = pts;
    return j;
}

ordered_json fdr_json(const GleSpec& spec) {
    const FdrReport f = check_fdr(spec);
    return ordered_json{{"fdr1", f.fdr1}, {"fdr2", f.fdr2}, {"details", f.details}};
}

void cmd_reduce(Run& run) {
    const GleSpec spec = build_spec(run.cfg);
    const Procedure p = procedure_from_string(run.cfg.procedure);
    if (p == Procedure::none) fail(ErrorKind::config, "reduce needs a procedure other than none");
    ordered_json j;
    j["scenario"] = spec.name;
    j["fdr"] = fdr_json(spec);
    j["model"] = model_json(homogenize(spec, p), spec);
    run.emit_json("reduce.json", j);
}

ordered_json report_json(const ConvergenceReport& r) {
    ordered_json j;
    j["scenario"] = r.scenario;
    j["procedure"] = r.procedure;
    j["seed"] = r.seed;
    j["dt"] = r.dt;
    j["T"] = r.T;
    ordered_json pts = ordered_json::array();
    for (const auto& p : r.points)
        pts.push_back({{"eps", p.eps}, {"n_paths", p.n_paths}, {"mean", p.mean}, {"stderr", p.stderr_}});
    j["points"] = pts;
    ordered_json rates = ordered_json::object();
    for (const auto& [k, f] : r.rates) rates[k] = {{"slope", f.slope}, {"intercept", f.intercept}, {"r2", f.r2}};
    j["rates"] = rates;
    j["notes"] = r.notes;
    return j;
}

void cmd_converge(Run& run) {
    const GleSpec spec = build_spec(run.cfg);
    const Procedure p = procedure_from_string(run.cfg.procedure);
    const EpsilonLadder ladder = build_ladder(run.cfg);
    const ConvergenceReport rc = run_convergence(spec, p, ladder);
    const ConvergenceReport rf = run_functional_convergence(spec, p, ladder);
    std::ostringstream os;
    os << "eps,block,mean_sup_err,stderr,n_paths\n";
    for (const ConvergenceReport* r : {&rc, &rf})
        for (const auto& pt : r->points)
            for (const auto& [key, m] : pt.mean)
                os << format_real(pt.eps) << ',' << key << ',' << cell(m) << ',' << cell(pt.stderr_.at(key)) << ','
                   << pt.n_paths << '\n';
    run.emit("convergence.csv", os.str());
    run.emit_json("convergence.json", ordered_json{{"trajectory", report_json(rc)}, {"functionals", report_json(rf)}});
}

void cmd_area(Run& run, const CommandOptions& opt) {
    const ScenarioConfig& c = run.cfg;
    const double omega = opt.omega ? *opt.omega : (c.params.count("omega") ? c.params.at("omega") : 1.0);
    const double dt = c.ladder.dt > 0 ? c.ladder.dt : 1e-3;
    run.flags["omega"] = omega;
    const AreaDemoReport r = area_anomaly_demo(omega, c.ladder.eps, c.ladder.paths, c.ladder.T, c.seed, dt);
    ordered_json j;
    j["omega"] = r.omega;
    j["T"] = r.T;
    j["seed"] = r.seed;
    j["paths"] = r.paths;
    j["dt"] = r.dt;
    j["predicted_limit_mean"] = r.predicted_limit_mean;
    j["anomaly_estimate"] = {{"mean", r.anomaly_estimate.mean}, {"stderr", r.anomaly_estimate.stderr_}};
    ordered_json pts = ordered_json::array();
    for (const auto& p : r.points)
        pts.push_back({{"eps", p.eps},
                       {"area_mean", p.area.mean},
                       {"area_stderr", p.area.stderr_},
                       {"limit_area_mean", p.limit_area.mean},
                       {"limit_area_stderr", p.limit_area.stderr_},
                       {"pathwise_anomaly_mean", p.pathwise.mean},
                       {"pathwise_anomaly_stderr", p.pathwise.stderr_}});
    j["points"] = pts;
    run.emit_json("area.json", j);
}

void cmd_commute(Run& run) {
    const GleSpec spec = build_spec(run.cfg);
    const CommutativityReport r = commutativity_probe(spec);
    run.emit_json("commute.json", ordered_json{{"scenario", spec.name},
                                               {"drift_sup", r.drift_sup},
                                               {"drift_sup_general", r.drift_sup_general},
                                               {"functional_sup", r.functional_sup},
                                               {"commuting_predicate", r.predicate},
                                               {"consistent", r.consistent},
                                               {"verdict", r.verdict}});
}

void cmd_report(Run& run) {
    const GleSpec spec = build_spec(run.cfg);
    ordered_json j;
    j["scenario"] = spec.name;
    j["dim"] = spec.dim;
    j["fdr"] = fdr_json(spec);
    ordered_json models = ordered_json::object();
    for (Procedure p : {Procedure::markov, Procedure::markov_then_mass, Procedure::mass, Procedure::mass_then_markov,
                        Procedure::joint}) {
        try {
            const HomogenizedModel hm = homogenize(spec, p);
            const AnomalyReport rep = anomaly_report(hm, spec.grid());
            models[to_string(p)] = {{"sup_norms", rep.sup_norms},
                                    {"vanishing", rep.vanishing},
                                    {"verdicts", rep.verdicts},
                                    {"onsager_q_norm", rep.onsager_q_norm},
                                    {"noise_induced_sup", rep.noise_induced_sup}};
        } catch (const Error& e) {
            models[to_string(p)] = {{"unavailable", e.what()}};
        }
    }
    j["procedures"] = models;
    run.emit_json("report.json", j);
}

int exit_code(ErrorKind k) { return k == ErrorKind::config || k == ErrorKind::dimension ? 2 : 3; }

}  // namespace

int run_command(const CommandOptions& opt, std::ostream& out, std::ostream& err) {
    try {
        const bool area = opt.command == "area-demo";
        Run run;
        run.cfg = resolve(opt, area);
        run.dir = run.cfg.output;
        fs::create_directories(run.dir);
        const std::string canonical = print_config(run.cfg);
        if (opt.command == "simulate")
            cmd_simulate(run);
        else if (opt.command == "reduce")
            cmd_reduce(run);
        else if (opt.command == "converge")
            cmd_converge(run);
        else if (area)
            cmd_area(run, opt);
        else if (opt.command == "commute-probe")
            cmd_commute(run);
        else if (opt.command == "report")
            cmd_report(run);
        else
            fail(ErrorKind::config, "unknown command '" + opt.command + "'");
        run.emit("config.yaml", canonical);
        ordered_json m;
        m["command"] = opt.command;
        m["config_hash"] = hex(fnv1a(canonical + run.flags.dump()));
        m["seed"] = run.cfg.seed;
        m["version"] = kVersion;
        m["flags"] = run.flags;
        m["outputs"] = run.outputs;
        write_file(run.dir / "manifest.json", m.dump(2) + "\n");
        out << opt.command << ": wrote";
        for (const auto& o : run.outputs) out << ' ' << (run.dir / o).string();
        out << '\n';
        return 0;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return exit_code(e.kind());
    } catch (const fs::filesystem_error& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 3;
    }
}

}  // namespace glehomog
