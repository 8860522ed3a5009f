#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "glehomog/commands.hpp"
#include "glehomog/config.hpp"
#include "glehomog/errors.hpp"
#include "glehomog/expr.hpp"
#include "glehomog/harness.hpp"

namespace py = pybind11;
using namespace glehomog;

namespace {

using Params = std::map<std::string, double>;

GleSpec spec_of(const std::string& name, const Params& params) { return scenario(name, ScenarioParams{params}); }

py::dict stats(const MeanStderr& m) {
    py::dict d;
    d["mean"] = m.mean;
    d["stderr"] = m.stderr_;
    return d;
}

py::dict convergence_dict(const ConvergenceReport& r) {
    py::list points;
    for (const auto& p : r.points) {
        py::dict d;
        d["eps"] = p.eps;
        d["mean"] = p.mean;
        d["stderr"] = p.stderr_;
        d["n_paths"] = p.n_paths;
        points.append(d);
    }
    py::dict rates;
    for (const auto& [k, f] : r.rates) rates[py::str(k)] = py::make_tuple(f.slope, f.intercept, f.r2);
    py::dict out;
    out["scenario"] = r.scenario;
    out["procedure"] = r.procedure;
    out["dt"] = r.dt;
    out["T"] = r.T;
    out["points"] = points;
    out["rates"] = rates;
    out["notes"] = r.notes;
    return out;
}

EpsilonLadder ladder_of(std::vector<double> eps, int paths, double T, std::uint64_t seed, const std::string& scheme) {
    EpsilonLadder l;
    l.values = std::move(eps);
    l.paths = paths;
    l.T = T;
    l.seed = seed;
    l.scheme = scheme_from_string(scheme);
    return l;
}

}  // namespace

PYBIND11_MODULE(_glehomog, m) {
    m.doc() = "GLE homogenization toolkit";
    m.attr("__version__") = kVersion;

    py::register_exception<Error>(m, "GleError", PyExc_RuntimeError);

    m.def("solve_lyapunov", &solve_lyapunov, py::arg("A"), py::arg("Q"), "Solve A J + J A^T = Q.");
    m.def("solve_sylvester", &solve_sylvester, py::arg("A"), py::arg("B"), py::arg("C"), "Solve A X + X B = C.");
    m.def("expm", &expm, py::arg("A"));
    m.def("onsager", [](const Mat& U2, const Mat& sigma) {
        OnsagerDecomposition o = onsager_decompose(U2, sigma);
        py::dict d;
        d["J"] = o.J;
        d["L"] = o.L;
        d["D"] = o.D;
        d["Q"] = o.Q;
        d["mu"] = o.mu;
        d["nu"] = o.nu;
        return d;
    }, py::arg("U2"), py::arg("sigma"));

    m.def("eval_expr", [](const std::string& text, const Vec& x, double t, const Params& params) {
        return parse_expr(text, params).eval(t, x);
    }, py::arg("text"), py::arg("x") = Vec(), py::arg("t") = 0.0, py::arg("params") = Params{});
    m.def("canonical_config", [](const std::string& text) { return print_config(parse_config(text)); }, py::arg("text"));

    m.def("scenario_names", &scenario_names);
    m.def("scenario_param_names", &scenario_param_names, py::arg("name"));
    m.def("fdr", [](const std::string& name, const Params& params) {
        FdrReport r = check_fdr(spec_of(name, params));
        return py::make_tuple(r.fdr1, r.fdr2);
    }, py::arg("name"), py::arg("params") = Params{});

    m.def("anomaly_report", [](const std::string& name, const Params& params, const std::string& procedure) {
        GleSpec s = spec_of(name, params);
        AnomalyReport r = anomaly_report(homogenize(s, procedure_from_string(procedure)), s.grid());
        py::dict d;
        d["procedure"] = r.procedure;
        d["sup_norms"] = r.sup_norms;
        d["vanishing"] = r.vanishing;
        d["verdicts"] = r.verdicts;
        d["onsager_q_norm"] = r.onsager_q_norm;
        d["noise_induced_sup"] = r.noise_induced_sup;
        return d;
    }, py::arg("name"), py::arg("params"), py::arg("procedure"));

    m.def("simulate", [](const std::string& name, const Params& params, const std::string& procedure, double eps, double T,
                         std::uint64_t seed, std::uint64_t path, const std::string& scheme) {
        GleSpec s = spec_of(name, params);
        const Procedure p = procedure_from_string(procedure);
        const Scheme sc = scheme_from_string(scheme);
        EmbeddedSystem sys = embed(s, p, eps);
        const double dt = default_dt(resolve_scheme(sc, eps), eps);
        Trajectory tr;
        {
            py::gil_scoped_release nogil;
            WienerPath w = generate_path(seed, path, sys.noise.source_dims(), T, int(std::lround(T / dt)));
            InitNormals xi = draw_init(seed, path, s.fast_noise.state_dim(), s.slow_noise.state_dim());
            tr = simulate(sys, w, xi, SimOptions{sc, dt, 1});
        }
        py::dict blocks;
        for (const auto& b : tr.blocks) blocks[py::str(to_string(b.kind))] = py::make_tuple(tr.z_offset(b.kind), b.dim);
        return py::make_tuple(tr.t, tr.Z, blocks);
    }, py::arg("name"), py::arg("params"), py::arg("procedure") = "none", py::arg("eps") = 0.05, py::arg("T") = 1.0,
       py::arg("seed") = 1, py::arg("path") = 0, py::arg("scheme") = "auto");

    m.def("convergence", [](const std::string& name, const Params& params, const std::string& procedure,
                            std::vector<double> eps, int paths, double T, std::uint64_t seed, const std::string& scheme,
                            bool functionals) {
        GleSpec s = spec_of(name, params);
        EpsilonLadder l = ladder_of(std::move(eps), paths, T, seed, scheme);
        ConvergenceReport r;
        {
            py::gil_scoped_release nogil;
            r = functionals ? run_functional_convergence(s, procedure_from_string(procedure), l)
                            : run_convergence(s, procedure_from_string(procedure), l);
        }
        return convergence_dict(r);
    }, py::arg("name"), py::arg("params"), py::arg("procedure"), py::arg("eps"), py::arg("paths") = 100,
       py::arg("T") = 1.0, py::arg("seed") = 1, py::arg("scheme") = "auto", py::arg("functionals") = false);

    m.def("area_demo", [](double omega, std::vector<double> eps, int paths, double T, std::uint64_t seed, bool with_limit) {
        AreaDemoReport r;
        {
            py::gil_scoped_release nogil;
            r = area_anomaly_demo(omega, eps, paths, T, seed, 1e-3, with_limit);
        }
        py::list pts;
        for (const auto& p : r.points) {
            py::dict d;
            d["eps"] = p.eps;
            d["area"] = stats(p.area);
            if (with_limit) {
                d["limit_area"] = stats(p.limit_area);
                d["pathwise"] = stats(p.pathwise);
            }
            pts.append(d);
        }
        py::dict d;
        d["predicted_limit_mean"] = r.predicted_limit_mean;
        d["points"] = pts;
        d["anomaly_estimate"] = stats(r.anomaly_estimate);
        return d;
    }, py::arg("omega") = 1.0, py::arg("eps") = std::vector<double>{0.05}, py::arg("paths") = 1000, py::arg("T") = 1.0,
       py::arg("seed") = 1, py::arg("with_limit") = false);

    m.def("commutativity_probe", [](const std::string& name, const Params& params) {
        CommutativityReport r = commutativity_probe(spec_of(name, params));
        py::dict d;
        d["drift_sup"] = r.drift_sup;
        d["drift_sup_general"] = r.drift_sup_general;
        d["functional_sup"] = r.functional_sup;
        d["predicate"] = r.predicate;
        d["consistent"] = r.consistent;
        d["verdict"] = r.verdict;
        return d;
    }, py::arg("name"), py::arg("params") = Params{});

    m.def("green_kubo_mu", [](const Mat& U2, const Mat& sigma, int paths, double T, double dt, std::uint64_t seed) {
        GreenKuboReport r;
        {
            py::gil_scoped_release nogil;
            r = green_kubo_mu(U2, sigma, paths, T, dt, seed);
        }
        py::dict d;
        d["mu"] = r.mu_exact;
        d["mu_finite_T"] = r.mu_finite_T;
        d["mean"] = r.mean;
        d["stderr"] = r.stderr_;
        d["max_z"] = r.max_z;
        return d;
    }, py::arg("U2"), py::arg("sigma"), py::arg("paths"), py::arg("T"), py::arg("dt"), py::arg("seed") = 1);

    // Same entry point as the command-line tool; returns (exit code, stdout, stderr).
    m.def("run_command", [](const std::string& command, std::optional<std::string> config,
                            std::optional<std::string> scenario_name, std::optional<std::string> out,
                            std::optional<std::string> procedure, std::optional<std::uint64_t> seed,
                            std::optional<int> paths, std::optional<std::vector<double>> eps,
                            std::optional<double> omega, std::optional<double> T) {
        CommandOptions o;
        o.command = command;
        o.config_path = config;
        o.scenario = scenario_name;
        o.out = out;
        o.procedure = procedure;
        o.seed = seed;
        o.paths = paths;
        o.eps = eps;
        o.omega = omega;
        o.T = T;
        std::ostringstream so, se;
        int code;
        {
            py::gil_scoped_release nogil;
            code = run_command(o, so, se);
        }
        return py::make_tuple(code, so.str(), se.str());
    }, py::arg("command"), py::arg("config") = py::none(), py::arg("scenario") = py::none(), py::arg("out") = py::none(),
       py::arg("procedure") = py::none(), py::arg("seed") = py::none(), py::arg("paths") = py::none(),
       py::arg("eps") = py::none(), py::arg("omega") = py::none(), py::arg("T") = py::none());
}
