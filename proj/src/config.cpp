#include "glehomog/config.hpp"

#include <algorithm>
#include <charconv>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "glehomog/errors.hpp"
#include "glehomog/expr.hpp"

namespace glehomog {

std::string format_real(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    std::string s(buf, res.ptr);
    if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
    return s;
}

namespace {

const std::vector<std::string> kFieldNames{"gamma0", "sigma0", "g", "h", "sigma_f", "sigma_s"};

std::string where(const YAML::Mark& m) {
    std::ostringstream os;
    os << "line " << m.line + 1 << ", column " << m.column + 1;
    return os.str();
}

[[noreturn]] void fail_at(const YAML::Node& n, const std::string& msg, ErrorKind kind = ErrorKind::config) {
    fail(kind, "config: " + msg + " at " + where(n.Mark()));
}

void check_keys(const YAML::Node& n, const std::set<std::string>& allowed, const std::string& section) {
    if (!n.IsMap()) fail_at(n, "section '" + section + "' must be a mapping");
    for (auto it = n.begin(); it != n.end(); ++it) {
        const std::string key = it->first.Scalar();
        if (!allowed.count(key)) fail_at(it->first, "unknown key '" + key + "' in " + section);
    }
}

double as_real(const YAML::Node& n) {
    if (!n.IsScalar()) fail_at(n, "expected a number");
    const std::string& s = n.Scalar();
    double v = 0;
    const char* b = s.data();
    const char* e = b + s.size();
    if (!s.empty() && *b == '+') ++b;
    auto res = std::from_chars(b, e, v);
    if (res.ec != std::errc() || res.ptr != e) fail_at(n, "expected a number, got '" + s + "'");
    return v;
}

long long as_int(const YAML::Node& n) {
    const double v = as_real(n);
    if (v != double(static_cast<long long>(v))) fail_at(n, "expected an integer");
    return static_cast<long long>(v);
}

bool as_bool(const YAML::Node& n) {
    if (!n.IsScalar()) fail_at(n, "expected true or false");
    const std::string& s = n.Scalar();
    if (s == "true") return true;
    if (s == "false") return false;
    fail_at(n, "expected true or false, got '" + s + "'");
}

std::string as_string(const YAML::Node& n) {
    if (!n.IsScalar()) fail_at(n, "expected a string");
    return n.Scalar();
}

std::vector<double> as_reals(const YAML::Node& n) {
    if (!n.IsSequence()) fail_at(n, "expected a list of numbers");
    std::vector<double> v;
    for (const auto& e : n) v.push_back(as_real(e));
    return v;
}

Mat as_matrix(const YAML::Node& n) {
    if (!n.IsSequence()) fail_at(n, "expected a nested list of numbers");
    const Eigen::Index r = Eigen::Index(n.size());
    Eigen::Index c = -1;
    Mat M;
    for (Eigen::Index i = 0; i < r; ++i) {
        const YAML::Node row = n[size_t(i)];
        if (!row.IsSequence()) fail_at(row, "expected a row list");
        if (c < 0) {
            c = Eigen::Index(row.size());
            M.resize(r, c);
        }
        if (Eigen::Index(row.size()) != c) fail_at(row, "rows of unequal length", ErrorKind::dimension);
        for (Eigen::Index j = 0; j < c; ++j) M(i, j) = as_real(row[size_t(j)]);
    }
    if (r == 0) M.resize(0, 0);
    return M;
}

void check_expr(const YAML::Node& n, const std::string& text, const std::map<std::string, double>& params, int dim) {
    try {
        const FieldExpr e = parse_expr(text, params);
        if (e.coord_count() > dim) fail_at(n, "expression '" + text + "' refers beyond x" + std::to_string(dim));
    } catch (const Error& err) {
        if (err.kind() == ErrorKind::config && std::string(err.what()).rfind("config:", 0) == 0) throw;
        fail_at(n, err.what());
    }
}

FieldConfig as_field(const YAML::Node& n, const std::map<std::string, double>& params, int dim) {
    FieldConfig f;
    if (n.IsScalar()) {
        f.scalar = true;
        check_expr(n, n.Scalar(), params, dim);
        f.entries = {{n.Scalar()}};
        return f;
    }
    if (!n.IsSequence()) fail_at(n, "expected an expression or a nested list of expressions");
    size_t cols = 0;
    for (size_t i = 0; i < n.size(); ++i) {
        const YAML::Node row = n[i];
        if (!row.IsSequence()) fail_at(row, "expected a row list");
        if (i == 0) cols = row.size();
        if (row.size() != cols) fail_at(row, "rows of unequal length", ErrorKind::dimension);
        std::vector<std::string> r;
        for (const auto& e : row) {
            check_expr(e, as_string(e), params, dim);
            r.push_back(e.Scalar());
        }
        f.entries.push_back(r);
    }
    return f;
}

TripleConfig as_triple(const YAML::Node& n, const std::string& name) {
    check_keys(n, {"Gamma", "C", "Sigma"}, name);
    for (const char* k : {"Gamma", "C", "Sigma"})
        if (!n[k]) fail_at(n, name + " needs key '" + k + "'");
    TripleConfig t{as_matrix(n["Gamma"]), as_matrix(n["C"]), as_matrix(n["Sigma"])};
    if (t.Gamma.rows() != t.Gamma.cols()) fail_at(n["Gamma"], name + ".Gamma must be square", ErrorKind::dimension);
    if (t.C.cols() != t.Gamma.rows()) fail_at(n["C"], name + ".C must have as many columns as Gamma", ErrorKind::dimension);
    if (t.Sigma.rows() != t.Gamma.rows()) fail_at(n["Sigma"], name + ".Sigma must have as many rows as Gamma", ErrorKind::dimension);
    return t;
}

SpecConfig as_spec(const YAML::Node& n) {
    check_keys(n, {"dim", "mass", "beta", "params", "potential", "f_nc", "fnc_acts", "gamma0", "sigma0", "g", "h", "sigma_f",
                   "sigma_s", "memory", "fast_noise", "slow_noise", "x0", "v0", "box_lo", "box_hi", "grid_n"},
               "spec");
    SpecConfig s;
    if (n["dim"]) s.dim = int(as_int(n["dim"]));
    if (s.dim < 1 || s.dim > 9) fail_at(n["dim"] ? n["dim"] : n, "dim must lie in 1..9");
    if (n["mass"]) s.mass = as_real(n["mass"]);
    if (n["beta"]) s.beta = as_real(n["beta"]);
    if (const YAML::Node p = n["params"]) {
        if (!p.IsMap()) fail_at(p, "params must be a mapping");
        for (auto it = p.begin(); it != p.end(); ++it) {
            const std::string key = it->first.Scalar();
            if (key == "t" || (key.size() == 2 && key[0] == 'x' && key[1] >= '1' && key[1] <= '9'))
                fail_at(it->first, "parameter name '" + key + "' is reserved");
            s.params[key] = as_real(it->second);
        }
    }
    if (n["potential"]) {
        s.potential = as_string(n["potential"]);
        check_expr(n["potential"], s.potential, s.params, s.dim);
    }
    if (const YAML::Node f = n["f_nc"]) {
        if (!f.IsSequence() || int(f.size()) != s.dim) fail_at(f, "f_nc must list dim expressions", ErrorKind::dimension);
        for (const auto& e : f) {
            check_expr(e, as_string(e), s.params, s.dim);
            s.f_nc.push_back(e.Scalar());
        }
    }
    if (n["fnc_acts"]) s.fnc_acts = as_bool(n["fnc_acts"]);
    for (const auto& name : kFieldNames)
        if (n[name]) s.fields[name] = as_field(n[name], s.params, s.dim);
    if (n["memory"]) s.memory = as_triple(n["memory"], "memory");
    if (n["fast_noise"]) s.fast_noise = as_triple(n["fast_noise"], "fast_noise");
    if (n["slow_noise"]) s.slow_noise = as_triple(n["slow_noise"], "slow_noise");
    auto vec = [&](const char* key, std::vector<double>& out) {
        if (!n[key]) return;
        out = as_reals(n[key]);
        if (int(out.size()) != s.dim) fail_at(n[key], std::string(key) + " must have dim entries", ErrorKind::dimension);
    };
    vec("x0", s.x0);
    vec("v0", s.v0);
    vec("box_lo", s.box_lo);
    vec("box_hi", s.box_hi);
    if (n["grid_n"]) s.grid_n = int(as_int(n["grid_n"]));
    if (s.grid_n < 1) fail_at(n["grid_n"], "grid_n must be positive");
    return s;
}

void check_scheme(const YAML::Node& n) {
    try {
        scheme_from_string(n.Scalar());
    } catch (const Error& e) {
        fail_at(n, e.what());
    }
}

void emit_real(YAML::Emitter& out, double v) { out << format_real(v); }

void emit_matrix(YAML::Emitter& out, const Mat& M) {
    out << YAML::Flow << YAML::BeginSeq;
    for (Eigen::Index i = 0; i < M.rows(); ++i) {
        out << YAML::Flow << YAML::BeginSeq;
        for (Eigen::Index j = 0; j < M.cols(); ++j) emit_real(out, M(i, j));
        out << YAML::EndSeq;
    }
    out << YAML::EndSeq;
}

void emit_reals(YAML::Emitter& out, const std::vector<double>& v) {
    out << YAML::Flow << YAML::BeginSeq;
    for (double x : v) emit_real(out, x);
    out << YAML::EndSeq;
}

void emit_params(YAML::Emitter& out, const std::map<std::string, double>& p) {
    out << YAML::BeginMap;
    for (const auto& [k, v] : p) {
        out << YAML::Key << k << YAML::Value;
        emit_real(out, v);
    }
    out << YAML::EndMap;
}

MatrixField field_from(const FieldConfig& f, const std::map<std::string, double>& params, Eigen::Index rows,
                       Eigen::Index cols, const std::string& name) {
    std::vector<std::vector<FieldExpr>> ex;
    bool constant = true, diagonal = true;
    for (size_t i = 0; i < f.entries.size(); ++i) {
        std::vector<FieldExpr> row;
        for (size_t j = 0; j < f.entries[i].size(); ++j) {
            FieldExpr e = parse_expr(f.entries[i][j], params);
            if (e.coord_count() > 0 || e.uses_time()) constant = false;
            const bool literal_zero = e.root->kind == ExprNode::Kind::number && e.root->value == 0.0;
            if (i != j && !literal_zero) diagonal = false;
            row.push_back(e);
        }
        ex.push_back(row);
    }
    MatrixField m;
    m.rows = rows;
    m.cols = cols;
    if (f.scalar) {
        if (rows != cols) fail(ErrorKind::dimension, "config: scalar field " + name + " needs a square shape");
        const FieldExpr e = ex[0][0];
        m.eval = [e, rows](double t, const Vec& x) { return Mat(e.eval(t, x) * Mat::Identity(rows, rows)); };
    } else {
        if (Eigen::Index(ex.size()) != rows || (rows > 0 && Eigen::Index(ex[0].size()) != cols)) {
            std::ostringstream os;
            os << "config: field " << name << " must be " << rows << "x" << cols;
            fail(ErrorKind::dimension, os.str());
        }
        m.eval = [ex, rows, cols](double t, const Vec& x) {
            Mat A(rows, cols);
            for (Eigen::Index i = 0; i < rows; ++i)
                for (Eigen::Index j = 0; j < cols; ++j) A(i, j) = ex[size_t(i)][size_t(j)].eval(t, x);
            return A;
        };
    }
    m.constant = constant;
    m.diagonal = diagonal;
    return m;
}

Eigen::Index field_cols(const FieldConfig& f, Eigen::Index d) {
    if (f.scalar) return d;
    return f.entries.empty() ? 0 : Eigen::Index(f.entries[0].size());
}

GleSpec spec_from(const SpecConfig& c) {
    GleSpec s;
    s.name = "custom";
    const int d = c.dim;
    s.dim = d;
    s.mass = c.mass;
    s.beta = c.beta;
    auto triple = [](const std::optional<TripleConfig>& t) {
        return t ? make_triple(t->Gamma, t->C, t->Sigma) : empty_triple(0);
    };
    s.memory = triple(c.memory);
    s.fast_noise = triple(c.fast_noise);
    s.slow_noise = triple(c.slow_noise);
    const Eigen::Index k = s.memory.out_dim(), wf = s.fast_noise.out_dim(), ws = s.slow_noise.out_dim();
    auto get = [&](const std::string& name, Eigen::Index r, Eigen::Index cols) {
        auto it = c.fields.find(name);
        if (it == c.fields.end()) return MatrixField::zero(r, cols);
        return field_from(it->second, c.params, r, cols, name);
    };
    s.gamma0 = get("gamma0", d, d);
    const auto s0 = c.fields.find("sigma0");
    s.sigma0 = get("sigma0", d, s0 == c.fields.end() ? 0 : field_cols(s0->second, d));
    s.g = get("g", d, k);
    s.h = get("h", k, d);
    s.sigma_f = get("sigma_f", d, wf);
    s.sigma_s = get("sigma_s", d, ws);
    if (c.potential.empty()) {
        s.potential = ScalarField::zero_field();
    } else {
        const FieldExpr e = parse_expr(c.potential, c.params);
        s.potential.eval = [e](double t, const Vec& x) { return e.eval(t, x); };
    }
    if (c.f_nc.empty()) {
        s.f_nc = VectorField::zero_field(d);
    } else {
        std::vector<FieldExpr> ex;
        for (const auto& txt : c.f_nc) ex.push_back(parse_expr(txt, c.params));
        s.f_nc.dim = d;
        s.f_nc.eval = [ex](double t, const Vec& x) {
            Vec f(Eigen::Index(ex.size()));
            for (size_t i = 0; i < ex.size(); ++i) f(Eigen::Index(i)) = ex[i].eval(t, x);
            return f;
        };
    }
    s.fnc_acts = c.fnc_acts;
    auto vec = [d](const std::vector<double>& v, double fill) {
        return v.empty() ? Vec(Vec::Constant(d, fill)) : Vec(Eigen::Map<const Vec>(v.data(), Eigen::Index(v.size())));
    };
    s.x0 = vec(c.x0, 0.0);
    s.v0 = vec(c.v0, 0.0);
    s.box_lo = vec(c.box_lo, -1.0);
    s.box_hi = vec(c.box_hi, 1.0);
    s.grid_n = c.grid_n;
    validate_spec(s);
    return s;
}

}  // namespace

ScenarioConfig parse_config(const std::string& text) {
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::ParserException& e) {
        fail(ErrorKind::config, "config: " + e.msg + " at " + where(e.mark));
    }
    ScenarioConfig cfg;
    if (root.IsNull()) return cfg;
    check_keys(root, {"scenario", "params", "spec", "procedure", "seed", "output", "simulation", "ladder"}, "top level");
    if (root["scenario"]) cfg.scenario = as_string(root["scenario"]);
    {
        const auto names = scenario_names();
        if (std::find(names.begin(), names.end(), cfg.scenario) == names.end())
            fail_at(root["scenario"], "unknown scenario '" + cfg.scenario + "'");
    }
    if (const YAML::Node p = root["params"]) {
        const auto allowed = scenario_param_names(cfg.scenario);
        check_keys(p, std::set<std::string>(allowed.begin(), allowed.end()), "params of " + cfg.scenario);
        for (auto it = p.begin(); it != p.end(); ++it) cfg.params[it->first.Scalar()] = as_real(it->second);
    }
    if (const YAML::Node s = root["spec"]) {
        if (cfg.scenario != "custom") fail_at(s, "an inline spec needs scenario: custom");
        cfg.spec = as_spec(s);
    } else if (cfg.scenario == "custom") {
        fail(ErrorKind::config, "config: scenario custom needs a spec section");
    }
    if (const YAML::Node p = root["procedure"]) {
        cfg.procedure = as_string(p);
        try {
            procedure_from_string(cfg.procedure);
        } catch (const Error& e) {
            fail_at(p, e.what());
        }
    }
    if (root["seed"]) {
        const long long s = as_int(root["seed"]);
        if (s < 0) fail_at(root["seed"], "seed must be nonnegative");
        cfg.seed = std::uint64_t(s);
    }
    if (root["output"]) cfg.output = as_string(root["output"]);
    if (const YAML::Node n = root["simulation"]) {
        check_keys(n, {"eps", "T", "dt", "scheme", "stride"}, "simulation");
        auto& s = cfg.simulation;
        if (n["eps"]) s.eps = as_real(n["eps"]);
        if (n["T"]) s.T = as_real(n["T"]);
        if (n["dt"]) s.dt = as_real(n["dt"]);
        if (n["scheme"]) check_scheme(n["scheme"]), s.scheme = n["scheme"].Scalar();
        if (n["stride"]) s.stride = int(as_int(n["stride"]));
        if (!(s.eps > 0)) fail_at(n, "simulation.eps must be positive");
        if (!(s.T > 0)) fail_at(n, "simulation.T must be positive");
    }
    if (const YAML::Node n = root["ladder"]) {
        check_keys(n, {"eps", "paths", "T", "dt", "scheme"}, "ladder");
        auto& l = cfg.ladder;
        if (n["eps"]) l.eps = as_reals(n["eps"]);
        if (n["paths"]) l.paths = int(as_int(n["paths"]));
        if (n["T"]) l.T = as_real(n["T"]);
        if (n["dt"]) l.dt = as_real(n["dt"]);
        if (n["scheme"]) check_scheme(n["scheme"]), l.scheme = n["scheme"].Scalar();
        try {
            build_ladder(cfg).validate();
        } catch (const Error& e) {
            fail_at(n, e.what());
        }
    }
    return cfg;
}

std::string print_config(const ScenarioConfig& cfg) {
    YAML::Emitter out;
    out << YAML::BeginMap;
    out << YAML::Key << "scenario" << YAML::Value << cfg.scenario;
    if (!cfg.params.empty()) {
        out << YAML::Key << "params" << YAML::Value;
        emit_params(out, cfg.params);
    }
    if (cfg.spec) {
        const SpecConfig& s = *cfg.spec;
        out << YAML::Key << "spec" << YAML::Value << YAML::BeginMap;
        out << YAML::Key << "dim" << YAML::Value << s.dim;
        out << YAML::Key << "mass" << YAML::Value;
        emit_real(out, s.mass);
        out << YAML::Key << "beta" << YAML::Value;
        emit_real(out, s.beta);
        if (!s.params.empty()) {
            out << YAML::Key << "params" << YAML::Value;
            emit_params(out, s.params);
        }
        if (!s.potential.empty()) out << YAML::Key << "potential" << YAML::Value << YAML::DoubleQuoted << s.potential;
        if (!s.f_nc.empty()) {
            out << YAML::Key << "f_nc" << YAML::Value << YAML::Flow << YAML::BeginSeq;
            for (const auto& e : s.f_nc) out << YAML::DoubleQuoted << e;
            out << YAML::EndSeq;
        }
        out << YAML::Key << "fnc_acts" << YAML::Value << (s.fnc_acts ? "true" : "false");
        for (const auto& name : kFieldNames) {
            auto it = s.fields.find(name);
            if (it == s.fields.end()) continue;
            out << YAML::Key << name << YAML::Value;
            if (it->second.scalar) {
                out << YAML::DoubleQuoted << it->second.entries[0][0];
                continue;
            }
            out << YAML::Flow << YAML::BeginSeq;
            for (const auto& row : it->second.entries) {
                out << YAML::Flow << YAML::BeginSeq;
                for (const auto& e : row) out << YAML::DoubleQuoted << e;
                out << YAML::EndSeq;
            }
            out << YAML::EndSeq;
        }
        auto triple = [&](const char* name, const std::optional<TripleConfig>& t) {
            if (!t) return;
            out << YAML::Key << name << YAML::Value << YAML::BeginMap;
            out << YAML::Key << "Gamma" << YAML::Value;
            emit_matrix(out, t->Gamma);
            out << YAML::Key << "C" << YAML::Value;
            emit_matrix(out, t->C);
            out << YAML::Key << "Sigma" << YAML::Value;
            emit_matrix(out, t->Sigma);
            out << YAML::EndMap;
        };
        triple("memory", s.memory);
        triple("fast_noise", s.fast_noise);
        triple("slow_noise", s.slow_noise);
        auto vec = [&](const char* name, const std::vector<double>& v) {
            if (v.empty()) return;
            out << YAML::Key << name << YAML::Value;
            emit_reals(out, v);
        };
        vec("x0", s.x0);
        vec("v0", s.v0);
        vec("box_lo", s.box_lo);
        vec("box_hi", s.box_hi);
        out << YAML::Key << "grid_n" << YAML::Value << s.grid_n;
        out << YAML::EndMap;
    }
    out << YAML::Key << "procedure" << YAML::Value << cfg.procedure;
    out << YAML::Key << "seed" << YAML::Value << cfg.seed;
    out << YAML::Key << "output" << YAML::Value << YAML::DoubleQuoted << cfg.output;
    out << YAML::Key << "simulation" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "eps" << YAML::Value;
    emit_real(out, cfg.simulation.eps);
    out << YAML::Key << "T" << YAML::Value;
    emit_real(out, cfg.simulation.T);
    out << YAML::Key << "dt" << YAML::Value;
    emit_real(out, cfg.simulation.dt);
    out << YAML::Key << "scheme" << YAML::Value << cfg.simulation.scheme;
    out << YAML::Key << "stride" << YAML::Value << cfg.simulation.stride;
    out << YAML::EndMap;
    out << YAML::Key << "ladder" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "eps" << YAML::Value;
    emit_reals(out, cfg.ladder.eps);
    out << YAML::Key << "paths" << YAML::Value << cfg.ladder.paths;
    out << YAML::Key << "T" << YAML::Value;
    emit_real(out, cfg.ladder.T);
    out << YAML::Key << "dt" << YAML::Value;
    emit_real(out, cfg.ladder.dt);
    out << YAML::Key << "scheme" << YAML::Value << cfg.ladder.scheme;
    out << YAML::EndMap;
    out << YAML::EndMap;
    return std::string(out.c_str()) + "\n";
}

GleSpec build_spec(const ScenarioConfig& cfg) {
    if (cfg.scenario == "custom") {
        if (!cfg.spec) fail(ErrorKind::config, "config: scenario custom needs a spec section");
        return spec_from(*cfg.spec);
    }
    ScenarioParams p;
    p.values = cfg.params;
    return scenario(cfg.scenario, p);
}

EpsilonLadder build_ladder(const ScenarioConfig& cfg) {
    EpsilonLadder l;
    l.values = cfg.ladder.eps;
    l.paths = cfg.ladder.paths;
    l.seed = cfg.seed;
    l.T = cfg.ladder.T;
    l.dt = cfg.ladder.dt;
    l.scheme = scheme_from_string(cfg.ladder.scheme);
    return l;
}

}  // namespace glehomog
