#include <filesystem>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include "doctest.h"
#include "glehomog/commands.hpp"
#include "glehomog/config.hpp"
#include "glehomog/errors.hpp"
#include "glehomog/expr.hpp"
#include "support.hpp"

using namespace glehomog;
namespace fs = std::filesystem;

namespace {

const char* kCustom = R"yaml(scenario: custom
procedure: markov
seed: 7
spec:
  dim: 1
  params:
    a: 0.5
  potential: "0.5*x1*x1"
  gamma0: "0.5*(1+tanh(x1))"
  memory:
    Gamma: [[1.0]]
    C: [[1.0]]
    Sigma: [[1.0]]
  fast_noise:
    Gamma: [[1.0]]
    C: [[1.0]]
    Sigma: [[1.0]]
  g: "1+a*tanh(x1)"
  h: "1+a*tanh(x1)"
  sigma_f: "1+a*tanh(x1)"
simulation:
  eps: 0.05
  T: 0.2
ladder:
  eps: [0.2, 0.1, 0.05]
  paths: 6
  T: 0.2
)yaml";

fs::path scratch(const std::string& name) {
    fs::path p = fs::temp_directory_path() / ("glehomog_test_" + std::to_string(::getpid())) / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

int run(CommandOptions o) {
    std::ostringstream out, err;
    return run_command(o, out, err);
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("expression evaluation") {
    Vec x(2);
    x << 0.5, -1.0;
    CHECK(parse_expr("1+2*3").eval(0, x) == 7.0);
    CHECK(parse_expr("cos(0)").eval(0, x) == 1.0);
    CHECK(parse_expr("-2*3").eval(0, x) == -6.0);
    CHECK(parse_expr("2-3-4").eval(0, x) == -5.0);
    CHECK(parse_expr("8/4/2").eval(0, x) == 1.0);
    CHECK(parse_expr("x1*x2 + t", {}).eval(2.0, x) == doctest::Approx(1.5));
    CHECK(parse_expr("k*sqrt(4)", {{"k", 1.5}}).eval(0, x) == 3.0);
    CHECK(parse_expr("exp(0) + sin(0) + tanh(0)").eval(0, x) == 1.0);
    CHECK(parse_expr("x2").coord_count() == 2);
    CHECK(parse_expr("t*2").uses_time());
}

TEST_CASE("expression errors name the column") {
    auto msg = [](const std::string& text) {
        try {
            parse_expr(text);
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::config);
            return std::string(e.what());
        }
        return std::string();
    };
    CHECK(msg("1+*2").find("column 3") != std::string::npos);
    CHECK(msg("foo(1)").find("column") != std::string::npos);
    CHECK(msg("(1+2").find("column") != std::string::npos);
    CHECK(msg("x1 x2").find("column 4") != std::string::npos);
    Vec x(1);
    x << 0.0;
    CHECK_THROWS_AS(parse_expr("sqrt(-1)").eval(0, x), Error);
    CHECK_THROWS_AS(parse_expr("x3").eval(0, x), Error);
}

TEST_CASE("print and reparse is a fixed point") {
    for (const char* s : {"-a*b+c", "(-a)*b", "1/(x1-2)", "-(-x1)", "0.1+1e-7*t", "tanh(x1)*cos(-x2/3)"}) {
        std::map<std::string, double> p{{"a", 0.25}, {"b", -3.0}, {"c", 1.0 / 3.0}};
        FieldExpr e = parse_expr(s, p);
        FieldExpr r = parse_expr(e.print(), p);
        CHECK(same_tree(e.root, r.root));
        CHECK(r.print() == e.print());
    }
    Vec x(1);
    x << 0.0;
    CHECK(parse_expr("-a*b", {{"a", 2}, {"b", 3}}).eval(0, x) == -6.0);
    CHECK(parse_expr("(-a)*b", {{"a", 2}, {"b", 3}}).eval(0, x) == -6.0);
}

TEST_CASE("config field expressions evaluate") {
    ScenarioConfig c = parse_config(kCustom);
    GleSpec s = build_spec(c);
    Vec x(1);
    x << 0.0;
    CHECK(s.gamma0(0.0, x)(0, 0) == doctest::Approx(0.5));
    CHECK(s.potential(0.0, Vec::Constant(1, 2.0)) == doctest::Approx(2.0));
    CHECK(c.procedure == "markov");
    CHECK(c.seed == 7);
}

TEST_CASE("misspelled keys report line and column") {
    std::string text = kCustom;
    text.replace(text.find("sigma_f:"), 8, "sigma_ff:");
    try {
        parse_config(text);
        FAIL("expected a config error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::config);
        CHECK(std::string(e.what()).find("sigma_ff") != std::string::npos);
        CHECK(std::string(e.what()).find("line 20, column 3") != std::string::npos);
    }
    CHECK_THROWS_AS(parse_config("scenario: magnetic\nparams:\n  omegaa: 1\n"), Error);
    CHECK_THROWS_AS(parse_config("scenario: magnetic\nseed: 1.5\n"), Error);
    CHECK_THROWS_AS(parse_config("scenario: custom\nspec:\n  dim: 1\n  params:\n    x1: 2\n"), Error);
}

TEST_CASE("canonical config printing is a fixed point") {
    ScenarioConfig c = parse_config(kCustom);
    const std::string once = print_config(c);
    CHECK(print_config(parse_config(once)) == once);
    ScenarioConfig m = parse_config("scenario: magnetic\nparams:\n  omega: 0.5\nladder:\n  eps: [0.1, 0.01]\n");
    const std::string twice = print_config(m);
    CHECK(print_config(parse_config(twice)) == twice);
    CHECK(format_real(1.0) == "1.0");
    CHECK(format_real(0.1) == "0.1");
    CHECK(format_real(1e-20) == "1e-20");
}

TEST_CASE("commands write byte-identical files on reruns") {
    fs::path dir = scratch("rerun");
    {
        std::ofstream f(dir / "custom.yaml");
        f << kCustom;
    }
    for (const char* cmd : {"simulate", "reduce", "converge", "report"}) {
        std::map<std::string, std::string> first;
        for (int rep = 0; rep < 2; ++rep) {
            CommandOptions o;
            o.command = cmd;
            o.config_path = (dir / "custom.yaml").string();
            o.out = (dir / cmd).string();
            fs::remove_all(*o.out);
            REQUIRE(run(o) == 0);
            std::map<std::string, std::string> files;
            for (const auto& e : fs::directory_iterator(*o.out)) files[e.path().filename().string()] = slurp(e.path());
            CHECK(files.count("manifest.json") == 1);
            CHECK(files.count("config.yaml") == 1);
            if (rep == 0)
                first = files;
            else
                CHECK(files == first);
        }
    }
    fs::remove_all(dir.parent_path());
}

TEST_CASE("exit codes") {
    fs::path dir = scratch("codes");
    CommandOptions o;
    o.command = "reduce";
    o.out = (dir / "a").string();
    o.scenario = "nope";
    CHECK(run(o) == 2);
    o.scenario = "temperature_gradient";
    o.procedure = "none";
    CHECK(run(o) == 2);
    o.procedure = "sideways";
    CHECK(run(o) == 2);
    o.config_path = (dir / "missing.yaml").string();
    o.scenario.reset();
    CHECK(run(o) == 2);
    {
        std::ofstream f(dir / "skew.yaml");
        f << "scenario: temperature_gradient\nprocedure: markov_then_mass\nparams:\n  dim: 2\n  fast_skew: 2\n";
    }
    o.config_path = (dir / "skew.yaml").string();
    o.procedure.reset();
    CHECK(run(o) == 3);
    o.command = "dance";
    CHECK(run(o) == 2);
    fs::remove_all(dir.parent_path());
}

}
