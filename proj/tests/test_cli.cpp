#include <doctest.h>

#include <charconv>
#include <cmath>
#include <numbers>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include "misspec/cli.hpp"

using namespace misspec;
using namespace misspec::cli;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        static int counter = 0;
        path = fs::temp_directory_path() /
               ("misspec_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

fs::path write(const fs::path& p, const std::string& text) {
    std::ofstream(p) << text;
    return p;
}

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run invoke(std::vector<std::string> args) {
    args.insert(args.begin(), "misspec-krige");
    std::vector<const char*> argv;
    for (const auto& a : args) {
        argv.push_back(a.c_str());
    }
    std::ostringstream out;
    std::ostringstream err;
    const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
    std::ifstream in(p);
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        std::vector<std::string> cells;
        std::string cell;
        std::istringstream ls(line);
        while (std::getline(ls, cell, ',')) {
            cells.push_back(cell);
        }
        if (!line.empty() && line.back() == ',') {
            cells.emplace_back();
        }
        rows.push_back(cells);
    }
    return rows;
}

double parse(const std::string& s) {
    double v = 0.0;
    std::from_chars(s.data(), s.data() + s.size(), v);
    return v;
}

}  // namespace

TEST_CASE("run on the identical scenario writes a flat CSV and diagnostics") {
    TempDir tmp;
    const auto cfg = write(tmp.path / "c.json", R"({"schema": 1, "scenario": "identical", "output_dir": ")" +
                                                    (tmp.path / "out").string() + "\"}");
    const Run r = invoke({"run", cfg.string()});
    REQUIRE(r.code == 0);
    const auto rows = read_csv(tmp.path / "out" / "ratios.csv");
    REQUIRE(rows.size() > 1);
    CHECK(rows[0] == std::vector<std::string>{"scenario", "n", "target_id", "ratio_name", "value", "limit", "abs_dev"});
    for (std::size_t i = 1; i < rows.size(); ++i) {
        REQUIRE(rows[i].size() == 7);
        CHECK(rows[i][0] == "identical");
        CHECK(parse(rows[i][4]) == (rows[i][3] == "mean_term" ? 0.0 : 1.0));
        CHECK(parse(rows[i][6]) == 0.0);
    }
    std::ifstream dj(tmp.path / "out" / "diagnostics.json");
    const json d = json::parse(dj);
    CHECK(d["schema"] == 1);
    CHECK(d["scenarios"][0]["assumptions"]["route"] == "spectral");
    CHECK(d["scenarios"][0]["failure"].is_null());
}

TEST_CASE("matern_same_nu CSV contains the r_var_3 SUP row near 2") {
    TempDir tmp;
    const auto cfg = write(tmp.path / "c.json", R"({"schema": 1, "scenario": "matern_same_nu", "output_dir": ")" +
                                                    tmp.path.string() + "\"}");
    REQUIRE(invoke({"run", cfg.string()}).code == 0);
    bool found = false;
    for (const auto& row : read_csv(tmp.path / "ratios.csv")) {
        if (row[1] == "64" && row[2] == "SUP" && row[3] == "r_var_3") {
            found = true;
            CHECK(parse(row[5]) == 2.0);
            CHECK(parse(row[6]) < 0.2);
            CHECK(std::abs(parse(row[4]) - 2.0) == doctest::Approx(parse(row[6])));
        }
    }
    CHECK(found);
}

TEST_CASE("CSV values round-trip to the in-memory table") {
    TempDir tmp;
    const auto cfg = write(tmp.path / "c.json", R"({"schema": 1, "scenario": "matern_diff_nu", "schedule": [8, 16],
                                                    "output_dir": ")" + tmp.path.string() + "\"}");
    REQUIRE(invoke({"run", cfg.string()}).code == 0);
    Scenario s = builtin_scenario("matern_diff_nu");
    s.schedule = {8, 16};
    const auto res = run_scenario(s);
    std::vector<double> expected;
    for (const auto& level : res.table.levels) {
        for (const auto& rec : level.records) {
            for (RatioName r : kAllRatios) {
                expected.push_back(rec[r].value);
            }
        }
    }
    const auto rows = read_csv(tmp.path / "ratios.csv");
    REQUIRE(rows.size() == expected.size() + 1);
    for (std::size_t i = 0; i < expected.size(); ++i) {
        CHECK(parse(rows[i + 1][4]) == expected[i]);
        const std::string& name = rows[i + 1][3];
        const bool a_ratio = name.ends_with("_3") || name.ends_with("_4");
        CHECK(rows[i + 1][5].empty() == a_ratio);
    }
}

TEST_CASE("two runs of one config are byte-identical") {
    TempDir tmp;
    const auto cfg = write(tmp.path / "c.json", R"({"schema": 1, "scenario": "periodic_ratio3", "output_dir": ")" +
                                                    tmp.path.string() + "\"}");
    REQUIRE(invoke({"run", cfg.string()}).code == 0);
    std::stringstream a;
    a << std::ifstream(tmp.path / "ratios.csv").rdbuf();
    REQUIRE(invoke({"run", cfg.string()}).code == 0);
    std::stringstream b;
    b << std::ifstream(tmp.path / "ratios.csv").rdbuf();
    CHECK(a.str() == b.str());
}

TEST_CASE("config errors exit with 2 and leave no output") {
    TempDir tmp;
    const auto out = tmp.path / "out";
    const std::string od = R"(, "output_dir": ")" + out.string() + "\"}";
    const std::vector<std::string> bad = {
        "{not json",
        R"({"scenario": "identical")" + od,
        R"({"schema": 2, "scenario": "identical")" + od,
        R"({"schema": 1, "scenario": "identical", "colour": "red")" + od,
        R"({"schema": 1, "scenario": "no_such_scenario")" + od,
        R"({"schema": 1, "scenario": "identical", "schedule": [16, 8])" + od,
        R"({"schema": 1, "scenario": "identical", "schedule": [4096])" + od,
        R"({"schema": 1, "domain": {"kind": "box"}, "true_model": {"kernel": {"family": "matern", "nu": -1}},
            "wrong_model": {"kernel": {"family": "matern", "nu": 0.5}}, "design": {"kind": "halton"})" + od,
        R"({"schema": 1, "domain": {"kind": "box"}, "true_model": {"kernel": {"family": "matern", "nu": 0.5, "extra": 1}},
            "wrong_model": {"kernel": {"family": "matern", "nu": 0.5}}, "design": {"kind": "halton"})" + od,
        R"({"schema": 1, "domain": {"kind": "box"}, "true_model": {"kernel": {"family": "periodic"}},
            "wrong_model": {"kernel": {"family": "matern", "nu": 0.5}}, "design": {"kind": "halton"})" + od,
    };
    for (const auto& text : bad) {
        const auto cfg = write(tmp.path / "bad.json", text);
        const Run r = invoke({"run", cfg.string()});
        CHECK_MESSAGE(r.code == 2, text);
        CHECK_FALSE(r.err.empty());
        CHECK_FALSE(fs::exists(out / "ratios.csv"));
    }
    CHECK(invoke({"run", (tmp.path / "missing.json").string()}).code == 2);
}

TEST_CASE("inline scenarios run and a degenerate model exits with 3") {
    TempDir tmp;
    const auto good = write(tmp.path / "good.json", R"({
        "schema": 1, "name": "inline_ou",
        "domain": {"kind": "box", "dim": 1},
        "true_model": {"kernel": {"family": "matern", "nu": 0.5}},
        "wrong_model": {"kernel": {"family": "matern", "sigma": 2, "nu": 0.5, "kappa": 0.5}, "mean": {"kind": "constant", "value": 1}},
        "design": {"kind": "accumulating", "x_star": [0.37]},
        "targets": {"count": 5, "extra": [{"id": "edge", "x": [0.999]}]},
        "schedule": [4, 8],
        "tolerances": {"nystrom_nodes": 32},
        "output_dir": ")" + (tmp.path / "good").string() + "\"}");
    const Run r = invoke({"run", good.string()});
    CHECK(r.code == 0);
    const auto rows = read_csv(tmp.path / "good" / "ratios.csv");
    bool edge = false;
    for (const auto& row : rows) {
        edge = edge || row[2] == "edge";
    }
    CHECK(edge);

    const auto degenerate = write(tmp.path / "deg.json", R"({
        "schema": 1, "domain": {"kind": "box"},
        "true_model": {"kernel": {"family": "constant", "c": 1}},
        "wrong_model": {"kernel": {"family": "constant", "c": 1}},
        "design": {"kind": "halton"}, "schedule": [4],
        "output_dir": ")" + (tmp.path / "deg").string() + "\"}");
    const Run d = invoke({"run", degenerate.string()});
    CHECK(d.code == 3);
    CHECK(d.err.find("numerical") != std::string::npos);
}

TEST_CASE("check prints the assumption report") {
    TempDir tmp;
    const auto same = write(tmp.path / "same.json", R"({"schema": 1, "domain": {"kind": "box"},
        "true_model": {"kernel": {"family": "matern", "nu": 0.5}},
        "wrong_model": {"kernel": {"family": "matern", "nu": 0.5}}})");
    Run r = invoke({"check", same.string()});
    REQUIRE(r.code == 0);
    json j = json::parse(r.out);
    CHECK(j["analytic"]["a"] == 1.0);
    CHECK(j["spectral_verdict"]["a"].get<double>() == doctest::Approx(1.0));

    const auto diff = write(tmp.path / "diff.json", R"({"schema": 1, "domain": {"kind": "box"},
        "true_model": {"kernel": {"family": "matern", "nu": 0.5}},
        "wrong_model": {"kernel": {"family": "matern", "nu": 1.5}}})");
    r = invoke({"check", diff.string()});
    REQUIRE(r.code == 0);
    CHECK(json::parse(r.out)["spectral_verdict"]["kind"] == "DivergesToZero");

    const auto sphere = write(tmp.path / "sphere.json", R"({"schema": 1, "domain": {"kind": "sphere"},
        "true_model": {"kernel": {"family": "sphere_legendre_matern", "nu1": 1}},
        "wrong_model": {"kernel": {"family": "sphere_spde", "nu": 1}},
        "tolerances": {"sphere_level": 2}})");
    r = invoke({"check", sphere.string()});
    REQUIRE(r.code == 0);
    j = json::parse(r.out);
    CHECK(j["eigen_verdict"]["kind"] == "Converges");
    CHECK(std::abs(j["eigen_verdict"]["a"].get<double>() - 1 / (2 * std::numbers::pi)) < 1e-3);
}

TEST_CASE("eigen writes Nyström eigenvalues") {
    TempDir tmp;
    const auto constant = write(tmp.path / "c.json", R"({"schema": 1, "domain": {"kind": "box"},
        "kernel": {"family": "constant", "c": 1}, "grid": {"kind": "trapezoid", "nodes": 40},
        "output": ")" + (tmp.path / "c.csv").string() + "\"}");
    REQUIRE(invoke({"eigen", constant.string()}).code == 0);
    auto rows = read_csv(tmp.path / "c.csv");
    CHECK(rows[0] == std::vector<std::string>{"index", "eigenvalue"});
    CHECK(parse(rows[1][1]) == doctest::Approx(1.0));
    CHECK(std::abs(parse(rows[2][1])) < 1e-12);

    const auto periodic = write(tmp.path / "p.json", R"({"schema": 1, "domain": {"kind": "torus"},
        "kernel": {"family": "periodic", "truncation": 2, "table": [{"k": [0], "mass": 1}, {"k": [1], "mass": 0.5}, {"k": [2], "mass": 0.125}]},
        "grid": {"kind": "periodic", "nodes": 32},
        "output": ")" + (tmp.path / "p.csv").string() + "\"}");
    REQUIRE(invoke({"eigen", periodic.string()}).code == 0);
    rows = read_csv(tmp.path / "p.csv");
    const double expect[] = {1.0, 0.5, 0.5, 0.125, 0.125};
    for (int i = 0; i < 5; ++i) {
        CHECK(std::abs(parse(rows[static_cast<std::size_t>(i) + 1][1]) - expect[i]) < 1e-6);
    }

    const auto matern = write(tmp.path / "m.json", R"({"schema": 1, "domain": {"kind": "box"},
        "kernel": {"family": "matern", "nu": 0.5}, "grid": {"kind": "trapezoid", "nodes": 128},
        "output": ")" + (tmp.path / "m.csv").string() + "\"}");
    REQUIRE(invoke({"eigen", matern.string()}).code == 0);
    rows = read_csv(tmp.path / "m.csv");
    CHECK(rows.size() == 129);
    for (std::size_t i = 1; i < rows.size(); ++i) {
        CHECK(parse(rows[i][1]) > 0.0);
        if (i > 1) {
            CHECK(parse(rows[i][1]) <= parse(rows[i - 1][1]));
        }
    }
}

TEST_CASE("front-end commands and exit codes") {
    CHECK(invoke({"version"}).out.find(kVersion) != std::string::npos);
    const Run l = invoke({"list-scenarios"});
    CHECK(l.code == 0);
    CHECK(l.out.find("sphere_legendre_vs_spde") != std::string::npos);
    CHECK(invoke({}).code == 2);
    CHECK(invoke({"frobnicate"}).code == 2);
    CHECK(invoke({"run"}).code == 2);
    CHECK(invoke({"--help"}).code == 0);
}

TEST_CASE("numbers are printed with 17 significant digits") {
    CHECK(format_double(1.0) == "1");
    CHECK(format_double(0.1) == "0.10000000000000001");
    CHECK(format_double(-2.5e-20) == "-2.4999999999999999e-20");
    CHECK(parse(format_double(1.0 / 3.0)) == 1.0 / 3.0);
}
