#include <catch2/catch_amalgamated.hpp>

#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include "panelq/csv.hpp"
#include "panelq/montecarlo.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Sandbox {
    fs::path dir;
    Sandbox() {
        dir = fs::temp_directory_path() /
              ("panelq_cli_" + std::to_string(::getpid()) + "_" +
               std::to_string(reinterpret_cast<std::uintptr_t>(this)));
        fs::create_directories(dir);
    }
    ~Sandbox() { std::error_code ec; fs::remove_all(dir, ec); }
    std::string path(const std::string& name) const { return (dir / name).string(); }
};

int run(const std::string& args, const std::string& out_file = "",
        const std::string& err_file = "") {
    std::string cmd = std::string(PANELQ_BIN) + " " + args;
    if (!out_file.empty()) cmd += " > " + out_file;
    if (!err_file.empty()) cmd += " 2> " + err_file;
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

std::string make_panel_csv(const Sandbox& box) {
    panelq::SimConfig config;
    config.n = 12;
    config.t = 30;
    config.seed = 31;
    auto gen = panelq::generate_panel(config, 0);
    const std::string path = box.path("panel.csv");
    panelq::write_panel_csv(gen.data, path);
    return path;
}

}  // namespace

TEST_CASE("fit subcommand produces a coherent report", "[cli]") {
    Sandbox box;
    const std::string csv = make_panel_csv(box);
    const std::string out = box.path("report.json");
    REQUIRE(run("fit --input " + csv + " --tau 0.5 --grid 0:0.35:0.025 --output " + out) == 0);
    const json report = json::parse(slurp(out));
    CHECK(report["schema"] == 1);
    CHECK(report["kind"] == "fit");
    CHECK(report["n"] == 12);
    REQUIRE(report["taus"].size() == 1);
    const auto& block = report["taus"][0];
    REQUIRE(block["ok"].get<bool>());
    CHECK(block["selected_k"] == 3);
    CHECK(block["membership"].size() == 12);
    CHECK(block["path"].size() == 15);
    // coefficients: three group centers plus one slope
    REQUIRE(block["coefficients"].size() == 4);
    const auto& slope = block["coefficients"][3];
    CHECK(slope["name"] == "x1");
    CHECK(std::abs(slope["estimate"].get<double>() - 1.0) < 0.2);
    CHECK(slope["se"].get<double>() > 0.0);

    SECTION("csv format carries the same numbers") {
        const std::string out_csv = box.path("report.csv");
        REQUIRE(run("fit --input " + csv + " --tau 0.5 --grid 0:0.35:0.025 --format csv "
                    "--output " + out_csv) == 0);
        const std::string body = slurp(out_csv);
        char expected[64];
        std::snprintf(expected, sizeof expected, "%.17g", slope["estimate"].get<double>());
        CHECK(body.find(expected) != std::string::npos);
        CHECK(body.find("selected_k") != std::string::npos);
    }

    SECTION("plotdata flattens fit reports") {
        const std::string series = box.path("series.csv");
        REQUIRE(run("plotdata --input " + out + " --output " + series) == 0);
        const std::string body = slurp(series);
        std::istringstream is(body);
        std::string line;
        std::getline(is, line);
        CHECK(line == "series,x,y,lo,hi");
        int coef_rows = 0, group_rows = 0;
        std::set<std::string> group_values;
        while (std::getline(is, line)) {
            if (line.rfind("coef:", 0) == 0) ++coef_rows;
            if (line.rfind("alpha_group@", 0) == 0) {
                ++group_rows;
                group_values.insert(line.substr(line.find(',', line.find(',') + 1)));
            }
        }
        CHECK(coef_rows == 4);   // one row per coefficient at a single tau
        CHECK(group_rows == 12); // one per individual
        CHECK(group_values.size() == 3);  // k distinct centers
    }
}

TEST_CASE("fit with a zero-only grid reduces to the fixed-effects fit", "[cli]") {
    Sandbox box;
    const std::string csv = make_panel_csv(box);
    const std::string out = box.path("fe.json");
    REQUIRE(run("fit --input " + csv + " --tau 0.5 --grid 0:0:1 --output " + out) == 0);
    const json report = json::parse(slurp(out));
    const auto& block = report["taus"][0];
    REQUIRE(block["ok"].get<bool>());
    CHECK(block["selected_k"] == 12);
    CHECK(block["path"].size() == 1);
}

TEST_CASE("simulate is byte-deterministic", "[cli]") {
    Sandbox box;
    const std::string a = box.path("a.json"), b = box.path("b.json");
    const std::string flags = "simulate --n 9 --t 15 --reps 1 --seed 7 --grid 0:0.35:0.05 "
                              "--threads 2 --output ";
    REQUIRE(run(flags + a) == 0);
    REQUIRE(run(flags + b) == 0);
    const std::string body_a = slurp(a);
    CHECK(body_a == slurp(b));
    CHECK(!body_a.empty());
}

TEST_CASE("simulate paper-cell preset emits the table row", "[cli]") {
    Sandbox box;
    const std::string out = box.path("cell.json");
    REQUIRE(run("simulate --paper-cell T1-n30-T60 --reps 2 --seed 3 --no-records --output " +
                out) == 0);
    const json report = json::parse(slurp(out));
    CHECK(report["config"]["n"] == 30);
    CHECK(report["config"]["t"] == 60);
    REQUIRE(report.contains("table_row"));
    double total = 0.0;
    for (const auto& key : {"1", "2", "3", "4", "5+"})
        total += report["table_row"][key].get<double>();
    CHECK(total == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("sweep output carries one report per constant", "[cli]") {
    Sandbox box;
    const std::string out = box.path("sweep.json");
    REQUIRE(run("simulate --n 9 --t 15 --reps 2 --seed 5 --grid 0:0.35:0.05 "
                "--sweep-constant 0.05:0.2:0.05 --no-records --output " + out) == 0);
    const json report = json::parse(slurp(out));
    CHECK(report["kind"] == "simulation-sweep");
    CHECK(report["sweep"].size() == 4);
}

TEST_CASE("error paths exit nonzero with diagnostic codes", "[cli]") {
    Sandbox box;
    SECTION("duplicate key") {
        const std::string bad = box.path("bad.csv");
        std::ofstream(bad) << "id,time,y\n1,1,10\n1,1,11\n";
        const std::string err = box.path("err.txt");
        CHECK(run("fit --input " + bad + " --output " + box.path("x.json"), "", err) != 0);
        const std::string diag = slurp(err);
        CHECK(diag.find("error[csv-duplicate-key]") != std::string::npos);
        CHECK(diag.find("line 3") != std::string::npos);
    }
    SECTION("missing file") {
        const std::string err = box.path("err2.txt");
        CHECK(run("fit --input " + box.path("nope.csv"), "", err) != 0);
        CHECK(slurp(err).find("error[io-open-failed]") != std::string::npos);
    }
    SECTION("bad grid") {
        const std::string err = box.path("err3.txt");
        CHECK(run("simulate --grid oops", "", err) != 0);
        CHECK(slurp(err).find("error[bad-grid]") != std::string::npos);
    }
    SECTION("unknown report schema") {
        const std::string bogus = box.path("bogus.json");
        std::ofstream(bogus) << "{\"schema\":1}";
        const std::string err = box.path("err4.txt");
        CHECK(run("plotdata --input " + bogus, "", err) != 0);
        CHECK(slurp(err).find("error[runtime]") != std::string::npos);
    }
}
