// panelq: panel quantile regression with grouped fixed effects.
//
// Subcommands:
//   fit       estimate groupings and coefficients from a panel CSV
//   simulate  run Monte Carlo cells over the built-in designs
//   plotdata  flatten a report into long-format plot series

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <regex>
#include <string>

#include "panelq/panelq.hpp"

namespace {

using panelq::json;

[[noreturn]] void fail(const std::string& code, const std::string& message) {
    std::fprintf(stderr, "error[%s]: %s\n", code.c_str(), message.c_str());
    std::exit(2);
}

panelq::GridSpec parse_grid(const std::string& spec) {
    panelq::GridSpec g;
    if (std::sscanf(spec.c_str(), "%lf:%lf:%lf", &g.lo, &g.hi, &g.step) != 3)
        fail("bad-grid", "grid spec must be lo:hi:step, got '" + spec + "'");
    try {
        g.build();
    } catch (const std::exception& e) {
        fail("bad-grid", e.what());
    }
    return g;
}

std::vector<double> parse_constant_range(const std::string& spec) {
    double lo, hi, step;
    if (std::sscanf(spec.c_str(), "%lf:%lf:%lf", &lo, &hi, &step) != 3 || step <= 0.0 || hi < lo)
        fail("bad-sweep", "sweep spec must be lo:hi:step, got '" + spec + "'");
    std::vector<double> out;
    for (int k = 0;; ++k) {
        const double c = lo + k * step;
        if (c > hi + 1e-12) break;
        out.push_back(c);
    }
    return out;
}

void write_text(const std::string& path, const std::string& body) {
    if (path.empty() || path == "-") {
        std::fputs(body.c_str(), stdout);
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) fail("io-open-failed", "cannot open '" + path + "' for writing");
    out << body;
}

panelq::BandwidthRule parse_bandwidth(const std::string& name) {
    if (name == "hall-sheather") return panelq::BandwidthRule::hall_sheather;
    if (name == "bofinger") return panelq::BandwidthRule::bofinger;
    fail("bad-bandwidth", "bandwidth rule must be hall-sheather or bofinger");
}

int cmd_fit(const panelq::FitRequest& req) {
    panelq::PanelData data;
    try {
        data = panelq::parse_panel_csv(req.input);
    } catch (const panelq::CsvError& e) {
        std::fprintf(stderr, "error[%s]: line %zu: %s\n", e.code.c_str(), e.line, e.what());
        return 2;
    }
    const panelq::FitReport report = panelq::run_fit(data, req);
    bool any_ok = false;
    for (const auto& b : report.blocks) {
        any_ok = any_ok || b.ok;
        if (!b.ok)
            std::fprintf(stderr, "error[fit-tau-failed]: tau=%g: %s\n", b.tau, b.error.c_str());
    }
    if (req.format == "csv") {
        std::ostringstream os;
        panelq::write_fit_csv(report, os);
        write_text(req.output, os.str());
    } else {
        write_text(req.output, panelq::to_json(report).dump(2) + "\n");
    }
    return any_ok ? 0 : 2;
}

void write_audit_csv(const panelq::SimReport& report, const std::string& path) {
    std::ostringstream os;
    os << "rep,ok,k_hat,beta_hat,se,covered,match_defined,perfect,frac_correct,"
          "failed_path_entries\n";
    char buf[64];
    for (std::size_t r = 0; r < report.records.size(); ++r) {
        const auto& rec = report.records[r];
        os << r << ',' << rec.ok << ',' << rec.k_hat << ',';
        std::snprintf(buf, sizeof buf, "%.17g", rec.beta_hat);
        os << buf << ',';
        std::snprintf(buf, sizeof buf, "%.17g", rec.se);
        os << buf << ',' << rec.covered << ',' << rec.match_defined << ',' << rec.perfect << ',';
        std::snprintf(buf, sizeof buf, "%.17g", rec.frac_correct);
        os << buf << ',' << rec.failed_path_entries << '\n';
    }
    write_text(path, os.str());
}

json table1_row(const panelq::SimReport& report) {
    json row;
    for (int k = 1; k <= 5; ++k) {
        const char* label = k == 5 ? "5+" : std::to_string(k).c_str();
        const std::string key = k == 5 ? "5+" : std::to_string(k);
        (void)label;
        row[key] = report.k_frequency.count(k) ? report.k_frequency.at(k).value : 0.0;
    }
    return row;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"panel quantile regression with grouped fixed effects"};
    app.require_subcommand(1);
    app.set_config("--config", "", "flat key=value configuration file; flags take precedence");

    // ---- fit ----------------------------------------------------------
    panelq::FitRequest req;
    std::string fit_grid = "0:0.35:0.005";
    std::string fit_bandwidth = "hall-sheather";
    auto* fit = app.add_subcommand("fit", "estimate grouped fixed effects from a panel CSV");
    fit->add_option("--input", req.input, "panel CSV (header id,time,y,<x...>)")->required();
    fit->add_option("--tau", req.taus, "quantile levels")->delimiter(',');
    fit->add_option("--grid", fit_grid, "lambda grid as lo:hi:step");
    fit->add_option("--fuse-tol", req.fuse_tol, "fusion tolerance (0 = automatic)");
    fit->add_option("--pnt-constant", req.pnt_constant, "penalty constant in p_nT");
    fit->add_option("--bandwidth", fit_bandwidth, "hall-sheather | bofinger");
    fit->add_option("--output", req.output, "output path (default stdout)");
    fit->add_option("--format", req.format, "json | csv")
        ->check(CLI::IsMember({"json", "csv"}));
    fit->add_option("--threads", req.workers, "worker cap (default: cores, PANELQ_THREADS)");

    // ---- simulate -----------------------------------------------------
    panelq::SimConfig config;
    std::string sim_grid = "0:0.35:0.005";
    std::string sim_bandwidth = "hall-sheather";
    std::string sim_model = "location";
    std::string sim_error = "normal";
    std::string sweep_spec, paper_cell, audit_path, sim_output;
    bool no_records = false;
    auto* sim = app.add_subcommand("simulate", "run a Monte Carlo cell");
    sim->add_option("--dgp", config.dgp, "1 (independent) or 2 (correlated)")
        ->check(CLI::IsMember({1, 2}));
    sim->add_option("--model", sim_model, "location | location-scale")
        ->check(CLI::IsMember({"location", "location-scale"}));
    sim->add_option("--error", sim_error, "normal | t3")->check(CLI::IsMember({"normal", "t3"}));
    sim->add_option("--n", config.n, "individuals");
    sim->add_option("--t", config.t, "periods per individual");
    sim->add_option("--tau", config.tau, "quantile level");
    sim->add_option("--reps", config.reps, "replications");
    sim->add_option("--seed", config.seed, "RNG seed");
    sim->add_option("--grid", sim_grid, "lambda grid as lo:hi:step");
    sim->add_option("--pnt-constant", config.pnt_constant, "penalty constant in p_nT");
    sim->add_option("--bandwidth", sim_bandwidth, "hall-sheather | bofinger");
    sim->add_option("--sweep-constant", sweep_spec, "sweep penalty constants lo:hi:step");
    sim->add_option("--paper-cell", paper_cell, "preset, e.g. T1-n30-T60");
    sim->add_option("--audit", audit_path, "write per-rep records CSV");
    sim->add_option("--output", sim_output, "output path (default stdout)");
    sim->add_flag("--no-records", no_records, "omit per-rep records from the JSON");
    sim->add_option("--threads", config.workers, "worker cap (default: cores, PANELQ_THREADS)");

    // ---- plotdata -----------------------------------------------------
    std::string plot_input, plot_output;
    auto* plot = app.add_subcommand("plotdata", "flatten a report into plot series CSV");
    plot->add_option("--input", plot_input, "fit or simulation report JSON")->required();
    plot->add_option("--output", plot_output, "output path (default stdout)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (fit->parsed()) {
            req.grid = parse_grid(fit_grid);
            req.bandwidth_rule = parse_bandwidth(fit_bandwidth);
            for (double tv : req.taus)
                if (!(tv > 0.0 && tv < 1.0)) fail("bad-tau", "quantile levels must lie in (0,1)");
            return cmd_fit(req);
        }

        if (sim->parsed()) {
            if (!paper_cell.empty()) {
                std::smatch m;
                if (!std::regex_match(paper_cell, m,
                                      std::regex(R"(T1-n(30|60|90)-T(15|30|60))")))
                    fail("bad-preset", "unknown paper cell '" + paper_cell + "'");
                if (!sim->count("--n")) config.n = std::stoi(m[1]);
                if (!sim->count("--t")) config.t = std::stoi(m[2]);
                if (!sim->count("--dgp")) config.dgp = 1;
                if (!sim->count("--model")) sim_model = "location";
                if (!sim->count("--error")) sim_error = "normal";
                if (!sim->count("--tau")) config.tau = 0.5;
            }
            config.model = sim_model == "location" ? panelq::ModelKind::location
                                                   : panelq::ModelKind::location_scale;
            config.error = sim_error == "normal" ? panelq::ErrorDist::normal
                                                 : panelq::ErrorDist::t3;
            config.bandwidth_rule = parse_bandwidth(sim_bandwidth);
            config.grid = parse_grid(sim_grid).build().values;
            config.validate();

            if (!sweep_spec.empty()) {
                const std::vector<double> constants = parse_constant_range(sweep_spec);
                const auto reports = panelq::constant_sweep(config, constants);
                json out;
                out["schema"] = 1;
                out["kind"] = "simulation-sweep";
                out["config"] = panelq::to_json(config);
                json arr = json::array();
                for (std::size_t c = 0; c < constants.size(); ++c)
                    arr.push_back(panelq::to_json(config, reports[c], !no_records));
                out["sweep"] = std::move(arr);
                write_text(sim_output, out.dump(2) + "\n");
                return 0;
            }

            const panelq::SimReport report = panelq::run_cell(config);
            json out = panelq::to_json(config, report, !no_records);
            if (!paper_cell.empty()) out["table_row"] = table1_row(report);
            write_text(sim_output, out.dump(2) + "\n");
            if (!audit_path.empty()) write_audit_csv(report, audit_path);
            if (report.excessive_failures)
                std::fprintf(stderr, "error[excessive-failures]: %d of %d reps failed\n",
                             report.failed_reps, report.reps);
            return report.excessive_failures ? 3 : 0;
        }

        if (plot->parsed()) {
            std::ifstream in(plot_input);
            if (!in) fail("io-open-failed", "cannot open '" + plot_input + "'");
            json report;
            try {
                report = json::parse(in);
            } catch (const std::exception& e) {
                fail("bad-json", e.what());
            }
            std::ostringstream os;
            panelq::write_plot_csv(panelq::plot_series(report), os);
            write_text(plot_output, os.str());
            return 0;
        }
    } catch (const panelq::CsvError& e) {
        std::fprintf(stderr, "error[%s]: line %zu: %s\n", e.code.c_str(), e.line, e.what());
        return 2;
    } catch (const std::exception& e) {
        fail("runtime", e.what());
    }
    return 0;
}
