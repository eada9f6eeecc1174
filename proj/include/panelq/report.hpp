#pragma once

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "panelq/csv.hpp"
#include "panelq/inference.hpp"
#include "panelq/montecarlo.hpp"
#include "panelq/selection.hpp"

namespace panelq {

using json = nlohmann::ordered_json;

struct GridSpec {
    double lo = 0.0, hi = 0.35, step = 0.005;
    LambdaGrid build() const { return LambdaGrid::regular(lo, hi, step); }
};

/// End-to-end estimation request for one panel file.
struct FitRequest {
    std::string input;
    std::vector<double> taus = {0.5};
    GridSpec grid;
    double fuse_tol = 0.0;  // 0 = automatic
    double pnt_constant = 0.1;
    BandwidthRule bandwidth_rule = BandwidthRule::hall_sheather;
    std::string output;
    std::string format = "json";  // json | csv
    SolverSettings solver;
    int workers = 0;
};

struct CoefficientReport {
    std::string name;
    double estimate = 0.0;
    double se = 0.0;
    double ci_lo = 0.0, ci_hi = 0.0;
};

struct TauBlock {
    double tau = 0.0;
    bool ok = false;
    std::string error;
    FixedEffectsFit fe;
    struct PathRow {
        double lambda;
        int k;
        double loss;
        int iterations;
        std::string status;
    };
    std::vector<PathRow> path;
    struct IcRow {
        int k;
        double lambda;
        double ic;
    };
    std::vector<IcRow> ic_table;
    int k_hat = 0;
    std::vector<int> membership;                  // per individual, 0-based groups
    std::vector<CoefficientReport> coefficients;  // group centers then slopes
    double c_hat = 0.0, p_nt = 0.0, s_hat = 0.0, bandwidth = 0.0, cov_bandwidth = 0.0;
    int solver_iterations = 0;
};

struct FitReport {
    std::vector<std::int64_t> unit_labels;
    std::vector<std::string> x_names;
    int n = 0, p = 0;
    std::size_t rows = 0;
    std::vector<TauBlock> blocks;
};

/// Runs the full pipeline (preliminary fit, path, selection, inference) for
/// every requested quantile level.
inline FitReport run_fit(const PanelData& data, const FitRequest& req) {
    FitReport report;
    report.unit_labels = data.unit_labels;
    if (report.unit_labels.empty())
        for (int i = 0; i < data.n; ++i) report.unit_labels.push_back(i + 1);
    report.x_names = data.x_names;
    if (report.x_names.empty())
        for (int j = 0; j < data.p; ++j) report.x_names.push_back("x" + std::to_string(j + 1));
    report.n = data.n;
    report.p = data.p;
    report.rows = data.rows();

    const LambdaGrid grid = req.grid.build();
    for (double tv : req.taus) {
        TauBlock block;
        block.tau = tv;
        try {
            const QuantileLevel tau(tv);
            const FixedEffectsFit fe = fit_fixed_effects(data, tau, req.solver);
            block.fe = fe;

            LambdaPathResult path = run_lambda_path(data, tau, grid, fe, req.solver, req.workers);
            if (req.fuse_tol > 0.0) {
                path.fuse_tol = req.fuse_tol;
                for (auto& e : path.entries)
                    if (e.converged) e.grouping = extract_groups(e.alpha, path.fuse_tol);
            }
            for (const auto& e : path.entries) {
                block.solver_iterations += e.report.iterations;
                block.path.push_back({e.lambda, e.converged ? e.grouping.k : 0,
                                      e.converged ? total_check_loss(data, tau, e.alpha, e.beta)
                                                  : std::numeric_limits<double>::quiet_NaN(),
                                      e.report.iterations, to_string(e.report.status)});
            }

            const IcSelection sel =
                select_by_ic(path, data, tau, fe, req.pnt_constant, req.bandwidth_rule,
                             req.solver, req.workers);
            for (const auto& e : sel.entries) block.ic_table.push_back({e.k, e.lambda, e.ic_value});
            block.k_hat = sel.selected().k;
            block.membership = sel.selected().grouping.membership;
            block.c_hat = sel.c_hat;
            block.p_nt = sel.p_nt;
            block.s_hat = sel.s_hat;
            block.bandwidth = sel.bandwidth;

            const auto& chosen = sel.selected();
            const CovarianceEstimate cov = sandwich_covariance(
                data, tau, chosen.grouping, chosen.refit, req.bandwidth_rule, req.solver);
            block.cov_bandwidth = cov.bandwidth;
            const double z = normal_quantile(0.975);
            for (int g = 0; g < chosen.k; ++g) {
                CoefficientReport c;
                c.name = "group" + std::to_string(g + 1);
                c.estimate = chosen.refit.centers[g];
                c.se = std::sqrt(std::max(0.0, cov.matrix(g, g)));
                c.ci_lo = c.estimate - z * c.se;
                c.ci_hi = c.estimate + z * c.se;
                block.coefficients.push_back(std::move(c));
            }
            for (int j = 0; j < data.p; ++j) {
                CoefficientReport c;
                c.name = report.x_names[j];
                c.estimate = chosen.refit.beta[j];
                c.se = std::sqrt(std::max(0.0, cov.matrix(chosen.k + j, chosen.k + j)));
                c.ci_lo = c.estimate - z * c.se;
                c.ci_hi = c.estimate + z * c.se;
                block.coefficients.push_back(std::move(c));
            }
            block.ok = true;
        } catch (const std::exception& err) {
            block.ok = false;
            block.error = err.what();
        }
        report.blocks.push_back(std::move(block));
    }
    return report;
}

inline json to_json(const FitReport& r) {
    json out;
    out["schema"] = 1;
    out["kind"] = "fit";
    out["n"] = r.n;
    out["p"] = r.p;
    out["rows"] = r.rows;
    out["units"] = r.unit_labels;
    out["covariates"] = r.x_names;
    json blocks = json::array();
    for (const auto& b : r.blocks) {
        json jb;
        jb["tau"] = b.tau;
        jb["ok"] = b.ok;
        if (!b.ok) {
            jb["error"] = b.error;
            blocks.push_back(std::move(jb));
            continue;
        }
        jb["fe"] = {{"alpha", b.fe.alpha}, {"beta", b.fe.beta}, {"objective", b.fe.objective}};
        json path = json::array();
        for (const auto& p : b.path)
            path.push_back({{"lambda", p.lambda},
                            {"k", p.k},
                            {"loss", p.loss},
                            {"iterations", p.iterations},
                            {"status", p.status}});
        jb["path"] = std::move(path);
        json ic = json::array();
        for (const auto& e : b.ic_table)
            ic.push_back({{"k", e.k}, {"lambda", e.lambda}, {"ic", e.ic}});
        jb["ic"] = std::move(ic);
        jb["selected_k"] = b.k_hat;
        jb["membership"] = b.membership;
        json coefs = json::array();
        for (const auto& c : b.coefficients)
            coefs.push_back({{"name", c.name},
                             {"estimate", c.estimate},
                             {"se", c.se},
                             {"ci_lo", c.ci_lo},
                             {"ci_hi", c.ci_hi}});
        jb["coefficients"] = std::move(coefs);
        jb["diagnostics"] = {{"c_hat", b.c_hat},
                             {"p_nt", b.p_nt},
                             {"sparsity", b.s_hat},
                             {"bandwidth_ic", b.bandwidth},
                             {"bandwidth_cov", b.cov_bandwidth},
                             {"solver_iterations", b.solver_iterations}};
        blocks.push_back(std::move(jb));
    }
    out["taus"] = std::move(blocks);
    return out;
}

inline json to_json(const SimConfig& c) {
    json out;
    out["dgp"] = c.dgp;
    out["model"] = to_string(c.model);
    out["error"] = to_string(c.error);
    out["n"] = c.n;
    out["t"] = c.t;
    out["tau"] = c.tau;
    out["reps"] = c.reps;
    out["seed"] = c.seed;
    out["grid"] = {{"lo", c.grid.front()}, {"hi", c.grid.back()}, {"count", c.grid.size()}};
    out["pnt_constant"] = c.pnt_constant;
    out["bandwidth"] = to_string(c.bandwidth_rule);
    return out;
}

inline json to_json(const Aggregate& a) { return json{{"value", a.value}, {"se", a.se}}; }

inline json to_json(const SimConfig& config, const SimReport& r, bool with_records = true) {
    json out;
    out["schema"] = 1;
    out["kind"] = "simulation";
    out["config"] = to_json(config);
    out["pnt_constant"] = r.pnt_constant;
    out["reps"] = r.reps;
    out["failed_reps"] = r.failed_reps;
    out["excessive_failures"] = r.excessive_failures;
    json kf;
    for (const auto& [k, agg] : r.k_frequency)
        kf[k >= 5 ? std::string("5+") : std::to_string(k)] = to_json(agg);
    out["k_frequency"] = std::move(kf);
    out["beta_bias"] = to_json(r.beta_bias);
    out["beta_rmse"] = to_json(r.beta_rmse);
    out["coverage"] = to_json(r.coverage);
    out["perfect_match"] = to_json(r.perfect_match);
    out["avg_match"] = to_json(r.avg_match);
    out["match_sd"] = r.match_sd;
    out["match_reps"] = r.match_reps;
    out["true_beta"] = true_beta_for(config);
    if (with_records) {
        json recs = json::array();
        for (const auto& rec : r.records)
            recs.push_back({{"ok", rec.ok},
                            {"k_hat", rec.k_hat},
                            {"beta_hat", rec.beta_hat},
                            {"se", rec.se},
                            {"covered", rec.covered},
                            {"match_defined", rec.match_defined},
                            {"perfect", rec.perfect},
                            {"frac_correct", rec.frac_correct},
                            {"failed_path_entries", rec.failed_path_entries}});
        out["records"] = std::move(recs);
    }
    return out;
}

namespace detail {
inline std::string g17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}
}  // namespace detail

/// Flat CSV rendition of a fit report; same numbers as the JSON form in a
/// spreadsheet-friendly layout.
inline void write_fit_csv(const FitReport& r, std::ostream& out) {
    out << "tau,block,name,index,value,se,lo,hi\n";
    using detail::g17;
    for (const auto& b : r.blocks) {
        const std::string t = g17(b.tau);
        if (!b.ok) {
            out << t << ",error," << b.error << ",,,,,\n";
            continue;
        }
        out << t << ",selected_k,," << b.k_hat << "," << b.k_hat << ",,,\n";
        for (const auto& c : b.coefficients)
            out << t << ",coefficient," << c.name << ",," << g17(c.estimate) << "," << g17(c.se)
                << "," << g17(c.ci_lo) << "," << g17(c.ci_hi) << "\n";
        for (std::size_t i = 0; i < b.membership.size(); ++i)
            out << t << ",membership," << r.unit_labels[i] << "," << i << ","
                << (b.membership[i] + 1) << ",,,\n";
        for (std::size_t i = 0; i < b.fe.alpha.size(); ++i)
            out << t << ",fe_alpha," << r.unit_labels[i] << "," << i << "," << g17(b.fe.alpha[i])
                << ",,,\n";
        for (const auto& p : b.path)
            out << t << ",path," << g17(p.lambda) << "," << p.k << "," << g17(p.loss) << ",,,\n";
        for (const auto& e : b.ic_table)
            out << t << ",ic," << g17(e.lambda) << "," << e.k << "," << g17(e.ic) << ",,,\n";
        out << t << ",diagnostics,c_hat,," << g17(b.c_hat) << ",,,\n";
        out << t << ",diagnostics,p_nt,," << g17(b.p_nt) << ",,,\n";
        out << t << ",diagnostics,sparsity,," << g17(b.s_hat) << ",,,\n";
        out << t << ",diagnostics,bandwidth_ic,," << g17(b.bandwidth) << ",,,\n";
    }
}

/// Long-format plot series: one row per (series, x) point.
struct PlotRow {
    std::string series;
    double x = 0.0, y = 0.0;
    std::optional<double> lo, hi;
};

inline std::vector<PlotRow> plot_series(const json& report) {
    std::vector<PlotRow> rows;
    if (!report.contains("kind")) throw std::runtime_error("unknown report schema");
    const std::string kind = report["kind"];
    if (kind == "fit") {
        for (const auto& b : report["taus"]) {
            if (!b["ok"].get<bool>()) continue;
            const double tau = b["tau"];
            for (const auto& c : b["coefficients"])
                rows.push_back({"coef:" + c["name"].get<std::string>(), tau, c["estimate"],
                                c["ci_lo"].get<double>(), c["ci_hi"].get<double>()});
        }
        for (const auto& b : report["taus"]) {
            if (!b["ok"].get<bool>()) continue;
            const std::string t = detail::g17(b["tau"].get<double>());
            std::vector<double> alpha = b["fe"]["alpha"].get<std::vector<double>>();
            std::vector<int> member = b["membership"].get<std::vector<int>>();
            // group centers per individual, overlaid on the sorted alpha
            std::vector<double> centers;
            for (const auto& c : b["coefficients"]) {
                const std::string name = c["name"];
                if (name.rfind("group", 0) == 0) centers.push_back(c["estimate"]);
            }
            std::vector<std::size_t> order(alpha.size());
            std::iota(order.begin(), order.end(), 0);
            std::sort(order.begin(), order.end(),
                      [&](std::size_t a, std::size_t bq) { return alpha[a] < alpha[bq]; });
            for (std::size_t rank = 0; rank < order.size(); ++rank) {
                const std::size_t i = order[rank];
                rows.push_back({"alpha_fe@" + t, static_cast<double>(rank + 1), alpha[i],
                                std::nullopt, std::nullopt});
                rows.push_back({"alpha_group@" + t, static_cast<double>(rank + 1),
                                centers[member[i]], std::nullopt, std::nullopt});
            }
        }
        return rows;
    }
    if (kind == "simulation") {
        const auto& kf = report["k_frequency"];
        for (auto it = kf.begin(); it != kf.end(); ++it) {
            const double k = it.key() == "5+" ? 5.0 : std::stod(it.key());
            const double v = it.value()["value"], se = it.value()["se"];
            rows.push_back({"k_frequency", k, v, v - 1.959963984540054 * se,
                            v + 1.959963984540054 * se});
        }
        for (const char* name : {"beta_bias", "beta_rmse", "coverage", "perfect_match",
                                 "avg_match"}) {
            const double v = report[name]["value"], se = report[name]["se"];
            rows.push_back({name, 0.0, v, v - 1.959963984540054 * se,
                            v + 1.959963984540054 * se});
        }
        return rows;
    }
    throw std::runtime_error("unknown report schema");
}

inline void write_plot_csv(const std::vector<PlotRow>& rows, std::ostream& out) {
    out << "series,x,y,lo,hi\n";
    using detail::g17;
    for (const auto& r : rows) {
        out << r.series << ',' << g17(r.x) << ',' << g17(r.y) << ',';
        if (r.lo) out << g17(*r.lo);
        out << ',';
        if (r.hi) out << g17(*r.hi);
        out << '\n';
    }
}

}  // namespace panelq
