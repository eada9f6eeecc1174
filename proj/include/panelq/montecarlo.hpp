#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "panelq/grouping.hpp"
#include "panelq/inference.hpp"
#include "panelq/parallel.hpp"
#include "panelq/rng.hpp"
#include "panelq/selection.hpp"
#include "panelq/stats.hpp"

namespace panelq {

enum class ErrorDist { normal, t3 };
enum class ModelKind { location, location_scale };

inline const char* to_string(ErrorDist e) { return e == ErrorDist::normal ? "normal" : "t3"; }
inline const char* to_string(ModelKind m) {
    return m == ModelKind::location ? "location" : "location-scale";
}

/// Simulation cell configuration. DGP 1 draws covariates independently of
/// the group effects (rho = 0); DGP 2 couples them with rho = 0.5. True
/// slope and scale shift are beta = 1 and gamma = 1/10.
struct SimConfig {
    int dgp = 1;
    ModelKind model = ModelKind::location;
    ErrorDist error = ErrorDist::normal;
    int n = 30;
    int t = 60;
    double tau = 0.5;
    int reps = 200;
    std::uint64_t seed = 0;
    std::vector<double> grid = LambdaGrid::regular(0.0, 0.35, 0.005).values;
    double pnt_constant = 0.1;
    BandwidthRule bandwidth_rule = BandwidthRule::hall_sheather;
    SolverSettings solver;
    int workers = 0;

    double rho() const { return dgp == 2 ? 0.5 : 0.0; }
    void validate() const {
        if (dgp != 1 && dgp != 2) throw std::invalid_argument("dgp must be 1 or 2");
        if (n < 3) throw std::invalid_argument("designs need at least three individuals");
        if (t < 2) throw std::invalid_argument("need at least two periods");
        if (reps < 1) throw std::invalid_argument("need at least one replication");
        (void)QuantileLevel(tau);
        (void)LambdaGrid(grid);
    }
};

struct GeneratedPanel {
    PanelData data;
    GroupStructure truth;             // groups at this tau
    std::vector<double> true_alpha;   // per-individual alpha_i(tau)
    double true_beta = 1.0;           // beta(tau)
};

inline double error_quantile(ErrorDist e, double tau) {
    return e == ErrorDist::normal ? normal_quantile(tau) : student_t3_quantile(tau);
}

/// True slope at the configured quantile level.
inline double true_beta_for(const SimConfig& config) {
    const double finv = error_quantile(config.error, config.tau);
    return 1.0 + (config.model == ModelKind::location_scale ? 0.1 * finv : 0.0);
}

/// Three groups with centers {1,2,3} in blocks as even as possible, extra
/// individuals going to the smallest centers first. X = rho*alpha_i +
/// gamma_i + v with standard normal gamma_i, v; errors are standard normal
/// or raw t3. Deterministic given (seed, rep_index).
inline GeneratedPanel generate_panel(const SimConfig& config, std::uint64_t rep_index) {
    config.validate();
    RepRng rng(config.seed, rep_index);
    const double beta = 1.0, gamma = 0.1;
    const int n = config.n, t = config.t;

    GeneratedPanel out;
    out.data.n = n;
    out.data.p = 1;
    out.data.t_len.assign(n, t);
    out.truth.k = 3;
    out.truth.membership.resize(n);

    const int base = n / 3, extra = n % 3;
    std::vector<int> sizes = {base + (extra > 0 ? 1 : 0), base + (extra > 1 ? 1 : 0), base};
    const double finv = error_quantile(config.error, config.tau);
    for (int g = 0; g < 3; ++g) out.truth.centers.push_back(1.0 + g + finv);
    out.true_beta = beta + (config.model == ModelKind::location_scale ? gamma * finv : 0.0);

    int i = 0;
    for (int g = 0; g < 3; ++g)
        for (int c = 0; c < sizes[g]; ++c, ++i) out.truth.membership[i] = g;

    out.true_alpha.resize(n);
    for (i = 0; i < n; ++i) {
        const double alpha0 = 1.0 + out.truth.membership[i];
        out.true_alpha[i] = alpha0 + finv;
        const double gamma_i = rng.normal();
        for (int s = 0; s < t; ++s) {
            const double v = rng.normal();
            const double u = config.error == ErrorDist::normal ? rng.normal() : rng.student_t3();
            const double x = config.rho() * alpha0 + gamma_i + v;
            const double y = alpha0 + x * beta +
                             (config.model == ModelKind::location_scale ? (1.0 + x * gamma) * u : u);
            out.data.x.push_back(x);
            out.data.id.push_back(i);
            out.data.y.push_back(y);
        }
    }
    out.data.validate();
    return out;
}

struct RepRecord {
    bool ok = false;             // full pipeline converged
    int k_hat = 0;
    double beta_hat = 0.0;
    double se = 0.0;
    bool covered = false;
    bool match_defined = false;  // some path entry attained the true K
    bool perfect = false;
    double frac_correct = 0.0;
    int failed_path_entries = 0;
    double worst_gap = 0.0;      // certificates over all converged solves
    double worst_box = 0.0;
};

struct Aggregate {
    double value = 0.0;
    double se = 0.0;
};

struct SimReport {
    int reps = 0;
    int failed_reps = 0;
    bool excessive_failures = false;       // more than 1% of reps lost
    double pnt_constant = 0.1;
    std::map<int, Aggregate> k_frequency;  // key 5 aggregates K >= 5
    Aggregate beta_bias, beta_rmse, coverage;
    Aggregate perfect_match, avg_match;
    double match_sd = 0.0;
    int match_reps = 0;
    std::vector<RepRecord> records;
};

namespace detail {

// Everything about one replication that does not depend on the IC penalty
// constant; covariances are attached lazily per candidate group count.
struct RepCache {
    bool ok = false;
    int failed_path_entries = 0;
    GeneratedPanel gen;
    double worst_gap = 0.0;
    double worst_box = 0.0;
    double c_hat = 0.0;
    double pnt_base = 0.0;            // n * mean(T)^(1/4)
    bool match_defined = false;
    bool perfect = false;
    double frac_correct = 0.0;
    struct Candidate {
        int k = 0;
        double refit_objective = 0.0;
        RefitResult refit;
        GroupStructure grouping;
        bool cov_ready = false;
        double beta_se = 0.0;
        bool cov_failed = false;
    };
    std::vector<Candidate> candidates;
};

inline RepCache build_rep_cache(const SimConfig& config, std::uint64_t rep) {
    RepCache cache;
    cache.gen = generate_panel(config, rep);
    const QuantileLevel tau(config.tau);
    auto track = [&cache](const SolverReport& r) {
        if (r.status != SolveStatus::converged) return;
        cache.worst_gap = std::max(cache.worst_gap, r.duality_gap);
        cache.worst_box = std::max(cache.worst_box, r.dual_box_violation);
    };

    FixedEffectsFit fe;
    {
        const SolverReport rep_fe =
            solve_weighted_qr(build_fe_problem(cache.gen.data, tau), config.solver);
        if (rep_fe.status == SolveStatus::numerical_failure) return cache;  // rep lost
        track(rep_fe);
        fe.alpha.assign(rep_fe.solution.begin(), rep_fe.solution.begin() + cache.gen.data.n);
        fe.beta.assign(rep_fe.solution.begin() + cache.gen.data.n, rep_fe.solution.end());
        fe.objective = rep_fe.primal_objective;
    }

    const LambdaGrid grid{std::vector<double>(config.grid)};
    // replications parallelize across reps; path entries stay sequential
    LambdaPathResult path = run_lambda_path(cache.gen.data, tau, grid, fe, config.solver, 1);
    for (const auto& e : path.entries) {
        if (!e.converged) ++cache.failed_path_entries;
        track(e.report);
    }

    // membership metrics at the smallest lambda attaining the true K
    for (const auto& e : path.entries) {
        if (!e.converged || e.grouping.k != cache.gen.truth.k) continue;
        const MatchMetrics m = match_metrics(e.grouping, cache.gen.truth);
        cache.match_defined = true;
        cache.perfect = m.perfect;
        cache.frac_correct = m.frac_correct;
        break;
    }

    IcConstants c;
    try {
        c = ic_constants(cache.gen.data, tau, fe, 1.0, config.bandwidth_rule);
    } catch (const std::exception&) {
        return cache;
    }
    cache.c_hat = c.c_hat;
    cache.pnt_base = c.p_nt;  // computed with constant 1, rescaled at selection

    try {
        for (const auto& e : path.entries) {
            if (!e.converged) continue;
            bool seen = false;
            for (const auto& cand : cache.candidates)
                if (cand.k == e.grouping.k) seen = true;
            if (seen) continue;
            RepCache::Candidate cand;
            cand.k = e.grouping.k;
            cand.grouping = e.grouping;
            cand.refit = refit(cache.gen.data, tau, e.grouping, config.solver);
            cand.refit_objective = cand.refit.objective;
            track(cand.refit.report);
            cache.candidates.push_back(std::move(cand));
        }
    } catch (const std::exception&) {
        return cache;
    }
    cache.ok = !cache.candidates.empty();
    return cache;
}

inline RepRecord evaluate_rep(const SimConfig& config, RepCache& cache, double pnt_constant) {
    RepRecord rec;
    rec.failed_path_entries = cache.failed_path_entries;
    rec.match_defined = cache.match_defined;
    rec.perfect = cache.perfect;
    rec.frac_correct = cache.frac_correct;
    rec.worst_gap = cache.worst_gap;
    rec.worst_box = cache.worst_box;
    if (!cache.ok) return rec;

    const double p_nt = pnt_constant * cache.pnt_base;
    int chosen = -1;
    for (std::size_t i = 0; i < cache.candidates.size(); ++i) {
        const auto& cand = cache.candidates[i];
        const double ic = cand.refit_objective + cache.c_hat * cand.k * p_nt;
        if (chosen < 0) {
            chosen = static_cast<int>(i);
            continue;
        }
        const auto& best = cache.candidates[chosen];
        const double best_ic = best.refit_objective + cache.c_hat * best.k * p_nt;
        if (ic < best_ic || (ic == best_ic && cand.k < best.k)) chosen = static_cast<int>(i);
    }
    auto& cand = cache.candidates[chosen];
    if (!cand.cov_ready && !cand.cov_failed) {
        try {
            const auto cov = sandwich_covariance(cache.gen.data, QuantileLevel(config.tau),
                                                 cand.grouping, cand.refit,
                                                 config.bandwidth_rule, config.solver);
            cand.beta_se = std::sqrt(std::max(0.0, cov.matrix(cand.k, cand.k)));
            cand.cov_ready = true;
            cache.worst_gap = std::max(cache.worst_gap, cov.aux_worst_gap);
            cache.worst_box = std::max(cache.worst_box, cov.aux_worst_box);
            rec.worst_gap = cache.worst_gap;
            rec.worst_box = cache.worst_box;
        } catch (const std::exception&) {
            cand.cov_failed = true;
        }
    }
    if (cand.cov_failed) return rec;

    rec.ok = true;
    rec.k_hat = cand.k;
    rec.beta_hat = cand.refit.beta[0];
    rec.se = cand.beta_se;
    const double z = normal_quantile(0.975);
    rec.covered = std::abs(rec.beta_hat - cache.gen.true_beta) <= z * rec.se;
    return rec;
}

inline SimReport aggregate(const SimConfig& config, double pnt_constant,
                           std::vector<RepRecord> records) {
    SimReport rep;
    rep.reps = config.reps;
    rep.pnt_constant = pnt_constant;
    rep.records = std::move(records);

    const double true_beta = true_beta_for(config);
    int ok = 0;
    std::map<int, int> k_counts;
    double bias_sum = 0.0, sq_sum = 0.0;
    int covered = 0;
    std::vector<double> errors;
    for (const auto& r : rep.records) {
        if (!r.ok) {
            ++rep.failed_reps;
            continue;
        }
        ++ok;
        ++k_counts[std::min(r.k_hat, 5)];
        if (r.covered) ++covered;
        errors.push_back(r.beta_hat - true_beta);
    }
    for (double e : errors) {
        bias_sum += e;
        sq_sum += e * e;
    }

    rep.excessive_failures = rep.failed_reps > 0 && rep.failed_reps * 100 > rep.reps;
    if (ok > 0) {
        const double okd = ok;
        for (const auto& [k, cnt] : k_counts) {
            Aggregate a;
            a.value = cnt / okd;
            a.se = std::sqrt(a.value * (1.0 - a.value) / okd);
            rep.k_frequency[k] = a;
        }
        rep.beta_bias.value = bias_sum / okd;
        const double mse = sq_sum / okd;
        rep.beta_rmse.value = std::sqrt(mse);
        double var_e = 0.0, var_sq = 0.0;
        for (double e : errors) {
            var_e += (e - rep.beta_bias.value) * (e - rep.beta_bias.value);
            var_sq += (e * e - mse) * (e * e - mse);
        }
        rep.beta_bias.se = ok > 1 ? std::sqrt(var_e / (okd - 1) / okd) : 0.0;
        rep.beta_rmse.se = (ok > 1 && rep.beta_rmse.value > 0.0)
                               ? std::sqrt(var_sq / (okd - 1) / okd) / (2.0 * rep.beta_rmse.value)
                               : 0.0;
        rep.coverage.value = covered / okd;
        rep.coverage.se = std::sqrt(rep.coverage.value * (1.0 - rep.coverage.value) / okd);
    }

    int match_n = 0, perfect = 0;
    double frac_sum = 0.0;
    for (const auto& r : rep.records)
        if (r.match_defined) {
            ++match_n;
            perfect += r.perfect ? 1 : 0;
            frac_sum += r.frac_correct;
        }
    rep.match_reps = match_n;
    if (match_n > 0) {
        rep.perfect_match.value = static_cast<double>(perfect) / match_n;
        rep.perfect_match.se =
            std::sqrt(rep.perfect_match.value * (1.0 - rep.perfect_match.value) / match_n);
        rep.avg_match.value = frac_sum / match_n;
        double var = 0.0;
        for (const auto& r : rep.records)
            if (r.match_defined)
                var += (r.frac_correct - rep.avg_match.value) *
                       (r.frac_correct - rep.avg_match.value);
        rep.match_sd = match_n > 1 ? std::sqrt(var / (match_n - 1)) : 0.0;
        rep.avg_match.se = match_n > 1 ? rep.match_sd / std::sqrt(match_n) : 0.0;
    }
    return rep;
}

}  // namespace detail

/// Runs the full pipeline once per replication for each penalty constant,
/// sharing the path and refits across constants. Reports are aligned with
/// `constants`.
inline std::vector<SimReport> constant_sweep(const SimConfig& config,
                                             const std::vector<double>& constants) {
    config.validate();
    if (constants.empty()) throw std::invalid_argument("no penalty constants given");
    std::vector<std::vector<RepRecord>> records(constants.size());
    for (auto& r : records) r.resize(config.reps);

    parallel_for(
        config.reps,
        [&](std::size_t rep) {
            detail::RepCache cache = detail::build_rep_cache(config, rep);
            for (std::size_t c = 0; c < constants.size(); ++c)
                records[c][rep] = detail::evaluate_rep(config, cache, constants[c]);
        },
        config.workers);

    std::vector<SimReport> reports;
    reports.reserve(constants.size());
    for (std::size_t c = 0; c < constants.size(); ++c)
        reports.push_back(detail::aggregate(config, constants[c], std::move(records[c])));
    return reports;
}

/// One simulation cell at the configured penalty constant.
inline SimReport run_cell(const SimConfig& config) {
    return constant_sweep(config, {config.pnt_constant}).front();
}

}  // namespace panelq
