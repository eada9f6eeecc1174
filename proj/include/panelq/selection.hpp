#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "panelq/grouping.hpp"
#include "panelq/parallel.hpp"
#include "panelq/problems.hpp"
#include "panelq/stats.hpp"

namespace panelq {

enum class BandwidthRule { hall_sheather, bofinger };

inline const char* to_string(BandwidthRule r) {
    return r == BandwidthRule::hall_sheather ? "hall-sheather" : "bofinger";
}

namespace detail {
inline double clip_bandwidth(double h, double tau) {
    const double cap = 0.99 * std::min(tau, 1.0 - tau);
    return std::min(h, cap);
}
}  // namespace detail

/// Hall-Sheather plug-in bandwidth for sparsity estimation at tau,
/// h = m^{-1/3} z_{1-a/2}^{2/3} [1.5 phi^2(z_tau) / (2 z_tau^2 + 1)]^{1/3},
/// clipped so that tau +/- h stays inside (0,1).
inline double hall_sheather_bandwidth(QuantileLevel tau, std::size_t m,
                                      double alpha_level = 0.05) {
    if (m < 2) throw std::invalid_argument("bandwidth needs at least two observations");
    const double za = normal_quantile(1.0 - alpha_level / 2.0);
    const double zt = normal_quantile(tau.value);
    const double f = normal_pdf(zt);
    const double h = std::pow(static_cast<double>(m), -1.0 / 3.0) * std::pow(za, 2.0 / 3.0) *
                     std::pow(1.5 * f * f / (2.0 * zt * zt + 1.0), 1.0 / 3.0);
    return detail::clip_bandwidth(h, tau.value);
}

/// Bofinger bandwidth, h = m^{-1/5} [4.5 phi^4(z_tau)/(2 z_tau^2+1)^2]^{1/5}.
inline double bofinger_bandwidth(QuantileLevel tau, std::size_t m) {
    if (m < 2) throw std::invalid_argument("bandwidth needs at least two observations");
    const double zt = normal_quantile(tau.value);
    const double f = normal_pdf(zt);
    const double d = 2.0 * zt * zt + 1.0;
    const double h = std::pow(static_cast<double>(m), -0.2) *
                     std::pow(4.5 * f * f * f * f / (d * d), 0.2);
    return detail::clip_bandwidth(h, tau.value);
}

inline double bandwidth(BandwidthRule rule, QuantileLevel tau, std::size_t m,
                        double alpha_level = 0.05) {
    return rule == BandwidthRule::hall_sheather ? hall_sheather_bandwidth(tau, m, alpha_level)
                                                : bofinger_bandwidth(tau, m);
}

/// Difference-quotient sparsity estimate from a residual sample:
/// (F^-1(tau+h) - F^-1(tau-h)) / (2h) with the type-1 (left-continuous
/// inverse) empirical quantile.
inline double sparsity_from_residuals(std::vector<double> residuals, QuantileLevel tau, double h) {
    if (residuals.empty()) throw std::invalid_argument("no residuals");
    if (!(tau.value - h > 0.0 && tau.value + h < 1.0))
        throw std::invalid_argument("bandwidth leaves (0,1)");
    std::sort(residuals.begin(), residuals.end());
    const double m = static_cast<double>(residuals.size());
    auto type1 = [&](double q) {
        std::size_t k = static_cast<std::size_t>(std::ceil(q * m));
        k = std::clamp<std::size_t>(k, 1, residuals.size());
        return residuals[k - 1];
    };
    return (type1(tau.value + h) - type1(tau.value - h)) / (2.0 * h);
}

inline double sparsity_estimate(const PanelData& data, const FixedEffectsFit& fe_fit,
                                QuantileLevel tau, double h) {
    return sparsity_from_residuals(residuals(data, fe_fit.alpha, fe_fit.beta), tau, h);
}

struct IcConstants {
    double c_hat = 0.0;     // tau(1-tau) * sparsity, floored at c_min
    double p_nt = 0.0;      // pnt_constant * n * mean(T)^(1/4)
    double s_hat = 0.0;     // raw sparsity estimate
    double bandwidth = 0.0;
};

inline IcConstants ic_constants(const PanelData& data, QuantileLevel tau,
                                const FixedEffectsFit& fe_fit, double pnt_constant = 0.1,
                                BandwidthRule rule = BandwidthRule::hall_sheather,
                                double c_min = 1e-3) {
    IcConstants c;
    c.bandwidth = bandwidth(rule, tau, data.rows());
    c.s_hat = sparsity_estimate(data, fe_fit, tau, c.bandwidth);
    c.c_hat = std::max(tau.value * (1.0 - tau.value) * c.s_hat, c_min);
    c.p_nt = pnt_constant * static_cast<double>(data.n) * std::pow(data.mean_t(), 0.25);
    return c;
}

/// Group-conditional refit: one free intercept per group plus the slope
/// block, same solver with the intercept block collapsed.
struct RefitResult {
    std::vector<double> centers;  // size k, aligned with grouping labels
    std::vector<double> beta;     // size p
    double objective = 0.0;       // total check loss of the refit
    SolverReport report;
};

inline QrProblem build_refit_problem(const PanelData& data, QuantileLevel tau,
                                     const GroupStructure& grouping) {
    if (static_cast<int>(grouping.membership.size()) != data.n)
        throw std::invalid_argument("grouping does not cover the panel");
    QrProblem pb;
    pb.num_alpha = grouping.k;
    pb.num_covariates = data.p;
    pb.rows.reserve(data.rows());
    pb.x = data.x;
    for (std::size_t r = 0; r < data.rows(); ++r) {
        const int g = grouping.membership[data.id[r]];
        if (g < 0 || g >= grouping.k) throw std::invalid_argument("invalid group label");
        pb.rows.push_back({g, data.y[r], tau.value, 1.0});
    }
    return pb;
}

inline RefitResult refit(const PanelData& data, QuantileLevel tau, const GroupStructure& grouping,
                         const SolverSettings& cfg = {}) {
    const QrProblem pb = build_refit_problem(data, tau, grouping);
    RefitResult out;
    out.report = solve_weighted_qr(pb, cfg);
    if (out.report.status == SolveStatus::numerical_failure)
        throw std::runtime_error("refit failed");
    out.centers.assign(out.report.solution.begin(), out.report.solution.begin() + grouping.k);
    out.beta.assign(out.report.solution.begin() + grouping.k, out.report.solution.end());
    out.objective = out.report.primal_objective;
    return out;
}

struct IcEntry {
    int k = 0;
    double lambda = 0.0;   // smallest grid value attaining this group count
    double ic_value = 0.0;
    RefitResult refit;
    GroupStructure grouping;
};

struct IcSelection {
    std::vector<IcEntry> entries;  // one per distinct group count, grid order
    int chosen = -1;
    double c_hat = 0.0;
    double p_nt = 0.0;
    double s_hat = 0.0;
    double bandwidth = 0.0;

    const IcEntry& selected() const {
        if (chosen < 0) throw std::logic_error("no model selected");
        return entries[chosen];
    }
    /// Final per-individual intercepts via the selected grouping.
    std::vector<double> alpha_per_individual() const {
        const IcEntry& e = selected();
        std::vector<double> a(e.grouping.membership.size());
        for (std::size_t i = 0; i < a.size(); ++i)
            a[i] = e.refit.centers[e.grouping.membership[i]];
        return a;
    }
};

/// Argmin over candidates; ties break toward the smaller group count.
inline int pick_ic_argmin(const std::vector<IcEntry>& entries) {
    int chosen = -1;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        if (chosen < 0 || entries[i].ic_value < entries[chosen].ic_value ||
            (entries[i].ic_value == entries[chosen].ic_value && entries[i].k < entries[chosen].k))
            chosen = static_cast<int>(i);
    }
    return chosen;
}

/// Information-criterion model selection over the path: deduplicate entries
/// by distinct group count (keeping the smallest lambda for each), refit
/// each candidate, and minimize refit loss + c_hat * K * p_nt. Ties break
/// toward the smaller group count.
inline IcSelection select_by_ic(const LambdaPathResult& path, const PanelData& data,
                                QuantileLevel tau, const FixedEffectsFit& fe_fit,
                                double pnt_constant = 0.1,
                                BandwidthRule rule = BandwidthRule::hall_sheather,
                                const SolverSettings& cfg = {}, int workers = 0) {
    IcSelection sel;
    const IcConstants c = ic_constants(data, tau, fe_fit, pnt_constant, rule);
    sel.c_hat = c.c_hat;
    sel.p_nt = c.p_nt;
    sel.s_hat = c.s_hat;
    sel.bandwidth = c.bandwidth;

    std::vector<const LambdaPathEntry*> distinct;
    for (const LambdaPathEntry& e : path.entries) {
        if (!e.converged) continue;
        bool seen = false;
        for (const auto* d : distinct)
            if (d->grouping.k == e.grouping.k) seen = true;
        if (!seen) distinct.push_back(&e);
    }
    if (distinct.empty()) throw std::runtime_error("no converged path entries to select from");

    sel.entries.resize(distinct.size());
    parallel_for(
        distinct.size(),
        [&](std::size_t i) {
            IcEntry& entry = sel.entries[i];
            entry.k = distinct[i]->grouping.k;
            entry.lambda = distinct[i]->lambda;
            entry.grouping = distinct[i]->grouping;
            entry.refit = refit(data, tau, entry.grouping, cfg);
            entry.ic_value = entry.refit.objective + sel.c_hat * entry.k * sel.p_nt;
        },
        workers);

    sel.chosen = pick_ic_argmin(sel.entries);
    return sel;
}

}  // namespace panelq
