#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "panelq/panel.hpp"
#include "panelq/solver.hpp"

namespace panelq {

/// Pairwise fusion penalties over individual pairs i < j.
struct PenaltyEdge {
    int i, j;
    double weight;  // lambda_ij, positive and finite
};

struct PenaltyGraph {
    std::vector<PenaltyEdge> edges;
};

/// Fixed-effects QR problem: N data rows with unit weight, one intercept
/// per individual plus the common slope block.
inline QrProblem build_fe_problem(const PanelData& data, QuantileLevel tau) {
    data.validate();
    QrProblem pb;
    pb.num_alpha = data.n;
    pb.num_covariates = data.p;
    pb.rows.reserve(data.rows());
    pb.x = data.x;
    for (std::size_t r = 0; r < data.rows(); ++r)
        pb.rows.push_back({data.id[r], data.y[r], tau.value, 1.0});
    return pb;
}

inline FixedEffectsFit fit_fixed_effects(const PanelData& data, QuantileLevel tau,
                                         const SolverSettings& cfg = {}) {
    const QrProblem pb = build_fe_problem(data, tau);
    const SolverReport rep = solve_weighted_qr(pb, cfg);
    if (rep.status == SolveStatus::numerical_failure)
        throw std::runtime_error("fixed effects fit failed");
    FixedEffectsFit fit;
    fit.alpha.assign(rep.solution.begin(), rep.solution.begin() + data.n);
    fit.beta.assign(rep.solution.begin() + data.n, rep.solution.end());
    fit.objective = rep.primal_objective;
    return fit;
}

/// Adaptive weights lambda_ij = lambda / (alpha_i - alpha_j)^2 over pairs
/// i < j, capped at cap*lambda when preliminary estimates (nearly) coincide.
/// lambda = 0 yields an empty graph.
inline PenaltyGraph build_penalty_graph(const FixedEffectsFit& fe_fit, double lambda,
                                        double cap = 1e8) {
    if (lambda < 0.0) throw std::invalid_argument("lambda must be nonnegative");
    if (!(cap > 0.0)) throw std::invalid_argument("cap must be positive");
    PenaltyGraph graph;
    if (lambda == 0.0) return graph;
    const int n = static_cast<int>(fe_fit.alpha.size());
    graph.edges.reserve(static_cast<std::size_t>(n) * (n - 1) / 2);
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            const double gap = fe_fit.alpha[i] - fe_fit.alpha[j];
            const double wij = gap * gap > 0.0 ? std::min(lambda / (gap * gap), cap * lambda)
                                               : cap * lambda;
            graph.edges.push_back({i, j, wij});
        }
    }
    return graph;
}

/// Data rows as in the fixed-effects problem plus one pseudo-row per edge:
/// response 0, design +1/-1 on the pair, tau 1/2, weight 2*lambda_ij, so
/// each edge contributes lambda_ij * |alpha_i - alpha_j| to the objective.
inline QrProblem build_penalized_problem(const PanelData& data, QuantileLevel tau,
                                         const PenaltyGraph& graph) {
    QrProblem pb = build_fe_problem(data, tau);
    pb.diffs.reserve(graph.edges.size());
    for (const PenaltyEdge& e : graph.edges) {
        if (e.i < 0 || e.j < 0 || e.i >= data.n || e.j >= data.n)
            throw std::invalid_argument("penalty edge references unknown individual");
        pb.diffs.push_back({e.i, e.j, 0.5, 2.0 * e.weight});
    }
    return pb;
}

/// Exact objective of the unnormalized penalized problem at a candidate
/// point: total check loss plus the weighted pairwise penalty.
inline double penalized_objective(const PanelData& data, QuantileLevel tau,
                                  const PenaltyGraph& graph,
                                  const std::vector<double>& alpha,
                                  const std::vector<double>& beta) {
    double obj = total_check_loss(data, tau, alpha, beta);
    for (const PenaltyEdge& e : graph.edges) obj += e.weight * std::abs(alpha[e.i] - alpha[e.j]);
    return obj;
}

/// Converts the normalized penalty level lambda_tilde of the grid into the
/// per-pair multiplier of the unnormalized problem. The normalized objective
/// averages the loss over the N observations and the penalty over the
/// n(n-1) ordered pairs; scaling back by N gives 2*lambda_tilde*N/(n(n-1))
/// per unordered pair.
inline double pair_multiplier(const PanelData& data, double lambda_tilde) {
    if (data.n < 2) return 0.0;
    const double pairs = static_cast<double>(data.n) * (data.n - 1);
    return 2.0 * lambda_tilde * static_cast<double>(data.rows()) / pairs;
}

struct PenalizedFit {
    std::vector<double> alpha;
    std::vector<double> beta;
    SolverReport report;
};

/// Minimizes (1/N) sum rho_tau(resid) + lambda_tilde/(n(n-1)) * sum of
/// adaptively weighted pairwise gaps, rescaled internally to the
/// unnormalized LP. fe_fit supplies the preliminary estimates behind the
/// adaptive weights and must come from the same tau.
inline PenalizedFit solve_penalized(const PanelData& data, QuantileLevel tau, double lambda_tilde,
                                    const FixedEffectsFit& fe_fit, const SolverSettings& cfg = {},
                                    double cap = 1e8) {
    if (static_cast<int>(fe_fit.alpha.size()) != data.n)
        throw std::invalid_argument("preliminary fit does not match panel");
    const PenaltyGraph graph = build_penalty_graph(fe_fit, pair_multiplier(data, lambda_tilde), cap);
    const QrProblem pb = build_penalized_problem(data, tau, graph);
    PenalizedFit out;
    out.report = solve_weighted_qr(pb, cfg);
    out.alpha.assign(out.report.solution.begin(), out.report.solution.begin() + data.n);
    out.beta.assign(out.report.solution.begin() + data.n, out.report.solution.end());
    return out;
}

}  // namespace panelq
