#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "panelq/parallel.hpp"
#include "panelq/problems.hpp"

namespace panelq {

/// Ascending grid of normalized penalty levels.
struct LambdaGrid {
    std::vector<double> values;

    explicit LambdaGrid(std::vector<double> v) : values(std::move(v)) {
        if (values.empty()) throw std::invalid_argument("lambda grid is empty");
        if (values.front() < 0.0) throw std::invalid_argument("lambda values must be nonnegative");
        for (std::size_t i = 1; i < values.size(); ++i)
            if (!(values[i] > values[i - 1]))
                throw std::invalid_argument("lambda grid must be strictly ascending");
    }

    static LambdaGrid regular(double lo, double hi, double step) {
        if (!(step > 0.0) || hi < lo) throw std::invalid_argument("bad lambda grid spec");
        std::vector<double> v;
        const int count = static_cast<int>(std::floor((hi - lo) / step + 1e-9)) + 1;
        v.reserve(count);
        for (int k = 0; k < count; ++k) v.push_back(lo + k * step);
        return LambdaGrid(std::move(v));
    }
};

/// Partition of individuals into groups with ascending centers.
struct GroupStructure {
    int k = 0;
    std::vector<double> centers;  // size k, strictly ascending
    std::vector<int> membership;  // size n, labels in [0, k)
};

/// Default fusing tolerance, guarded against wide intercept ranges.
inline double default_fuse_tol(double alpha_range) {
    return std::max(1e-4, 1e-6 * alpha_range);
}

/// Single-linkage grouping: individuals whose fitted intercepts are within
/// fuse_tol are chained into one group; groups are ordered by center (the
/// component mean).
inline GroupStructure extract_groups(const std::vector<double>& alpha, double fuse_tol) {
    const int n = static_cast<int>(alpha.size());
    if (n < 1) throw std::invalid_argument("need at least one individual");
    if (!(fuse_tol > 0.0)) throw std::invalid_argument("fuse tolerance must be positive");

    // union-find over the chain of sorted neighbours; single linkage makes
    // pairwise comparisons beyond adjacent sorted values redundant
    std::vector<int> order(n), parent(n);
    std::iota(order.begin(), order.end(), 0);
    std::iota(parent.begin(), parent.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) { return alpha[a] < alpha[b]; });
    auto find = [&](int a) {
        while (parent[a] != a) a = parent[a] = parent[parent[a]];
        return a;
    };
    for (int k = 1; k < n; ++k) {
        if (alpha[order[k]] - alpha[order[k - 1]] <= fuse_tol) {
            const int a = find(order[k - 1]), b = find(order[k]);
            if (a != b) parent[std::max(a, b)] = std::min(a, b);
        }
    }

    std::vector<double> sum(n, 0.0);
    std::vector<int> count(n, 0);
    for (int i = 0; i < n; ++i) {
        const int r = find(i);
        sum[r] += alpha[i];
        ++count[r];
    }
    std::vector<int> roots;
    for (int i = 0; i < n; ++i)
        if (count[i] > 0) roots.push_back(i);
    std::sort(roots.begin(), roots.end(),
              [&](int a, int b) { return sum[a] / count[a] < sum[b] / count[b]; });

    GroupStructure g;
    g.k = static_cast<int>(roots.size());
    g.centers.reserve(g.k);
    std::vector<int> label(n, -1);
    for (int gi = 0; gi < g.k; ++gi) {
        label[roots[gi]] = gi;
        g.centers.push_back(sum[roots[gi]] / count[roots[gi]]);
    }
    g.membership.resize(n);
    for (int i = 0; i < n; ++i) g.membership[i] = label[find(i)];
    return g;
}

struct LambdaPathEntry {
    double lambda = 0.0;
    std::vector<double> alpha;
    std::vector<double> beta;
    GroupStructure grouping;
    SolverReport report;
    bool converged = false;
};

struct LambdaPathResult {
    std::vector<LambdaPathEntry> entries;  // aligned with the grid
    double fuse_tol = 0.0;
};

/// One penalized solve per grid value; entries are independent and may be
/// evaluated concurrently, merged back in grid order.
inline LambdaPathResult run_lambda_path(const PanelData& data, QuantileLevel tau,
                                        const LambdaGrid& grid, const FixedEffectsFit& fe_fit,
                                        const SolverSettings& cfg = {}, int workers = 0) {
    LambdaPathResult path;
    const auto [lo, hi] = std::minmax_element(fe_fit.alpha.begin(), fe_fit.alpha.end());
    path.fuse_tol = default_fuse_tol(*hi - *lo);
    path.entries.resize(grid.values.size());
    parallel_for(
        grid.values.size(),
        [&](std::size_t l) {
            LambdaPathEntry& entry = path.entries[l];
            entry.lambda = grid.values[l];
            PenalizedFit fit = solve_penalized(data, tau, entry.lambda, fe_fit, cfg);
            entry.alpha = std::move(fit.alpha);
            entry.beta = std::move(fit.beta);
            entry.report = std::move(fit.report);
            entry.converged = entry.report.status == SolveStatus::converged;
            if (entry.converged) entry.grouping = extract_groups(entry.alpha, path.fuse_tol);
        },
        workers);
    return path;
}

struct MatchMetrics {
    bool perfect = false;
    double frac_correct = 0.0;
};

/// Membership agreement after aligning groups by ascending centers. Only
/// defined when both structures have the same number of groups; callers
/// condition on that.
inline MatchMetrics match_metrics(const GroupStructure& estimated, const GroupStructure& truth) {
    if (estimated.membership.size() != truth.membership.size())
        throw std::invalid_argument("group structures cover different panels");
    if (estimated.k != truth.k)
        throw std::invalid_argument("group counts differ; metrics are conditional on equality");
    const std::size_t n = truth.membership.size();
    std::size_t hits = 0;
    for (std::size_t i = 0; i < n; ++i)
        if (estimated.membership[i] == truth.membership[i]) ++hits;
    MatchMetrics m;
    m.frac_correct = static_cast<double>(hits) / static_cast<double>(n);
    m.perfect = hits == n;
    return m;
}

}  // namespace panelq
