#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>

#include "panelq/selection.hpp"

namespace panelq {

struct CovarianceEstimate {
    Eigen::MatrixXd matrix;   // (k+p) x (k+p), group block first
    std::string method = "sandwich-nid";
    double bandwidth = 0.0;
    double aux_worst_gap = 0.0;  // certificates of the two auxiliary refits
    double aux_worst_box = 0.0;
};

/// Hendricks-Koenker sandwich covariance for the refitted coefficients.
/// Densities come from the difference quotient of two auxiliary refits at
/// tau +/- h under the same grouping; nonpositive quotients are truncated,
/// with a small floor keeping the inner matrix invertible.
inline CovarianceEstimate sandwich_covariance(const PanelData& data, QuantileLevel tau,
                                              const GroupStructure& grouping,
                                              const RefitResult& refit_fit,
                                              BandwidthRule rule = BandwidthRule::hall_sheather,
                                              const SolverSettings& cfg = {},
                                              double f_floor = 1e-6) {
    if (static_cast<int>(grouping.membership.size()) != data.n)
        throw std::invalid_argument("grouping does not cover the panel");
    const int k = grouping.k;
    const int p = data.p;
    const int d = k + p;
    const double N = static_cast<double>(data.rows());

    CovarianceEstimate out;
    out.bandwidth = bandwidth(rule, tau, data.rows());
    const double h = out.bandwidth;

    const RefitResult hi = refit(data, QuantileLevel(tau.value + h), grouping, cfg);
    const RefitResult lo = refit(data, QuantileLevel(tau.value - h), grouping, cfg);
    for (const RefitResult* aux : {&hi, &lo}) {
        if (aux->report.status != SolveStatus::converged) continue;
        out.aux_worst_gap = std::max(out.aux_worst_gap, aux->report.duality_gap);
        out.aux_worst_box = std::max(out.aux_worst_box, aux->report.dual_box_violation);
    }

    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(d, d);     // (1/N) sum Z Z'
    Eigen::MatrixXd density = Eigen::MatrixXd::Zero(d, d);  // (1/N) sum f Z Z'
    for (std::size_t r = 0; r < data.rows(); ++r) {
        const int g = grouping.membership[data.id[r]];
        double dy = hi.centers[g] - lo.centers[g];
        for (int j = 0; j < p; ++j) dy += data.xat(r, j) * (hi.beta[j] - lo.beta[j]);
        double f = dy > 0.0 ? 2.0 * h / dy : 0.0;
        f = std::max(f, f_floor);

        auto accumulate = [&](Eigen::MatrixXd& m, double wgt) {
            m(g, g) += wgt;
            for (int j = 0; j < p; ++j) {
                const double xj = data.xat(r, j);
                m(g, k + j) += wgt * xj;
                for (int l = j; l < p; ++l) m(k + j, k + l) += wgt * xj * data.xat(r, l);
            }
        };
        accumulate(gram, 1.0);
        accumulate(density, f);
    }
    gram /= N;
    density /= N;
    for (int a = 0; a < d; ++a)
        for (int b = a + 1; b < d; ++b) {
            gram(b, a) = gram(a, b);
            density(b, a) = density(a, b);
        }

    Eigen::LDLT<Eigen::MatrixXd> ldlt(density);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
        throw std::runtime_error("density matrix is singular; bandwidth too small for this panel");
    const Eigen::MatrixXd inner = ldlt.solve(gram * tau.value * (1.0 - tau.value));
    Eigen::MatrixXd cov = ldlt.solve(inner.transpose()) / N;
    if (!cov.allFinite())
        throw std::runtime_error("density matrix is singular; bandwidth too small for this panel");
    out.matrix = 0.5 * (cov + cov.transpose());
    return out;
}

}  // namespace panelq
