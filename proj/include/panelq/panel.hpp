#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace panelq {

/// Quantile level tau, restricted to the open interval (0,1).
struct QuantileLevel {
    double value;

    explicit QuantileLevel(double tau) : value(tau) {
        if (!(tau > 0.0 && tau < 1.0))
            throw std::invalid_argument("quantile level must lie in (0,1), got " +
                                        std::to_string(tau));
    }
};

/// Check loss rho_tau(u) = u * (tau - 1{u < 0}).
/// Nonnegative, convex, zero exactly at u = 0; its minimizer over a
/// constant is the sample tau-quantile.
inline double check_loss(double u, QuantileLevel tau) {
    return u * (tau.value - (u < 0.0 ? 1.0 : 0.0));
}

/// Long-format panel: one row per observation, grouped by individual.
/// Individuals are indexed 0..n-1 internally; `unit_labels` keeps the
/// caller's original ids for reporting. Panels may be unbalanced.
struct PanelData {
    int n = 0;                           // number of individuals
    int p = 0;                           // covariates per row
    std::vector<int> t_len;              // observations per individual, size n
    std::vector<double> y;               // responses, size N
    std::vector<double> x;               // covariates, row-major N x p
    std::vector<int> id;                 // individual index per row, size N
    std::vector<std::int64_t> unit_labels;  // original ids, size n (optional)
    std::vector<double> time;            // per-row time stamps (optional, audit only)
    std::vector<std::string> x_names;    // covariate names (optional)

    std::size_t rows() const { return y.size(); }
    double xat(std::size_t row, int j) const { return x[row * static_cast<std::size_t>(p) + j]; }

    double mean_t() const { return n > 0 ? static_cast<double>(rows()) / n : 0.0; }

    void validate() const {
        if (n < 1) throw std::invalid_argument("panel needs at least one individual");
        if (static_cast<int>(t_len.size()) != n)
            throw std::invalid_argument("t_len size does not match n");
        std::size_t total = 0;
        for (int i = 0; i < n; ++i) {
            if (t_len[i] < 1)
                throw std::invalid_argument("individual " + std::to_string(i) + " has no rows");
            total += static_cast<std::size_t>(t_len[i]);
        }
        if (total != y.size() || y.size() != id.size())
            throw std::invalid_argument("row counts are inconsistent");
        if (x.size() != y.size() * static_cast<std::size_t>(p))
            throw std::invalid_argument("covariate matrix shape mismatch");
        for (std::size_t r = 0; r < id.size(); ++r)
            if (id[r] < 0 || id[r] >= n)
                throw std::invalid_argument("row " + std::to_string(r) + " has invalid individual index");
        if (!unit_labels.empty() && static_cast<int>(unit_labels.size()) != n)
            throw std::invalid_argument("unit_labels size does not match n");
        if (!time.empty() && time.size() != y.size())
            throw std::invalid_argument("time column size mismatch");
        if (!x_names.empty() && static_cast<int>(x_names.size()) != p)
            throw std::invalid_argument("covariate name count mismatch");
    }
};

/// Result of the unpenalized fixed-effects quantile regression: one free
/// intercept per individual plus common slopes.
struct FixedEffectsFit {
    std::vector<double> alpha;   // size n
    std::vector<double> beta;    // size p
    double objective = 0.0;      // total check loss at the fit
};

/// Row-aligned residuals y_it - x_it'beta - alpha_i.
inline std::vector<double> residuals(const PanelData& data,
                                     const std::vector<double>& alpha,
                                     const std::vector<double>& beta) {
    if (static_cast<int>(alpha.size()) != data.n)
        throw std::invalid_argument("alpha must have one entry per individual");
    if (static_cast<int>(beta.size()) != data.p)
        throw std::invalid_argument("beta must have one entry per covariate");
    std::vector<double> res(data.rows());
    for (std::size_t r = 0; r < data.rows(); ++r) {
        double fit = alpha[data.id[r]];
        for (int j = 0; j < data.p; ++j) fit += data.xat(r, j) * beta[j];
        res[r] = data.y[r] - fit;
    }
    return res;
}

/// Total check loss of a candidate fit.
inline double total_check_loss(const PanelData& data, QuantileLevel tau,
                               const std::vector<double>& alpha,
                               const std::vector<double>& beta) {
    double obj = 0.0;
    for (double r : residuals(data, alpha, beta)) obj += check_loss(r, tau);
    return obj;
}

}  // namespace panelq
