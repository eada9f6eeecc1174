#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "panelq/panel.hpp"

namespace panelq {

enum class SolveStatus { converged, max_iterations, numerical_failure };

inline const char* to_string(SolveStatus s) {
    switch (s) {
        case SolveStatus::converged: return "converged";
        case SolveStatus::max_iterations: return "max-iterations";
        case SolveStatus::numerical_failure: return "numerical-failure";
    }
    return "unknown";
}

struct SolverSettings {
    double gap_tol = 1e-8;        // relative primal-dual gap
    double feas_tol = 1e-8;       // residual norms, relative to data scale
    int max_iterations = 100;
    double step_fraction = 0.9995;  // fraction of the step to the boundary
};

/// Observation row: touches one intercept coordinate plus the slope block.
struct DataRow {
    int unit;        // intercept coordinate in [0, num_alpha)
    double y;
    double tau;      // quantile level for this row, in (0,1)
    double weight;   // positive
};

/// Pairwise difference row: response 0, design +1 on unit i, -1 on unit j.
/// With tau = 1/2 and weight 2*lambda_ij it contributes lambda_ij*|a_i - a_j|.
struct DiffRow {
    int i, j;
    double tau = 0.5;
    double weight = 1.0;
};

/// Weighted quantile LP over the joint parameter (alpha_1..alpha_m, beta).
struct QrProblem {
    int num_alpha = 0;
    int num_covariates = 0;
    std::vector<DataRow> rows;
    std::vector<double> x;        // row-major rows.size() x num_covariates
    std::vector<DiffRow> diffs;

    int dim() const { return num_alpha + num_covariates; }
    std::size_t num_rows() const { return rows.size() + diffs.size(); }
    double xat(std::size_t r, int j) const {
        return x[r * static_cast<std::size_t>(num_covariates) + j];
    }

    void validate() const {
        if (dim() < 1) throw std::invalid_argument("problem dimension must be at least 1");
        if (x.size() != rows.size() * static_cast<std::size_t>(num_covariates))
            throw std::invalid_argument("design matrix shape mismatch");
        for (const DataRow& r : rows) {
            if (r.unit < 0 || r.unit >= num_alpha)
                throw std::invalid_argument("data row touches invalid intercept coordinate");
            if (!(r.tau > 0.0 && r.tau < 1.0))
                throw std::invalid_argument("row quantile level outside (0,1)");
            if (!(r.weight > 0.0)) throw std::invalid_argument("row weight must be positive");
        }
        for (const DiffRow& e : diffs) {
            if (e.i < 0 || e.j < 0 || e.i >= num_alpha || e.j >= num_alpha || e.i == e.j)
                throw std::invalid_argument("difference row touches invalid coordinates");
            if (!(e.tau > 0.0 && e.tau < 1.0))
                throw std::invalid_argument("row quantile level outside (0,1)");
            if (!(e.weight > 0.0)) throw std::invalid_argument("row weight must be positive");
        }
    }
};

struct SolverReport {
    std::vector<double> solution;    // alpha block then beta block
    double primal_objective = std::numeric_limits<double>::quiet_NaN();
    double dual_objective = std::numeric_limits<double>::quiet_NaN();
    double duality_gap = std::numeric_limits<double>::infinity();  // relative
    double dual_residual = std::numeric_limits<double>::infinity();  // stationarity ||A'd||, scaled
    double dual_box_violation = 0.0;  // per-row box violation, weight-normalized
    int iterations = 0;
    SolveStatus status = SolveStatus::numerical_failure;
    std::vector<double> dual;        // per-row subgradient values d_k
};

namespace detail {

// Normal-equation matrix A' Theta A over the joint parameter. The alpha
// block is diagonal for pure data problems and picks up a graph Laplacian
// from difference rows; the beta block couples densely. Factorization
// retries with an escalating diagonal-relative ridge when the late-stage
// scaling matrix turns the system numerically singular.
class NormalEquations {
  public:
    explicit NormalEquations(const QrProblem& pb)
        : pb_(pb), m_(pb.num_alpha), p_(pb.num_covariates) {
        diag_only_ = pb.diffs.empty();
        if (diag_only_) {
            d_raw_.resize(m_);
            c_.resize(m_, p_);
            q_.resize(p_, p_);
        } else {
            full_raw_.resize(m_ + p_, m_ + p_);
        }
    }

    // theta spans data rows then difference rows.
    bool factor(const std::vector<double>& theta) {
        build(theta);
        ridge_level_ = 0;
        return try_factor();
    }

    bool strengthen() {
        if (ridge_level_ + 1 >= static_cast<int>(ridges_.size())) return false;
        ++ridge_level_;
        return try_factor();
    }

    // Solves (A' Theta A) out = rhs against the current factorization.
    void solve(const Eigen::VectorXd& rhs, Eigen::VectorXd& out) const {
        if (diag_only_) {
            Eigen::VectorXd ga = rhs.head(m_);
            Eigen::VectorXd gb = rhs.tail(p_);
            Eigen::VectorXd da = ga.cwiseQuotient(d_);
            if (p_ > 0) {
                Eigen::VectorXd vb = schur_llt_.solve(gb - c_.transpose() * da);
                out.tail(p_) = vb;
                out.head(m_) = (ga - c_ * vb).cwiseQuotient(d_);
            } else {
                out = da;
            }
        } else {
            out = dense_ldlt_.solve(rhs);
        }
    }

  private:
    void build(const std::vector<double>& theta) {
        if (diag_only_) {
            d_raw_.setZero();
            c_.setZero();
            q_.setZero();
            for (std::size_t r = 0; r < pb_.rows.size(); ++r) {
                const double th = theta[r];
                const int u = pb_.rows[r].unit;
                d_raw_[u] += th;
                for (int j = 0; j < p_; ++j) {
                    const double xj = pb_.xat(r, j);
                    c_(u, j) += th * xj;
                    for (int l = j; l < p_; ++l) q_(j, l) += th * xj * pb_.xat(r, l);
                }
            }
            for (int j = 0; j < p_; ++j)
                for (int l = j; l < p_; ++l) q_(l, j) = q_(j, l);
        } else {
            full_raw_.setZero();
            for (std::size_t r = 0; r < pb_.rows.size(); ++r) {
                const double th = theta[r];
                const int u = pb_.rows[r].unit;
                full_raw_(u, u) += th;
                for (int j = 0; j < p_; ++j) {
                    const double xj = pb_.xat(r, j);
                    full_raw_(u, m_ + j) += th * xj;
                    for (int l = j; l < p_; ++l)
                        full_raw_(m_ + j, m_ + l) += th * xj * pb_.xat(r, l);
                }
            }
            const std::size_t nd = pb_.rows.size();
            for (std::size_t e = 0; e < pb_.diffs.size(); ++e) {
                const double th = theta[nd + e];
                const int i = pb_.diffs[e].i;
                const int j = pb_.diffs[e].j;
                full_raw_(i, i) += th;
                full_raw_(j, j) += th;
                full_raw_(std::min(i, j), std::max(i, j)) -= th;
            }
        }
    }

    bool try_factor() {
        const double ridge = ridges_[ridge_level_];
        if (diag_only_) {
            d_ = d_raw_;
            for (int i = 0; i < m_; ++i) {
                if (!(d_[i] > 0.0)) d_[i] = 1e-300;
                d_[i] *= (1.0 + ridge);
            }
            if (p_ > 0) {
                Eigen::MatrixXd s = q_ - c_.transpose() * d_.cwiseInverse().asDiagonal() * c_;
                s.diagonal().array() += ridge * (1.0 + s.diagonal().cwiseAbs().maxCoeff());
                schur_llt_.compute(s);
                if (schur_llt_.info() != Eigen::Success) return false;
            }
            return true;
        }
        Eigen::MatrixXd full = full_raw_;
        for (int i = 0; i < m_ + p_; ++i)
            full(i, i) = full(i, i) * (1.0 + ridge) + ridge;
        dense_ldlt_.compute(full.selfadjointView<Eigen::Upper>());
        return dense_ldlt_.info() == Eigen::Success;
    }

    const QrProblem& pb_;
    int m_, p_;
    bool diag_only_;
    int ridge_level_ = 0;
    static constexpr std::array<double, 4> ridges_ = {0.0, 1e-13, 1e-9, 1e-5};
    Eigen::VectorXd d_raw_, d_;
    Eigen::MatrixXd c_, q_, full_raw_;
    Eigen::LLT<Eigen::MatrixXd> schur_llt_;
    Eigen::LDLT<Eigen::MatrixXd> dense_ldlt_;
};

// Minimizer interval midpoint of c -> sum_i w_i rho_{tau_i}(v_i - c).
inline double weighted_quantile_mid(std::vector<std::pair<double, double>>& value_weight,
                                    double target) {
    std::sort(value_weight.begin(), value_weight.end());
    double total = 0.0;
    for (auto& vw : value_weight) total += vw.second;
    const double tie_tol = 1e-12 * (1.0 + total);
    double cum = 0.0;
    for (std::size_t k = 0; k < value_weight.size(); ++k) {
        cum += value_weight[k].second;
        if (cum >= target - tie_tol) {
            if (std::abs(cum - target) <= tie_tol && k + 1 < value_weight.size())
                return 0.5 * (value_weight[k].first + value_weight[k + 1].first);
            return value_weight[k].first;
        }
    }
    return value_weight.back().first;
}

inline double evaluate_objective(const QrProblem& pb, const Eigen::VectorXd& phi) {
    const int m = pb.num_alpha;
    const int p = pb.num_covariates;
    double obj = 0.0;
    for (std::size_t r = 0; r < pb.rows.size(); ++r) {
        double fit = phi[pb.rows[r].unit];
        for (int j = 0; j < p; ++j) fit += pb.xat(r, j) * phi[m + j];
        const double u = pb.rows[r].y - fit;
        obj += pb.rows[r].weight * u * (pb.rows[r].tau - (u < 0.0 ? 1.0 : 0.0));
    }
    for (const DiffRow& e : pb.diffs) {
        const double u = -(phi[e.i] - phi[e.j]);
        obj += e.weight * u * (e.tau - (u < 0.0 ? 1.0 : 0.0));
    }
    return obj;
}

// Snaps nearly-fused intercept blocks to a common value, re-optimizing each
// fused block exactly in one dimension. Interior-point iterates leave fused
// coordinates equal only up to the barrier scale; with large penalty weights
// that residual gap dominates the objective, so the polished point is the one
// whose optimality the duality gap certifies. Returns the best point found.
inline std::pair<Eigen::VectorXd, double> polish_fused(const QrProblem& pb,
                                                       const Eigen::VectorXd& phi) {
    const int m = pb.num_alpha;
    const int p = pb.num_covariates;
    Eigen::VectorXd best = phi;
    double best_obj = evaluate_objective(pb, phi);
    if (pb.diffs.empty() || m < 2) return {best, best_obj};

    double span = 0.0;
    for (int i = 0; i < m; ++i) span = std::max(span, std::abs(phi[i]));
    const double scale = 1.0 + span;

    std::vector<int> parent(m);
    std::vector<double> partial(pb.rows.size());
    for (std::size_t r = 0; r < pb.rows.size(); ++r) {
        double fit = 0.0;
        for (int j = 0; j < p; ++j) fit += pb.xat(r, j) * phi[m + j];
        partial[r] = pb.rows[r].y - fit;
    }

    std::function<int(int)> find = [&](int a) {
        while (parent[a] != a) a = parent[a] = parent[parent[a]];
        return a;
    };

    for (double tol : {1e-10, 1e-8, 1e-6, 1e-4}) {
        const double tol_abs = tol * scale;
        std::iota(parent.begin(), parent.end(), 0);
        for (const DiffRow& e : pb.diffs)
            if (std::abs(phi[e.i] - phi[e.j]) <= tol_abs) {
                const int a = find(e.i), b = find(e.j);
                if (a != b) parent[std::max(a, b)] = std::min(a, b);
            }

        Eigen::VectorXd cand = phi;
        std::vector<std::vector<int>> members(m);
        for (int i = 0; i < m; ++i) members[find(i)].push_back(i);
        for (int root = 0; root < m; ++root) {
            if (members[root].size() < 2) continue;
            // 1-D objective over the common value: member data rows plus
            // cross edges treated as pseudo-observations at the other end.
            std::vector<std::pair<double, double>> vw;
            double target = 0.0;
            for (std::size_t r = 0; r < pb.rows.size(); ++r) {
                if (find(pb.rows[r].unit) != root) continue;
                vw.emplace_back(partial[r], pb.rows[r].weight);
                target += pb.rows[r].weight * pb.rows[r].tau;
            }
            for (const DiffRow& e : pb.diffs) {
                const bool ini = find(e.i) == root, inj = find(e.j) == root;
                if (ini == inj) continue;
                vw.emplace_back(cand[ini ? e.j : e.i], e.weight);
                target += e.weight * e.tau;
            }
            if (vw.empty()) continue;
            const double c = weighted_quantile_mid(vw, target);
            for (int i : members[root]) cand[i] = c;
        }
        const double obj = evaluate_objective(pb, cand);
        if (obj < best_obj) {
            best_obj = obj;
            best = cand;
        }
    }
    return {best, best_obj};
}

}  // namespace detail

/// Solves min_x sum_k w_k rho_{tau_k}(y_k - a_k'x) by a primal-dual
/// interior-point method with Mehrotra predictor-corrector steps on the
/// equivalent box-constrained LP dual
///     max y'd  s.t.  A'd = 0,  d_k in [-w_k(1-tau_k), w_k tau_k].
inline SolverReport solve_weighted_qr(const QrProblem& pb, const SolverSettings& cfg = {}) {
    pb.validate();

    const int dim = pb.dim();
    const int m = pb.num_alpha;
    const int p = pb.num_covariates;
    const std::size_t nd = pb.rows.size();
    const std::size_t nr = pb.num_rows();

    SolverReport rep;
    rep.solution.assign(dim, 0.0);
    rep.dual.assign(nr, 0.0);
    if (nr == 0) {
        rep.status = SolveStatus::numerical_failure;
        return rep;
    }

    // Per-row constants.
    Eigen::VectorXd y(nr), w(nr), clo(nr);  // box for d is [-clo, w-clo], clo = w*(1-tau)
    for (std::size_t r = 0; r < nd; ++r) {
        y[r] = pb.rows[r].y;
        w[r] = pb.rows[r].weight;
        clo[r] = pb.rows[r].weight * (1.0 - pb.rows[r].tau);
    }
    for (std::size_t e = 0; e < pb.diffs.size(); ++e) {
        y[nd + e] = 0.0;
        w[nd + e] = pb.diffs[e].weight;
        clo[nd + e] = pb.diffs[e].weight * (1.0 - pb.diffs[e].tau);
    }

    auto apply_design = [&](const Eigen::VectorXd& phi, Eigen::VectorXd& out) {
        for (std::size_t r = 0; r < nd; ++r) {
            double v = phi[pb.rows[r].unit];
            for (int j = 0; j < p; ++j) v += pb.xat(r, j) * phi[m + j];
            out[r] = v;
        }
        for (std::size_t e = 0; e < pb.diffs.size(); ++e)
            out[nd + e] = phi[pb.diffs[e].i] - phi[pb.diffs[e].j];
    };
    auto apply_design_t = [&](const Eigen::VectorXd& v, Eigen::VectorXd& out) {
        out.setZero();
        for (std::size_t r = 0; r < nd; ++r) {
            out[pb.rows[r].unit] += v[r];
            for (int j = 0; j < p; ++j) out[m + j] += pb.xat(r, j) * v[r];
        }
        for (std::size_t e = 0; e < pb.diffs.size(); ++e) {
            out[pb.diffs[e].i] += v[nd + e];
            out[pb.diffs[e].j] -= v[nd + e];
        }
    };

    // Column scales, used to normalize stationarity residuals.
    Eigen::VectorXd colscale(dim);
    {
        Eigen::VectorXd tmp(dim);
        tmp.setZero();
        for (std::size_t r = 0; r < nd; ++r) {
            tmp[pb.rows[r].unit] += w[r];
            for (int j = 0; j < p; ++j) tmp[m + j] += std::abs(pb.xat(r, j)) * w[r];
        }
        for (std::size_t e = 0; e < pb.diffs.size(); ++e) {
            tmp[pb.diffs[e].i] += w[nd + e];
            tmp[pb.diffs[e].j] += w[nd + e];
        }
        colscale = tmp;
    }

    detail::NormalEquations neq(pb);

    // Interior start. z = clo satisfies the dual equality A'z = A'clo
    // exactly; (s, q) are chosen so the remaining residual vanishes too.
    Eigen::VectorXd z = clo, t = w - clo;
    Eigen::VectorXd phi(dim);
    {
        std::vector<double> ones(nr, 1.0);
        Eigen::VectorXd aty(dim);
        apply_design_t(y, aty);
        if (neq.factor(ones)) {
            neq.solve(aty, phi);
        } else {
            phi.setZero();
        }
        if (!phi.allFinite()) phi.setZero();
    }
    Eigen::VectorXd fit(nr), s(nr), q(nr);
    apply_design(phi, fit);
    {
        const Eigen::VectorXd r0 = y - fit;
        const double scale = 0.5 * r0.cwiseAbs().mean() + 1e-3;
        for (std::size_t k = 0; k < nr; ++k) {
            s[k] = std::max(-r0[k], 0.0) + scale;
            q[k] = std::max(r0[k], 0.0) + scale;
        }
    }

    const double ynorm = y.cwiseAbs().maxCoeff();
    const double two_nr = 2.0 * static_cast<double>(nr);

    std::vector<double> theta(nr);
    Eigen::VectorXd rp(dim), rd(nr), rb(nr), g(nr), rhs(dim);
    Eigen::VectorXd dphi(dim), dz(nr), dt(nr), ds(nr), dq(nr);
    Eigen::VectorXd rc1(nr), rc2(nr), atz(dim), adphi(nr), tg(nr);

    double best_gap = std::numeric_limits<double>::infinity();
    double best_score = std::numeric_limits<double>::infinity();
    Eigen::VectorXd best_phi = phi, best_d = z - clo;
    double best_pobj = detail::evaluate_objective(pb, phi);
    double best_dres = std::numeric_limits<double>::infinity();
    int since_improvement = 0;
    int it = 0;
    SolveStatus status = SolveStatus::max_iterations;

    for (it = 0; it < cfg.max_iterations; ++it) {
        // Residuals; rp doubles as the stationarity certificate -A'd.
        apply_design_t(z - clo, atz);
        rp = -atz;
        apply_design(phi, fit);
        rd = y - fit - q + s;
        rb = w - z - t;

        double pobj = detail::evaluate_objective(pb, phi);
        const double dobj = y.dot(z - clo);
        Eigen::VectorXd phi_eff = phi;
        double relgap = std::abs(pobj - dobj) / (1.0 + std::abs(pobj));
        if (!pb.diffs.empty() && relgap > cfg.gap_tol && relgap <= 1e-3) {
            auto polished = detail::polish_fused(pb, phi);
            if (polished.second < pobj) {
                phi_eff = std::move(polished.first);
                pobj = polished.second;
                relgap = std::abs(pobj - dobj) / (1.0 + std::abs(pobj));
            }
        }
        double dres = 0.0;
        for (int c = 0; c < dim; ++c) dres = std::max(dres, std::abs(atz[c]) / (1.0 + colscale[c]));
        const double rdnorm = rd.cwiseAbs().maxCoeff() / (1.0 + ynorm);

        const double score = std::max(relgap, dres);
        if (score < best_score) {
            best_score = score;
            best_gap = relgap;
            best_phi = phi_eff;
            best_d = z - clo;
            best_pobj = pobj;
            best_dres = dres;
            since_improvement = 0;
        } else {
            ++since_improvement;
        }
#ifdef PANELQ_IPM_TRACE
        std::fprintf(stderr, "it %3d pobj %.10e dobj %.10e relgap %.3e dres %.3e rd %.3e\n", it,
                     pobj, dobj, relgap, dres, rdnorm);
#endif
        if (relgap <= cfg.gap_tol && dres <= cfg.feas_tol && rdnorm <= 1e-6) {
            status = SolveStatus::converged;
            break;
        }
        if (since_improvement >= 15) break;  // stalled; fall back to the best iterate

        const double gap = z.dot(s) + t.dot(q);
        const double mu = gap / two_nr;
        if (!std::isfinite(gap) || mu <= 0.0) {
            status = (best_gap <= cfg.gap_tol && best_dres <= cfg.feas_tol)
                         ? SolveStatus::converged
                         : SolveStatus::numerical_failure;
            break;
        }

        for (std::size_t k = 0; k < nr; ++k) theta[k] = 1.0 / (s[k] / z[k] + q[k] / t[k]);
        {
            // Cap the scaling spread: unbounded theta on fused rows poisons
            // the Newton system with roundoff long before mu reaches zero.
            std::vector<double> tmp(theta);
            auto mid = tmp.begin() + tmp.size() / 2;
            std::nth_element(tmp.begin(), mid, tmp.end());
            const double cap = 1e12 * std::max(*mid, 1e-12);
            for (double& th : theta) th = std::min(th, cap);
        }
        if (!neq.factor(theta)) {
            status = SolveStatus::numerical_failure;
            break;
        }

        auto newton = [&]() -> bool {
            // g collects the dual row after eliminating (s, q, t).
            for (std::size_t k = 0; k < nr; ++k)
                g[k] = rd[k] - (rc2[k] - q[k] * rb[k]) / t[k] + rc1[k] / z[k];
            for (;;) {
                for (std::size_t k = 0; k < nr; ++k) tg[k] = theta[k] * g[k];
                apply_design_t(tg, rhs);
                rhs -= rp;
                neq.solve(rhs, dphi);
                if (dphi.allFinite()) break;
                if (!neq.strengthen()) return false;
            }
            apply_design(dphi, adphi);
            for (std::size_t k = 0; k < nr; ++k) {
                dz[k] = theta[k] * (g[k] - adphi[k]);
                dt[k] = rb[k] - dz[k];
                ds[k] = (rc1[k] - s[k] * dz[k]) / z[k];
                dq[k] = (rc2[k] - q[k] * dt[k]) / t[k];
            }
            return dz.allFinite() && ds.allFinite() && dq.allFinite();
        };

        auto max_step = [&](const Eigen::VectorXd& v, const Eigen::VectorXd& dv) {
            double a = std::numeric_limits<double>::infinity();
            for (std::size_t k = 0; k < nr; ++k)
                if (dv[k] < 0.0) a = std::min(a, -v[k] / dv[k]);
            return a;
        };

        // Affine predictor.
        for (std::size_t k = 0; k < nr; ++k) {
            rc1[k] = -z[k] * s[k];
            rc2[k] = -t[k] * q[k];
        }
        if (!newton()) {
            status = SolveStatus::numerical_failure;
            break;
        }
        const double ap_aff = std::min(1.0, std::min(max_step(z, dz), max_step(t, dt)));
        const double ad_aff = std::min(1.0, std::min(max_step(s, ds), max_step(q, dq)));
        double gap_aff = 0.0;
        for (std::size_t k = 0; k < nr; ++k)
            gap_aff += (z[k] + ap_aff * dz[k]) * (s[k] + ad_aff * ds[k]) +
                       (t[k] + ap_aff * dt[k]) * (q[k] + ad_aff * dq[k]);
        double sigma = std::pow(std::max(gap_aff, 0.0) / gap, 3);
        sigma = std::clamp(sigma, 1e-10, 0.999);

        // Corrector: recenter and cancel the affine cross terms.
        const double mu_target = sigma * mu;
        for (std::size_t k = 0; k < nr; ++k) {
            rc1[k] = mu_target - z[k] * s[k] - dz[k] * ds[k];
            rc2[k] = mu_target - t[k] * q[k] - dt[k] * dq[k];
        }
        if (!newton()) {
            status = SolveStatus::numerical_failure;
            break;
        }
        const double ap = std::min(1.0, cfg.step_fraction * std::min(max_step(z, dz), max_step(t, dt)));
        const double ad = std::min(1.0, cfg.step_fraction * std::min(max_step(s, ds), max_step(q, dq)));
        if (!(ap > 0.0) || !(ad > 0.0)) {
            status = SolveStatus::numerical_failure;
            break;
        }

        z += ap * dz;
        t += ap * dt;
        phi += ad * dphi;
        s += ad * ds;
        q += ad * dq;
    }

    // Final polish: with fused blocks snapped exactly, the returned point is
    // the one the duality gap actually certifies.
    if (!pb.diffs.empty()) {
        auto polished = detail::polish_fused(pb, best_phi);
        if (polished.second < best_pobj) {
            best_phi = std::move(polished.first);
            best_pobj = polished.second;
        }
    }

    rep.iterations = it;
    for (int c = 0; c < dim; ++c) rep.solution[c] = best_phi[c];
    for (std::size_t k = 0; k < nr; ++k) rep.dual[k] = best_d[k];
    rep.primal_objective = best_pobj;
    rep.dual_objective = y.dot(best_d);
    rep.duality_gap = std::abs(rep.primal_objective - rep.dual_objective) /
                      (1.0 + std::abs(rep.primal_objective));
    {
        Eigen::VectorXd atd(dim);
        apply_design_t(best_d, atd);
        double dres = 0.0;
        for (int c = 0; c < dim; ++c) dres = std::max(dres, std::abs(atd[c]) / (1.0 + colscale[c]));
        rep.dual_residual = dres;
        double box = 0.0;
        for (std::size_t k = 0; k < nr; ++k) {
            const double lo = -clo[k], hi = w[k] - clo[k];
            box = std::max(box, std::max(lo - best_d[k], best_d[k] - hi) / w[k]);
        }
        rep.dual_box_violation = std::max(0.0, box);
    }
    if (status != SolveStatus::converged &&
        rep.duality_gap <= cfg.gap_tol && rep.dual_residual <= cfg.feas_tol)
        status = SolveStatus::converged;
    rep.status = status;
    return rep;
}

}  // namespace panelq
