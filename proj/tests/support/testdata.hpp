#pragma once

// Shared synthetic data helpers for the test suite.

#include <random>
#include <vector>

#include "panelq/panel.hpp"

namespace testdata {

// Random unbalanced panel with continuous responses and covariates.
inline panelq::PanelData random_panel(std::mt19937& rng, int n, int t_min, int t_max, int p,
                                      double alpha_spread = 2.0) {
    std::uniform_int_distribution<int> dt(t_min, t_max);
    std::normal_distribution<double> dn(0.0, 1.0);
    std::uniform_real_distribution<double> da(-alpha_spread, alpha_spread);

    panelq::PanelData data;
    data.n = n;
    data.p = p;
    data.t_len.resize(n);
    std::vector<double> alpha(n);
    for (int i = 0; i < n; ++i) {
        data.t_len[i] = dt(rng);
        alpha[i] = da(rng);
    }
    for (int i = 0; i < n; ++i) {
        for (int t = 0; t < data.t_len[i]; ++t) {
            double fit = alpha[i];
            for (int j = 0; j < p; ++j) {
                const double xv = dn(rng);
                data.x.push_back(xv);
                fit += 0.7 * xv;
            }
            data.id.push_back(i);
            data.y.push_back(fit + dn(rng));
        }
    }
    data.validate();
    return data;
}

// Three-group location-shift panel in the style of the simulation designs.
inline panelq::PanelData grouped_panel(std::mt19937& rng, int n, int t, int p = 1,
                                       double center_gap = 1.0) {
    std::normal_distribution<double> dn(0.0, 1.0);
    panelq::PanelData data;
    data.n = n;
    data.p = p;
    data.t_len.assign(n, t);
    for (int i = 0; i < n; ++i) {
        const double alpha = center_gap * (1 + (3 * i) / n);
        for (int s = 0; s < t; ++s) {
            double fit = alpha;
            for (int j = 0; j < p; ++j) {
                const double xv = dn(rng);
                data.x.push_back(xv);
                fit += xv;
            }
            data.id.push_back(i);
            data.y.push_back(fit + dn(rng));
        }
    }
    data.validate();
    return data;
}

}  // namespace testdata
