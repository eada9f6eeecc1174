#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "panelq/rng.hpp"
#include "panelq/selection.hpp"
#include "support/oracles.hpp"
#include "support/testdata.hpp"

using namespace panelq;

TEST_CASE("hall-sheather bandwidth matches the closed form", "[selection]") {
    const QuantileLevel tau(0.5);
    const double h = hall_sheather_bandwidth(tau, 1800, 0.05);
    // independent rewrite of the formula
    const double z_a = normal_quantile(0.975);
    const double phi0 = 1.0 / std::sqrt(2.0 * M_PI);
    const double expected = std::pow(1800.0, -1.0 / 3.0) * std::pow(z_a, 2.0 / 3.0) *
                            std::cbrt(1.5 * phi0 * phi0);
    CHECK(h == Catch::Approx(expected).epsilon(1e-12));
    CHECK(h == Catch::Approx(0.0797).margin(1e-3));

    SECTION("vanishes with the sample size") {
        CHECK(hall_sheather_bandwidth(tau, 100000) < hall_sheather_bandwidth(tau, 1000));
        CHECK(hall_sheather_bandwidth(tau, 100000000) < 0.01);
    }
    SECTION("clipping keeps tau +/- h inside (0,1)") {
        const QuantileLevel hi(0.99);
        const double hh = hall_sheather_bandwidth(hi, 10);
        CHECK(hi.value + hh < 1.0);
        CHECK(hh > 0.0);
    }
    SECTION("bofinger rule") {
        const double hb = bofinger_bandwidth(tau, 1800);
        const double eb = std::pow(1800.0, -0.2) *
                          std::pow(4.5 * std::pow(phi0, 4.0), 0.2);
        CHECK(hb == Catch::Approx(eb).epsilon(1e-12));
    }
}

TEST_CASE("sparsity estimator hits analytic values", "[selection][oracle]") {
    const std::size_t m = 100000;
    SECTION("standard normal at the median") {
        RepRng rng(2024, 0);
        std::vector<double> r(m);
        for (double& v : r) v = rng.normal();
        const QuantileLevel tau(0.5);
        const double h = hall_sheather_bandwidth(tau, m);
        const double s = sparsity_from_residuals(r, tau, h);
        CHECK(s == Catch::Approx(std::sqrt(2.0 * M_PI)).epsilon(0.05));
    }
    SECTION("uniform at interior quantiles") {
        RepRng rng(2024, 1);
        std::vector<double> r(m);
        for (double& v : r) v = rng.uniform();
        for (double tv : {0.25, 0.5, 0.75}) {
            const QuantileLevel tau(tv);
            const double h = hall_sheather_bandwidth(tau, m);
            CHECK(sparsity_from_residuals(r, tau, h) == Catch::Approx(1.0).epsilon(0.05));
        }
    }
    SECTION("degenerate residuals give zero") {
        std::vector<double> r(50, 3.25);
        CHECK(sparsity_from_residuals(r, QuantileLevel(0.5), 0.1) == 0.0);
    }
}

TEST_CASE("ic constants arithmetic", "[selection]") {
    std::mt19937 rng(3);
    auto data = testdata::grouped_panel(rng, 30, 60);
    const QuantileLevel tau(0.5);
    auto fe = fit_fixed_effects(data, tau);
    const IcConstants c = ic_constants(data, tau, fe);
    CHECK(c.p_nt == Catch::Approx(30.0 * std::pow(60.0, 0.25) / 10.0).epsilon(1e-12));
    CHECK(c.p_nt == Catch::Approx(8.3497).margin(1e-3));
    CHECK(c.c_hat == Catch::Approx(0.25 * c.s_hat).epsilon(1e-12));
    CHECK(c.c_hat >= 1e-3);
    // residuals from a standard normal design: sparsity near sqrt(2*pi)
    CHECK(c.s_hat == Catch::Approx(std::sqrt(2.0 * M_PI)).epsilon(0.25));
}

TEST_CASE("refit collapses correctly at the extremes", "[selection]") {
    std::mt19937 rng(13);
    auto data = testdata::random_panel(rng, 5, 5, 9, 1);
    const QuantileLevel tau(0.5);
    auto fe = fit_fixed_effects(data, tau);

    SECTION("singleton groups reproduce the fixed-effects fit") {
        GroupStructure g = extract_groups(fe.alpha, 1e-9);
        REQUIRE(g.k == data.n);  // generic alpha are pairwise distinct
        auto rf = refit(data, tau, g, {});
        CHECK(rf.objective == Catch::Approx(fe.objective).epsilon(1e-8));
        for (int i = 0; i < data.n; ++i)
            CHECK(rf.centers[g.membership[i]] == Catch::Approx(fe.alpha[i]).margin(1e-5));
    }
    SECTION("one group is the pooled regression") {
        GroupStructure g;
        g.k = 1;
        g.centers = {0.0};
        g.membership.assign(data.n, 0);
        auto rf = refit(data, tau, g, {});
        QrProblem pooled;
        pooled.num_alpha = 1;
        pooled.num_covariates = data.p;
        pooled.x = data.x;
        for (std::size_t r = 0; r < data.rows(); ++r)
            pooled.rows.push_back({0, data.y[r], tau.value, 1.0});
        auto direct = solve_weighted_qr(pooled);
        CHECK(rf.objective == Catch::Approx(direct.primal_objective).epsilon(1e-8));
    }
}

TEST_CASE("ic selection invariants on a grouped panel", "[selection]") {
    std::mt19937 rng(29);
    auto data = testdata::grouped_panel(rng, 12, 40);
    const QuantileLevel tau(0.5);
    auto fe = fit_fixed_effects(data, tau);
    auto path = run_lambda_path(data, tau, LambdaGrid::regular(0.0, 0.35, 0.01), fe);
    auto sel = select_by_ic(path, data, tau, fe);

    REQUIRE(!sel.entries.empty());
    SECTION("entries have pairwise distinct group counts") {
        for (std::size_t i = 0; i < sel.entries.size(); ++i)
            for (std::size_t j = i + 1; j < sel.entries.size(); ++j)
                CHECK(sel.entries[i].k != sel.entries[j].k);
    }
    SECTION("ic decomposition is exact") {
        for (const auto& e : sel.entries)
            CHECK(e.ic_value - e.refit.objective ==
                  Catch::Approx(sel.c_hat * e.k * sel.p_nt).epsilon(1e-12));
    }
    SECTION("chosen minimizes the criterion") {
        for (const auto& e : sel.entries) CHECK(sel.selected().ic_value <= e.ic_value);
    }
    SECTION("refit never does worse than the penalized fit's loss term") {
        for (const auto& e : sel.entries) {
            // find the path entry this candidate came from
            const LambdaPathEntry* src = nullptr;
            for (const auto& pe : path.entries)
                if (pe.converged && pe.lambda == e.lambda) src = &pe;
            REQUIRE(src != nullptr);
            const double penalized_loss = total_check_loss(data, tau, src->alpha, src->beta);
            // allowance for the fuse tolerance: fitted alpha are only
            // group-constant up to path.fuse_tol
            const double slack =
                path.fuse_tol * static_cast<double>(data.rows()) * std::max(tau.value, 1 - tau.value);
            CHECK(e.refit.objective <= penalized_loss + slack + 1e-9);
        }
    }
    SECTION("selected structure on a well-separated panel is the truth") {
        CHECK(sel.selected().k == 3);
        auto alpha = sel.alpha_per_individual();
        REQUIRE(alpha.size() == static_cast<std::size_t>(data.n));
        // block structure of the generator: groups of 4 in order
        for (int i = 1; i < 4; ++i) CHECK(alpha[i] == alpha[0]);
    }
}

TEST_CASE("ic selection with a single path entry picks it", "[selection]") {
    std::mt19937 rng(37);
    auto data = testdata::grouped_panel(rng, 6, 15);
    const QuantileLevel tau(0.5);
    auto fe = fit_fixed_effects(data, tau);
    auto path = run_lambda_path(data, tau, LambdaGrid(std::vector<double>{0.0}), fe);
    auto sel = select_by_ic(path, data, tau, fe);
    REQUIRE(sel.entries.size() == 1);
    CHECK(sel.chosen == 0);
    CHECK(sel.selected().k == data.n);
}

TEST_CASE("ties in the criterion break toward fewer groups", "[selection]") {
    std::vector<IcEntry> entries(3);
    entries[0].k = 4;
    entries[0].ic_value = 10.0;
    entries[1].k = 2;
    entries[1].ic_value = 10.0;
    entries[2].k = 3;
    entries[2].ic_value = 10.5;
    CHECK(entries[pick_ic_argmin(entries)].k == 2);
    entries[2].ic_value = 9.0;
    CHECK(entries[pick_ic_argmin(entries)].k == 3);
}
