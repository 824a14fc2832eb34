#include "helpers.hpp"

#include "rdsys/credit.hpp"
#include "rdsys/fk.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <doctest.h>

#include <cmath>

using namespace rdsys;
using testing::channel;

namespace {

std::vector<std::vector<double>> x_axis(int n) { return {make_axis(0.5, 2.0, n, true)}; }

}  // namespace

TEST_CASE("beta norm") {
    const auto tg = uniform_grid(0.0, 1.0, 4);
    ValueField v(tg, x_axis(3), 2), w(tg, x_axis(3), 2);
    SUBCASE("identical fields are at distance zero") { CHECK(beta_norm(v, w, 3.0) == 0.0); }
    SUBCASE("beta zero is the sup distance") {
        v.at(2, 1, 1) = -0.7;
        v.at(4, 0, 2) = 0.4;
        CHECK(beta_norm(v, w, 0.0) == doctest::Approx(0.7));
    }
    SUBCASE("unit difference at t = 0 weighs e^{-beta T}") {
        v.at(0, 0, 0) = 1.0;
        CHECK(beta_norm(v, w, 2.0) == doctest::Approx(std::exp(-2.0)).epsilon(1e-14));
        const NodeRef arg = beta_norm_argmax(v, w, 2.0);
        CHECK(arg.ti == 0);
        CHECK(arg.k == 0);
        CHECK(arg.flat == 0);
    }
    SUBCASE("grid mismatch is a usage error") {
        ValueField u(tg, x_axis(4), 2);
        CHECK_THROWS_AS(beta_norm(v, u, 1.0), UsageError);
    }
}

TEST_CASE("operator F on payment-free claims") {
    const ModelSpec m = testing::gbm_model(1, 0.0, 0.2);
    FkConfig cfg;
    cfg.paths_per_node = 200;
    const auto tg = uniform_grid(0.0, 1.0, 5);
    SUBCASE("unit payoff stays at one with zero variance") {
        ClaimSpec c = ClaimSpec::zero(1);
        c.terminal = TerminalPayoff::constant({1.0});
        c = testing::claim_with_bounds(m, c);
        const FkResult r = apply_F(m, c, constant_field(tg, x_axis(5), 1, 0.0), cfg);
        for (double v : r.value.values()) CHECK(v == 1.0);
        for (double s : r.se.values()) CHECK(s == 0.0);
    }
    SUBCASE("negative discount rate gives the deterministic discount factor") {
        ClaimSpec c = ClaimSpec::zero(1);
        c.terminal = TerminalPayoff::constant({1.0});
        c.discount = {-0.3};
        c = testing::claim_with_bounds(m, c);
        const FkResult r = apply_F(m, c, constant_field(tg, x_axis(5), 1, 0.0), cfg);
        for (std::size_t ti = 0; ti < tg.size(); ++ti) {
            for (std::size_t f = 0; f < r.value.space_count(); ++f) {
                const double expect = std::exp(-0.3 * (1.0 - tg[ti]));
                CHECK(std::abs(r.value.at(ti, 0, f) - expect) <= 3.0 * r.se.at(ti, 0, f) + 1e-12);
            }
        }
    }
}

TEST_CASE("one application of F to zero on the treasury bond matches the explicit integral") {
    BondOptions opt;
    opt.R = 0.4;
    opt.lambda = IntensitySpec::constant(0.5);
    const Scenario sc = scenario_defaultable_bond(opt);
    FkConfig cfg;
    cfg.paths_per_node = 100;
    const auto tg = uniform_grid(0.0, 1.0, 10);
    const FkResult r = apply_F(sc.model, sc.claim, constant_field(tg, x_axis(4), 2, 0.0), cfg);
    // With v = 0 the surviving-state integrand is the constant lambda R and the terminal value is one.
    for (std::size_t ti = 0; ti < tg.size(); ++ti) {
        const double integral =
            boost::math::quadrature::gauss_kronrod<double, 15>::integrate([](double) { return 0.5 * 0.4; }, tg[ti], 1.0);
        CHECK(r.value.at(ti, 0, 1) == doctest::Approx(1.0 + integral).epsilon(1e-9));
        CHECK(r.value.at(ti, 1, 1) == doctest::Approx(0.0));
    }
}

TEST_CASE("fixed-point iteration") {
    FkConfig cfg;
    cfg.paths_per_node = 200;
    const auto tg = uniform_grid(0.0, 1.0, 8);

    SUBCASE("a value-independent claim converges after a single application") {
        const ModelSpec m = testing::gbm_model(1, 0.0, 0.2);
        ClaimSpec c = ClaimSpec::zero(1);
        c.terminal = TerminalPayoff::constant({2.0});
        c.flow_level = {0.1};
        c = testing::claim_with_bounds(m, c);
        const auto r = iterate_to_fixed_point(m, c, constant_field(tg, x_axis(4), 1, -5.0), 1.0, 1e-12, 10, cfg);
        REQUIRE(r.trace.steps.size() == 2);
        CHECK(r.trace.steps[1].beta_dist == 0.0);
    }

    SUBCASE("measured rate respects the contraction bound and two starts agree") {
        const ModelSpec m = testing::gbm_model(2, 0.0, 0.2, {channel(0, 1, 0.3)});
        ClaimSpec c = ClaimSpec::zero(2);
        c.terminal = TerminalPayoff::constant({1.0, 0.0});
        c.jump_level(0, 1) = 0.4;
        c = testing::claim_with_bounds(m, c);
        const double beta = default_beta(m, c);
        const double tol = 1e-8;
        const auto a = iterate_to_fixed_point(m, c, constant_field(tg, x_axis(4), 2, 0.0), beta, tol, 40, cfg, 6);
        CHECK(a.trace.theoretical_rate == doctest::Approx(0.5));
        for (std::size_t i = 1; i < a.trace.steps.size(); ++i) {
            const auto& prev = a.trace.steps[i - 1];
            if (prev.beta_dist == 0.0) continue;
            CHECK(a.trace.steps[i].beta_dist <= a.trace.theoretical_rate * prev.beta_dist + 3.0 * a.trace.steps[i].se + 1e-15);
        }
        const auto b =
            iterate_to_fixed_point(m, c, constant_field(tg, x_axis(4), 2, c.bounds.K3), beta, tol, 40, cfg, 6);
        for (std::size_t i = 0; i < a.value.size(); ++i) {
            const double se = std::max(a.se.values()[i], b.se.values()[i]);
            CHECK(std::abs(a.value.values()[i] - b.value.values()[i]) <= 2.0 * tol + 3.0 * se + 1e-12);
        }
    }

    SUBCASE("failure to converge carries the trace") {
        const ModelSpec m = testing::gbm_model(2, 0.0, 0.2, {channel(0, 1, 0.3)});
        ClaimSpec c = ClaimSpec::zero(2);
        c.terminal = TerminalPayoff::constant({1.0, 0.0});
        c = testing::claim_with_bounds(m, c);
        try {
            iterate_to_fixed_point(m, c, constant_field(tg, x_axis(3), 2, 0.0), 1.0, 1e-300, 2, cfg);
            FAIL("expected a convergence error");
        } catch (const ConvergenceError& e) {
            CHECK(e.trace().steps.size() == 2);
        }
    }
}

TEST_CASE("Feynman-Kac node estimates are reproducible") {
    const ModelSpec m = testing::gbm_model(2, 0.0, 0.3, {channel(0, 1, 0.5)});
    ClaimSpec c = ClaimSpec::zero(2);
    c.terminal = TerminalPayoff::constant({1.0, 0.2});
    c = testing::claim_with_bounds(m, c);
    FkConfig cfg;
    cfg.paths_per_node = 100;
    const auto tg = uniform_grid(0.0, 1.0, 4);
    const auto v = constant_field(tg, x_axis(5), 2, 0.3);
    const auto a = apply_F(m, c, v, cfg);
    const auto b = apply_F(m, c, v, cfg);
    for (std::size_t i = 0; i < a.value.size(); ++i) CHECK(a.value.values()[i] == b.value.values()[i]);
}
