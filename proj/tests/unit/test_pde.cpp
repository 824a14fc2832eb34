#include "helpers.hpp"

#include "rdsys/credit.hpp"
#include "rdsys/markov_check.hpp"
#include "rdsys/pde.hpp"

#include <doctest.h>

#include <cmath>

using namespace rdsys;
using testing::channel;
using testing::vec1;

namespace {

PdeProblem problem_for(const Scenario& sc, int nx, int nt) {
    PdeProblem pb;
    pb.model = sc.model;
    pb.claim = sc.claim;
    pb.variant = sc.variant;
    AxisSpec a = sc.axis;
    a.count = nx;
    pb.axes = {a};
    pb.t_steps = nt;
    return pb;
}

double worst_error(const ValueField& v, const std::function<double(double, int)>& exact) {
    double worst = 0.0;
    for (std::size_t ti = 0; ti < v.time_count(); ++ti)
        for (int k = 0; k < v.regimes(); ++k)
            for (double x : v.layer(ti, k)) worst = std::max(worst, std::abs(x - exact(v.t_grid()[ti], k)));
    return worst;
}

}  // namespace

TEST_CASE("x-independent bonds reduce to the two-state ODE") {
    const double lam = 0.5, R = 0.4;
    BondOptions opt;
    opt.R = R;
    opt.lambda = IntensitySpec::constant(lam);
    SUBCASE("treasury recovery") {
        opt.recovery = RecoveryMode::Treasury;
        const auto r = solve_system(problem_for(scenario_defaultable_bond(opt), 41, 400));
        const double err = worst_error(r.value, [&](double t, int k) {
            const double s = std::exp(-lam * (1.0 - t));
            return k == 0 ? s + R * (1.0 - s) : 0.0;
        });
        CHECK(err <= 1e-6);
    }
    SUBCASE("market-value recovery") {
        opt.recovery = RecoveryMode::MarketValue;
        const auto r = solve_system(problem_for(scenario_defaultable_bond(opt), 41, 400));
        const double err = worst_error(r.value, [&](double t, int k) { return k == 0 ? std::exp(-lam * (1.0 - R) * (1.0 - t)) : 0.0; });
        CHECK(err <= 1e-6);
    }
}

TEST_CASE("capped call matches lognormal quadrature on interior nodes") {
    const Scenario sc = scenario_by_name("capped_call");
    const auto r = solve_system(problem_for(sc, sc.axis.count, 200));
    const auto& v = r.value;
    const auto& ax = v.axis(0);
    for (std::size_t ti = 0; ti < v.time_count(); ti += 20) {
        if (v.t_grid()[ti] > 0.9 * sc.model.horizon) break;
        for (std::size_t i = ax.size() / 3; i <= 2 * ax.size() / 3; i += 25) {
            const double o = sc.oracle(v.t_grid()[ti], vec1(ax[i]), 0);
            CHECK(std::abs(v.at(ti, 0, i) - o) <= std::max(1e-3 * std::abs(o), sc.tolerance.oracle_abs));
        }
    }
}

namespace {

struct ChainCase {
    ModelSpec model;
    ClaimSpec claim;
};

ChainCase two_regime_chain() {
    ChainCase cc{testing::gbm_model(2, 0.0, 0.2, {channel(0, 1, 0.6), channel(1, 0, 0.2)}), ClaimSpec::zero(2)};
    cc.claim.terminal = TerminalPayoff::constant({1.0, 3.0});
    cc.claim.flow_level = {0.1, -0.2};
    cc.claim = testing::claim_with_bounds(cc.model, cc.claim);
    return cc;
}

ValueField solve_chain(const ChainCase& cc, int t_steps) {
    PdeProblem pb;
    pb.model = cc.model;
    pb.claim = cc.claim;
    pb.axes = {AxisSpec{0.25, 4.0, 31, Spacing::Log}};
    pb.t_steps = t_steps;
    return solve_system(pb).value;
}

double worst_chain_error(const ChainCase& cc, const ValueField& v) {
    double worst = 0.0;
    for (std::size_t ti = 0; ti < v.time_count(); ++ti) {
        const auto exact = markov_chain_value(cc.model, cc.claim, 1.0 - v.t_grid()[ti]);
        for (int k = 0; k < 2; ++k)
            for (double x : v.layer(ti, k)) worst = std::max(worst, std::abs(x - exact[static_cast<size_t>(k)]));
    }
    return worst;
}

}  // namespace

TEST_CASE("two-regime chain with constant switching matches the matrix exponential") {
    const ChainCase cc = two_regime_chain();
    const ValueField v = solve_chain(cc, 1000);
    for (std::size_t ti = 0; ti < v.time_count(); ti += 50) {
        const auto exact = markov_chain_value(cc.model, cc.claim, 1.0 - v.t_grid()[ti]);
        for (int k = 0; k < 2; ++k)
            for (double x : v.layer(ti, k)) CHECK(x == doctest::Approx(exact[static_cast<size_t>(k)]).epsilon(1e-6));
    }
}

TEST_CASE("time stepping on the regime chain is second order") {
    const ChainCase cc = two_regime_chain();
    const double coarse = worst_chain_error(cc, solve_chain(cc, 100));
    const double fine = worst_chain_error(cc, solve_chain(cc, 200));
    CHECK(std::log2(coarse / fine) == doctest::Approx(2.0).epsilon(0.1));
}

TEST_CASE("solver rejects unsupported problems") {
    const Scenario sc = scenario_by_name("defaultable_bond_treasury");
    PdeProblem pb = problem_for(sc, 21, 20);
    SUBCASE("axis count must match the dimension") {
        pb.axes.push_back(pb.axes.front());
        CHECK_THROWS(solve_system(pb));
    }
    SUBCASE("crash variant needs a crash model") {
        pb.variant = PdeVariant::CrashAtDefault;
        CHECK_THROWS(solve_system(pb));
    }
}

TEST_CASE("generator") {
    const ModelSpec m = testing::gbm_model(2, 0.0, 0.3, {channel(0, 1, 0.5)});
    SUBCASE("constants are annihilated") {
        for (int k = 0; k < 2; ++k) CHECK(apply_generator(m, [](const Vec&, int) { return 4.2; }, 0.3, vec1(1.1), k) == doctest::Approx(0.0));
    }
    SUBCASE("the coordinate is harmonic without drift") {
        for (int k = 0; k < 2; ++k)
            CHECK(std::abs(apply_generator(m, [](const Vec& x, int) { return x[0]; }, 0.3, vec1(1.7), k)) < 1e-8);
    }
    SUBCASE("the default indicator generates the intensity") {
        CHECK(apply_generator(m, [](const Vec&, int k) { return k == 1 ? 1.0 : 0.0; }, 0.0, vec1(1.0), 0) ==
              doctest::Approx(0.5).epsilon(1e-12));
    }
    SUBCASE("x squared picks up the diffusion") {
        // A x^2 = sigma^2 x^2 under driftless geometric Brownian motion.
        CHECK(apply_generator(m, [](const Vec& x, int) { return x[0] * x[0]; }, 0.0, vec1(2.0), 1) ==
              doctest::Approx(0.09 * 4.0).epsilon(1e-6));
    }
    SUBCASE("bad inputs are usage errors") {
        auto f = [](const Vec&, int) { return 0.0; };
        CHECK_THROWS_AS(apply_generator(m, f, 0.0, vec1(1.0), 2), UsageError);
        CHECK_THROWS_AS(apply_generator(m, f, 0.0, vec1(-1.0), 0), UsageError);
    }
}

TEST_CASE("martingale suite on a switching market") {
    const ModelSpec m = testing::gbm_model(2, 0.0, 0.25, {{0, 1, 1.0, RateProfile::logistic(0.1, 1.0, 4.0, 1.0)}, channel(1, 0, 0.4)});
    MartingaleCheckConfig cfg;
    cfg.paths = 20000;
    cfg.steps = 50;
    const auto rep = martingale_check(m, vec1(1.0), 0, default_test_functions(m, vec1(1.0)), cfg);
    CHECK(rep.generator.size() == 25);
    CHECK(rep.counters.size() == 2);
    CHECK(rep.passed);
}

TEST_CASE("Markov restart check") {
    SUBCASE("unit payoff passes trivially") {
        const ModelSpec m = testing::gbm_model(2, 0.0, 0.2, {channel(0, 1, 0.5)});
        ClaimSpec c = ClaimSpec::zero(2);
        c.terminal = TerminalPayoff::constant({1.0, 1.0});
        c = testing::claim_with_bounds(m, c);
        MarkovCheckConfig cfg;
        cfg.axis = {0.25, 4.0, 41, Spacing::Log};
        cfg.outer = 40;
        cfg.inner = 40;
        const auto rep = markov_property_check(m, c, 1.0, vec1(1.0), 0, cfg);
        CHECK(rep.v0 == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(rep.passed);
    }
    SUBCASE("switching chain value comes from the matrix exponential") {
        const ModelSpec m = testing::gbm_model(2, 0.0, 0.2, {channel(0, 1, 0.5), channel(1, 0, 0.3)});
        ClaimSpec c = ClaimSpec::zero(2);
        c.terminal = TerminalPayoff::constant({1.0, 0.0});
        c = testing::claim_with_bounds(m, c);
        MarkovCheckConfig cfg;
        cfg.axis = {0.25, 4.0, 41, Spacing::Log};
        cfg.outer = 100;
        cfg.inner = 100;
        const auto rep = markov_property_check(m, c, 1.0, vec1(1.0), 0, cfg);
        CHECK(rep.v0 == doctest::Approx(markov_chain_value(m, c, 1.0)[0]).epsilon(1e-5));
        CHECK(rep.passed);
    }
}
