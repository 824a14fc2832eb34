#include "helpers.hpp"

#include "rdsys/config_io.hpp"
#include "rdsys/credit.hpp"

#include <doctest.h>
#include <unsupported/Eigen/MatrixFunctions>

#include <bit>
#include <cmath>

using namespace rdsys;
using testing::vec1;

TEST_CASE("bond oracles at the initial node") {
    BondOptions opt;
    opt.lambda = IntensitySpec::constant(0.5);
    const Vec x = vec1(1.0);
    SUBCASE("zero recovery is the survival probability") {
        opt.R = 0.0;
        CHECK(scenario_defaultable_bond(opt).oracle(0.0, x, 0) == doctest::Approx(std::exp(-0.5)).epsilon(1e-14));
    }
    SUBCASE("treasury recovery") {
        opt.R = 0.4;
        CHECK(scenario_defaultable_bond(opt).oracle(0.0, x, 0) ==
              doctest::Approx(std::exp(-0.5) + 0.4 * (1.0 - std::exp(-0.5))).epsilon(1e-14));
    }
    SUBCASE("market-value recovery") {
        opt.R = 0.4;
        opt.recovery = RecoveryMode::MarketValue;
        CHECK(scenario_defaultable_bond(opt).oracle(0.0, x, 0) == doctest::Approx(std::exp(-0.3)).epsilon(1e-14));
    }
    SUBCASE("chain oracle agrees with both closed forms") {
        for (auto mode : {RecoveryMode::Treasury, RecoveryMode::MarketValue}) {
            opt.recovery = mode;
            const Scenario sc = scenario_defaultable_bond(opt);
            for (double t : {0.0, 0.3, 0.9}) {
                const auto v = markov_chain_value(sc.model, sc.claim, 1.0 - t);
                CHECK(v[0] == doctest::Approx(sc.oracle(t, x, 0)).epsilon(1e-12));
                CHECK(v[1] == doctest::Approx(sc.oracle(t, x, 1)).epsilon(1e-12));
            }
        }
    }
    SUBCASE("recovery outside [0, 1) is rejected") {
        opt.R = 1.0;
        CHECK_THROWS_AS(scenario_defaultable_bond(opt), ConfigurationError);
    }
}

TEST_CASE("contagion basket") {
    BasketOptions opt;
    SUBCASE("without contagion the firms default independently") {
        opt.contagion = 1.0;
        const Scenario sc = scenario_contagion_basket(opt);
        ClaimSpec both = ClaimSpec::zero(4);
        both.terminal = TerminalPayoff::constant({1.0, 0.0, 0.0, 0.0});
        both = testing::claim_with_bounds(sc.model, both);
        CHECK(markov_chain_value(sc.model, both, 1.0)[0] == doctest::Approx(std::exp(-2.0 * 0.3)).epsilon(1e-12));
    }
    SUBCASE("joint survival with contagion matches an explicit four-state exponential") {
        opt.contagion = 2.0;
        const Scenario sc = scenario_contagion_basket(opt);
        Eigen::Matrix4d q = Eigen::Matrix4d::Zero();
        for (int k = 0; k < 4; ++k)
            for (int bit = 0; bit < 2; ++bit)
                if (!(k & (1 << bit))) {
                    const double r = 0.3 * std::pow(2.0, std::popcount(static_cast<unsigned>(k)));
                    q(k, k | (1 << bit)) = r;
                    q(k, k) -= r;
                }
        const Eigen::Matrix4d p = q.exp();
        ClaimSpec both = ClaimSpec::zero(4);
        both.terminal = TerminalPayoff::constant({1.0, 0.0, 0.0, 0.0});
        both = testing::claim_with_bounds(sc.model, both);
        CHECK(markov_chain_value(sc.model, both, 1.0)[0] == doctest::Approx(p(0, 0)).epsilon(1e-12));
        ClaimSpec last = ClaimSpec::zero(4);
        last.terminal = TerminalPayoff::constant({0.0, 0.0, 0.0, 1.0});
        last = testing::claim_with_bounds(sc.model, last);
        CHECK(markov_chain_value(sc.model, last, 1.0)[0] == doctest::Approx(p(0, 3)).epsilon(1e-12));
    }
    SUBCASE("the all-default state is absorbing and only single defaults occur") {
        opt.firms = 3;
        const Scenario sc = scenario_contagion_basket(opt);
        CHECK(sc.model.regimes == 8);
        CHECK(sc.model.intensities.channels_from(7).empty());
        for (const auto& e : sc.model.intensities.entries()) {
            CHECK(std::popcount(static_cast<unsigned>(e.from ^ e.to)) == 1);
            CHECK((e.to & e.from) == e.from);
        }
    }
    SUBCASE("basket size limits") {
        opt.firms = 1;
        CHECK_THROWS_AS(scenario_contagion_basket(opt), ConfigurationError);
        opt.firms = 11;
        CHECK_THROWS_AS(scenario_contagion_basket(opt), ConfigurationError);
    }
}

TEST_CASE("crash at default") {
    CrashOptions opt;
    SUBCASE("full stock recovery means no crash drift") {
        opt.stock_recovery = 1.0;
        const Scenario sc = scenario_crash_at_default(opt);
        for (double x : {0.5, 1.0, 2.0}) CHECK(sc.model.drift_at(0.2, vec1(x), 0)[0] == 0.0);
    }
    SUBCASE("crash drift compensates the expected drop") {
        opt.stock_recovery = 0.4;
        opt.lambda = IntensitySpec::constant(0.5);
        const Scenario sc = scenario_crash_at_default(opt);
        CHECK(sc.model.drift_at(0.0, vec1(2.0), 0)[0] == doctest::Approx(0.6 * 0.5 * 2.0));
        CHECK(sc.model.drift_at(0.0, vec1(2.0), 1)[0] == 0.0);
        CHECK(sc.oracle(0.0, vec1(1.0), 0) == doctest::Approx(std::exp(-0.5 * 0.6)).epsilon(1e-14));
    }
    SUBCASE("post-default payoff needs a positive stock recovery") {
        opt.stock_recovery = 0.0;
        opt.post_default_weight = 1.0;
        CHECK_THROWS_AS(scenario_crash_at_default(opt), ConfigurationError);
    }
    SUBCASE("the drifted stock with its crash is a martingale") {
        for (double rec : {0.0, 0.4, 1.0}) {
            opt.stock_recovery = rec;
            const Scenario sc = scenario_crash_at_default(opt);
            const auto r = crash_martingale_check(sc.model, sc.s0, 20000, 50, 9);
            CHECK(r.passed);
        }
    }
}

TEST_CASE("capped call quadrature") {
    CHECK(capped_call_value(1.2, 0.2, 0.0, 1.0, 0.5) == doctest::Approx(0.2));
    // Cap far above the reachable range: plain Black-Scholes call.
    const double x = 1.0, s = 0.2, tau = 1.0, K = 1.0;
    const double d1 = (std::log(x / K) + 0.5 * s * s * tau) / (s * std::sqrt(tau));
    auto N = [](double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); };
    const double bs = x * N(d1) - K * N(d1 - s * std::sqrt(tau));
    CHECK(capped_call_value(x, s, tau, K, 1e3) == doctest::Approx(bs).epsilon(1e-9));
}

TEST_CASE("shipped scenarios are consistent") {
    const auto names = shipped_scenario_names();
    CHECK(names.size() == 8);
    for (const auto& sc : shipped_scenarios()) {
        CAPTURE(sc.name);
        CHECK_NOTHROW(sc.model.check());
        CHECK_NOTHROW(sc.claim.check(sc.model));
        CHECK(scenario_by_name(sc.name).name == sc.name);
    }
    CHECK_THROWS_AS(scenario_by_name("no_such_scenario"), ConfigurationError);
}

TEST_CASE("scenario documents round-trip") {
    for (const auto& sc : shipped_scenarios()) {
        CAPTURE(sc.name);
        const Json doc = scenario_to_json(sc);
        const Scenario back = scenario_from_json(doc);
        CHECK(scenario_to_json(back).dump() == doc.dump());
        CHECK(back.has_oracle() == sc.has_oracle());
    }
    SUBCASE("an edited document loses the shipped oracle") {
        Json doc = scenario_to_json(scenario_by_name("defaultable_bond_treasury"));
        doc["model"]["horizon"] = 2.0;
        CHECK_FALSE(scenario_from_json(doc).has_oracle());
    }
    SUBCASE("schema version mismatch is rejected") {
        Json doc = scenario_to_json(scenario_by_name("capped_call"));
        doc["schema_version"] = 99;
        CHECK_THROWS_AS(scenario_from_json(doc), ConfigurationError);
    }
}
