#include "helpers.hpp"

#include "rdsys/credit.hpp"
#include "rdsys/sde.hpp"

#include <doctest.h>
#include <unsupported/Eigen/MatrixFunctions>

#include <bit>
#include <cmath>

using namespace rdsys;
using testing::channel;
using testing::vec1;

namespace {

double fraction_in(const PathBundle& b, int regime) {
    return weighted_estimate(b, [&](const MarketPath& p) { return p.regime.back() == regime ? 1.0 : 0.0; }).mean;
}

Estimate indicator(const PathBundle& b, int regime) {
    return weighted_estimate(b, [&](const MarketPath& p) { return p.regime.back() == regime ? 1.0 : 0.0; });
}

}  // namespace

TEST_CASE("degenerate SDE keeps the starting point") {
    ModelSpec m = testing::gbm_model(1, 0.0, 0.0);
    const FrozenPath p = simulate_frozen(m, 0.0, vec1(1.3), 0, 20, Scheme::Euler, 7);
    for (std::size_t i = 0; i < p.time_grid.size(); ++i) CHECK(p.at(i)[0] == 1.3);
}

TEST_CASE("deterministic growth is exact under the log scheme") {
    ModelSpec m = testing::gbm_model(1, 0.05, 0.0);
    const FrozenPath p = simulate_frozen(m, 0.2, vec1(2.0), 0, 16, Scheme::LogEuler, 1);
    for (std::size_t i = 0; i < p.time_grid.size(); ++i) {
        CHECK(p.at(i)[0] == doctest::Approx(2.0 * std::exp(0.05 * (p.time_grid[i] - 0.2))).epsilon(1e-13));
    }
}

TEST_CASE("driftless lognormal terminal mean equals the start") {
    ModelSpec m = testing::gbm_model(1, 0.0, 0.2);
    MarketSimConfig cfg;
    cfg.paths = 100000;
    cfg.steps = 10;
    cfg.record_brownian = false;
    const PathBundle b = simulate_market_pasting(m, vec1(1.0), 0, cfg);
    const Estimate e = weighted_estimate(b, [](const MarketPath& p) { return p.s.back(); });
    CHECK(std::abs(e.mean - 1.0) <= 3.0 * e.se);
}

TEST_CASE("no intensities means no regime changes") {
    ModelSpec m = testing::gbm_model(3, 0.0, 0.3);
    MarketSimConfig cfg;
    cfg.paths = 200;
    cfg.steps = 20;
    const PathBundle b = simulate_market_pasting(m, vec1(1.0), 2, cfg);
    for (const auto& p : b.paths) {
        CHECK(p.jumps.empty());
        for (int k : p.regime) CHECK(k == 2);
    }
}

TEST_CASE("absorbing default survival matches the exponential law") {
    ModelSpec m = testing::gbm_model(2, 0.0, 0.2, {channel(0, 1, 0.5)});
    MarketSimConfig cfg;
    cfg.paths = 100000;
    cfg.steps = 20;
    cfg.record_brownian = false;
    SUBCASE("pasting") {
        const Estimate e = indicator(simulate_market_pasting(m, vec1(1.0), 0, cfg), 0);
        CHECK(std::abs(e.mean - std::exp(-0.5)) <= 3.0 * e.se);
    }
    SUBCASE("reweighting") {
        const Estimate e = indicator(simulate_market_reweight(m, vec1(1.0), 0, cfg), 0);
        CHECK(std::abs(e.mean - std::exp(-0.5)) <= 3.0 * e.se);
    }
}

TEST_CASE("contagion basket joint default frequency matches the four-state chain") {
    BasketOptions opt;
    opt.firms = 2;
    opt.lambda_bar = IntensitySpec::constant(0.3);
    opt.contagion = 2.0;
    const Scenario sc = scenario_contagion_basket(opt);
    // Generator on bitmask states {00, 01, 10, 11}.
    Eigen::Matrix4d q = Eigen::Matrix4d::Zero();
    for (int k = 0; k < 4; ++k) {
        for (int bit = 0; bit < 2; ++bit) {
            if (k & (1 << bit)) continue;
            const double rate = 0.3 * std::pow(2.0, std::popcount(static_cast<unsigned>(k)));
            q(k, k | (1 << bit)) += rate;
            q(k, k) -= rate;
        }
    }
    const Eigen::Matrix4d p = (q * sc.model.horizon).exp();
    MarketSimConfig cfg;
    cfg.paths = 100000;
    cfg.steps = 20;
    cfg.record_brownian = false;
    const PathBundle b = simulate_market_pasting(sc.model, sc.s0, 0, cfg);
    for (int k = 0; k < 4; ++k) {
        const Estimate e = indicator(b, k);
        CHECK(std::abs(e.mean - p(0, k)) <= 3.0 * e.se);
    }
}

TEST_CASE("identical unit intensities leave the reference weights at one") {
    ModelSpec m = testing::gbm_model(2, 0.0, 0.2, {channel(0, 1, 1.0), channel(1, 0, 1.0)});
    MarketSimConfig cfg;
    cfg.paths = 300;
    cfg.steps = 20;
    const PathBundle b = simulate_market_reweight(m, vec1(1.0), 0, cfg);
    for (const auto& p : b.paths)
        for (double w : p.weight) CHECK(w == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("reweighted and pasted constructions agree on a smooth functional") {
    ModelSpec m = testing::gbm_model(2, 0.0, 0.25, {{0, 1, 1.0, RateProfile::logistic(0.1, 1.0, 4.0, 1.0)}, channel(1, 0, 0.4)});
    MarketSimConfig cfg;
    cfg.paths = 40000;
    cfg.steps = 25;
    cfg.record_brownian = false;
    auto phi = [](const MarketPath& p) { return (p.regime.back() + 1.0) * std::exp(-p.s.back()); };
    const Estimate a = weighted_estimate(simulate_market_pasting(m, vec1(1.0), 0, cfg), phi);
    const Estimate b = weighted_estimate(simulate_market_reweight(m, vec1(1.0), 0, cfg), phi);
    CHECK(std::abs(a.mean - b.mean) <= 3.0 * std::hypot(a.se, b.se));
}

TEST_CASE("minimal martingale measure") {
    MarketSimConfig cfg;
    cfg.paths = 100000;
    cfg.steps = 20;
    SUBCASE("zero drift gives unit density") {
        ModelSpec m = testing::gbm_model(1, 0.0, 0.2);
        cfg.paths = 500;
        const PathBundle b = simulate_minimal_elmm(m, vec1(1.0), 0, cfg);
        for (const auto& p : b.paths) CHECK(p.terminal_weight() == 1.0);
    }
    SUBCASE("weighted stock is a martingale and the density has mean one") {
        ModelSpec m = testing::gbm_model(1, 0.05, 0.2);
        const PathBundle b = simulate_minimal_elmm(m, vec1(1.0), 0, cfg);
        const Estimate s = weighted_estimate(b, [](const MarketPath& p) { return p.s.back(); });
        CHECK(std::abs(s.mean - 1.0) <= 3.0 * s.se);
        std::vector<double> z;
        for (const auto& p : b.paths) z.push_back(p.terminal_weight());
        const Estimate ez = estimate(z);
        CHECK(std::abs(ez.mean - 1.0) <= 3.0 * ez.se);
    }
    SUBCASE("missing Brownian increments is a usage error") {
        ModelSpec m = testing::gbm_model(1, 0.05, 0.2);
        cfg.paths = 10;
        cfg.record_brownian = false;
        CHECK_THROWS_AS(girsanov_to_minimal_elmm(m, simulate_market_pasting(m, vec1(1.0), 0, cfg)), UsageError);
    }
}

TEST_CASE("thinning against an understated bound is a model-definition error") {
    ModelSpec m = testing::gbm_model(2, 0.0, 0.2, {channel(0, 1, 2.0)});
    m.intensities = IntensityMatrix(2, {channel(0, 1, 2.0)}, 0.5);
    Rng rng = make_stream(1, 2);
    const auto grid = uniform_grid(0.0, 1.0, 10);
    CHECK_THROWS_AS(
        [&] {
            for (int i = 0; i < 50; ++i) simulate_market_path(m, vec1(1.0), 0, grid, Construction::Pasting, Scheme::LogEuler, false, rng);
        }(),
        ModelDefinitionError);
}

TEST_CASE("same seed reproduces the bundle exactly") {
    ModelSpec m = testing::gbm_model(2, 0.0, 0.3, {channel(0, 1, 0.7), channel(1, 0, 0.2)});
    MarketSimConfig cfg;
    cfg.paths = 500;
    cfg.steps = 30;
    const PathBundle a = simulate_market_pasting(m, vec1(1.0), 0, cfg);
    const PathBundle b = simulate_market_pasting(m, vec1(1.0), 0, cfg);
    REQUIRE(a.paths.size() == b.paths.size());
    for (std::size_t i = 0; i < a.paths.size(); ++i) {
        CHECK(a.paths[i].s == b.paths[i].s);
        CHECK(a.paths[i].regime == b.paths[i].regime);
        CHECK(a.paths[i].dW == b.paths[i].dW);
    }
    CHECK(fraction_in(a, 1) == fraction_in(b, 1));
}
