#include "helpers.hpp"

#include "rdsys/credit.hpp"
#include "rdsys/hedging.hpp"

#include <doctest.h>

#include <cmath>

using namespace rdsys;
using testing::channel;
using testing::vec1;

namespace {

ValueField solve_hedging_field(const ModelSpec& m, const ClaimSpec& c, AxisSpec axis, int nt) {
    PdeProblem pb;
    pb.model = m;
    pb.claim = c;
    pb.variant = PdeVariant::Hedging;
    pb.axes = {axis};
    pb.t_steps = nt;
    return solve_system(pb).value;
}

MarketSimConfig sim(std::size_t paths, int steps) {
    MarketSimConfig cfg;
    cfg.paths = paths;
    cfg.steps = steps;
    return cfg;
}

}  // namespace

TEST_CASE("constant claim has a trivial decomposition") {
    const ModelSpec m = testing::gbm_model(2, 0.0, 0.2, {channel(0, 1, 0.5)});
    ClaimSpec c = ClaimSpec::zero(2);
    c.terminal = TerminalPayoff::constant({0.8, 0.8});
    c = testing::claim_with_bounds(m, c);
    const auto field = solve_hedging_field(m, c, {0.25, 4.0, 41, Spacing::Log}, 50);
    const auto rep = build_hedge(field, m, c, simulate_minimal_elmm(m, vec1(1.0), 0, sim(500, 20)));
    CHECK(rep.H0 == doctest::Approx(0.8).epsilon(1e-12));
    for (const auto& p : rep.paths) {
        CHECK(std::abs(p.L_T) < 1e-12);
        CHECK(std::abs(p.gains) < 1e-12);
        CHECK(std::abs(p.residual) < 1e-12);
    }
    for (const auto& th : rep.theta_path)
        for (double x : th) CHECK(std::abs(x) < 1e-10);
}

TEST_CASE("x-independent bond is hedged by its jump martingale alone") {
    BondOptions opt;
    opt.lambda = IntensitySpec::constant(0.5);
    const Scenario sc = scenario_defaultable_bond(opt);
    const auto field = solve_hedging_field(sc.model, sc.claim, sc.axis, 200);
    double prev = 1.0;
    for (int steps : {25, 100}) {
        const auto rep = build_hedge(field, sc.model, sc.claim, simulate_minimal_elmm(sc.model, sc.s0, 0, sim(4000, steps)));
        for (const auto& th : rep.theta_path)
            for (double x : th) CHECK(std::abs(x) < 1e-8);
        CHECK(std::abs(rep.residual.mean) < prev);
        prev = std::abs(rep.residual.mean);
        for (const auto& p : rep.paths) CHECK(p.L_T + rep.H0 == doctest::Approx(p.H).epsilon(1e-4));
    }
}

TEST_CASE("without switching the claim is a plain delta hedge") {
    const Scenario sc = scenario_by_name("capped_call");
    const auto field = solve_hedging_field(sc.model, sc.claim, sc.axis, 200);
    std::vector<double> rms;
    for (int steps : {25, 100}) {
        const auto rep = build_hedge(field, sc.model, sc.claim, simulate_minimal_elmm(sc.model, sc.s0, 0, sim(4000, steps)));
        for (const auto& p : rep.paths) {
            CHECK(p.L_T == 0.0);
            CHECK(p.covariation == 0.0);
        }
        rms.push_back(rep.residual_left_rms);
        const auto orth = orthogonality_check(rep);
        CHECK(orth.covariation.mean == 0.0);
    }
    // Four times the steps: left-point RMS error should roughly halve.
    CHECK(rms[1] < 0.65 * rms[0]);
}

TEST_CASE("orthogonality on a defaultable bond with stock-linked intensity") {
    const Scenario sc = scenario_by_name("defaultable_bond_linked");
    const auto field = solve_hedging_field(sc.model, sc.claim, sc.axis, 100);
    const auto rep = build_hedge(field, sc.model, sc.claim, simulate_minimal_elmm(sc.model, sc.s0, 0, sim(10000, 50)));
    const auto orth = orthogonality_check(rep);
    CHECK(orth.covariation_zero);
    CHECK(orth.L_martingale);
}

TEST_CASE("recursive value identity") {
    BondOptions opt;
    opt.recovery = RecoveryMode::MarketValue;
    opt.lambda = IntensitySpec::constant(0.5);
    const Scenario sc = scenario_defaultable_bond(opt);
    PdeProblem pb;
    pb.model = sc.model;
    pb.claim = sc.claim;
    pb.axes = {sc.axis};
    pb.t_steps = 200;
    const auto field = solve_system(pb).value;
    std::vector<ProbeNode> nodes;
    for (double t : {0.0, 0.4, 0.8})
        for (int k : {0, 1}) nodes.push_back({t, vec1(1.0), k});
    RecursiveCheckConfig cfg;
    cfg.paths = 4000;
    cfg.steps_per_unit_time = 50;

    SUBCASE("market-value bond satisfies it against the closed form") {
        const auto rep = recursive_value_check(field, sc.model, sc.claim, true, nodes, cfg);
        CHECK(rep.passed);
        for (const auto& s : rep.samples) {
            const double exact = s.k == 0 ? std::exp(-0.5 * 0.6 * (1.0 - s.t)) : 0.0;
            CHECK(std::abs(s.mc.mean - exact) <= std::max(1e-2 * exact, 3.0 * s.mc.se) + 1e-12);
        }
    }
    SUBCASE("a bumped candidate is rejected") {
        cfg.bump = 0.05;
        const auto rep = recursive_value_check(field, sc.model, sc.claim, true, nodes, cfg);
        CHECK_FALSE(rep.passed);
    }
    SUBCASE("nonlinear families are not supported") {
        BondOptions e;
        e.family = InteractionFamily::Exponential;
        const Scenario se = scenario_defaultable_bond(e);
        CHECK_THROWS_AS(recursive_value_check(field, se.model, se.claim, true, nodes, cfg), ConfigurationError);
    }
}

TEST_CASE("completed-market replication") {
    BondOptions bo;
    bo.R = 0.0;
    bo.lambda = IntensitySpec::logistic(0.1, 1.0, 4.0, 1.0);
    const Scenario traded = scenario_defaultable_bond(bo);
    ReplicationConfig cfg;
    cfg.axis = traded.axis;
    cfg.t_steps = 100;
    cfg.path_steps = 50;
    cfg.paths = 2000;

    SUBCASE("the traded bond replicates itself exactly") {
        const auto rep = replicate_completed_market(traded.model, traded.claim, traded.claim, cfg);
        CHECK(rep.max_abs == 0.0);
        CHECK(rep.psi_min == 1.0);
        CHECK(rep.psi_max == 1.0);
        CHECK(rep.max_abs_stock_position == 0.0);
    }
    SUBCASE("the default digital is one unit of cash short one bond") {
        ClaimSpec digital = ClaimSpec::zero(2);
        digital.terminal = TerminalPayoff::constant({0.0, 1.0});
        digital = testing::claim_with_bounds(traded.model, digital);
        const auto rep = replicate_completed_market(traded.model, digital, traded.claim, cfg);
        CHECK(rep.psi_min == doctest::Approx(-1.0).epsilon(1e-6));
        CHECK(rep.psi_max == doctest::Approx(-1.0).epsilon(1e-6));
        CHECK(rep.max_abs_stock_position < 1e-6);
        CHECK(rep.max_abs < 1e-6);
    }
    SUBCASE("a bond with full recovery carries no default risk to trade") {
        ClaimSpec flat = ClaimSpec::zero(2);
        flat.terminal = TerminalPayoff::constant({1.0, 1.0});
        flat = testing::claim_with_bounds(traded.model, flat);
        CHECK_THROWS_AS(replicate_completed_market(traded.model, traded.claim, flat, cfg), DegeneracyError);
    }
}
