#include "helpers.hpp"

#include "rdsys/validation.hpp"

#include <doctest.h>

#include <limits>

using namespace rdsys;
using testing::channel;
using testing::mat1;
using testing::vec1;

TEST_CASE("identity diffusion without drift passes every assumption with zero market price of risk") {
    ModelSpec m;
    m.domain = {DomainKind::FullSpace, 2};
    m.regimes = 1;
    m.brownian_dim = 2;
    m.drift = CoefficientField::zero(1, 2, 1);
    m.vol = CoefficientField::constant({Mat::Identity(2, 2)});
    m.intensities = IntensityMatrix(1, {}, 0.0);
    m.check();
    ClaimSpec c = testing::claim_with_bounds(m, ClaimSpec::zero(1));
    const auto rep = validate_model(m, c, make_probe_grid(m, -2.0, 2.0, 3, 5));
    CHECK(rep.passed());
    const auto* mpr = rep.find("market_price_of_risk_bounded");
    REQUIRE(mpr != nullptr);
    CHECK(mpr->worst == 0.0);
    Vec x(2);
    x << 0.3, -1.0;
    const auto phi = m.market_price_of_risk(0.5, x, 0);
    REQUIRE(phi.has_value());
    CHECK(phi->norm() == 0.0);
}

TEST_CASE("a zero volatility row is reported as singular diffusion") {
    ModelSpec m;
    m.domain = {DomainKind::FullSpace, 2};
    m.regimes = 1;
    m.brownian_dim = 2;
    m.drift = CoefficientField::zero(1, 2, 1);
    Mat s = Mat::Zero(2, 2);
    s(0, 0) = 1.0;
    m.vol = CoefficientField::constant({s});
    m.intensities = IntensityMatrix(1, {}, 0.0);
    ClaimSpec c = testing::claim_with_bounds(m, ClaimSpec::zero(1));
    const auto rep = validate_model(m, c, make_probe_grid(m, -1.0, 1.0, 2, 3));
    const auto* nd = rep.find("diffusion_nondegenerate");
    REQUIRE(nd != nullptr);
    CHECK_FALSE(nd->passed);
    CHECK_FALSE(rep.passed());
}

TEST_CASE("Black-Scholes market price of risk is gamma over sigma at every node") {
    const ModelSpec m = testing::gbm_model(1, 0.05, 0.2);
    for (double t : {0.0, 0.3, 1.0}) {
        for (double x : {0.5, 1.0, 7.0}) {
            const auto phi = m.market_price_of_risk(t, vec1(x), 0);
            REQUIRE(phi.has_value());
            CHECK((*phi)[0] == doctest::Approx(0.25).epsilon(1e-12));
        }
    }
}

TEST_CASE("non-finite coefficient values raise a model-definition error") {
    ModelSpec m = testing::gbm_model(1, 0.0, 0.2);
    m.drift = CoefficientField::constant({mat1(std::numeric_limits<double>::quiet_NaN())});
    ClaimSpec c = testing::claim_with_bounds(testing::gbm_model(1, 0.0, 0.2), ClaimSpec::zero(1));
    CHECK_THROWS_AS(validate_model(m, c, make_probe_grid(m, 0.5, 2.0, 2, 2)), ModelDefinitionError);
}

TEST_CASE("empty probe grid is a usage error") {
    const ModelSpec m = testing::gbm_model(1, 0.0, 0.2);
    ClaimSpec c = testing::claim_with_bounds(m, ClaimSpec::zero(1));
    CHECK_THROWS_AS(validate_model(m, c, {}), UsageError);
}

TEST_CASE("interaction families") {
    const ModelSpec m = testing::gbm_model(2, 0.0, 0.2, {channel(0, 1, 0.3)});
    ClaimSpec c = ClaimSpec::zero(2);
    const Vec x = vec1(1.0);

    SUBCASE("equal coordinates and no payments give zero for both families") {
        const std::vector<double> v{0.7, 0.7};
        CHECK(eval_interaction_g(c, m, 0.0, x, 0, v) == 0.0);
        c.family = InteractionFamily::Exponential;
        c.risk_aversion = 2.0;
        CHECK(eval_interaction_g(c, m, 0.0, x, 0, v) == doctest::Approx(0.0));
    }
    SUBCASE("linear family substitutes lambda (v^j - v^k)") {
        const std::vector<double> v{1.0, 0.0};
        CHECK(eval_interaction_g(c, m, 0.0, x, 0, v) == doctest::Approx(-0.3).epsilon(1e-14));
        CHECK(eval_interaction_g(c, m, 0.0, x, 1, v) == 0.0);
    }
    SUBCASE("exponential family approaches the linear one as alpha vanishes") {
        const std::vector<double> v{1.0, 0.0};
        c.family = InteractionFamily::Exponential;
        c.risk_aversion = 1e-6;
        CHECK(std::abs(eval_interaction_g(c, m, 0.0, x, 0, v) + 0.3) < 1e-6);
    }
    SUBCASE("non-positive risk aversion is rejected") {
        c.family = InteractionFamily::Exponential;
        c.risk_aversion = 0.0;
        CHECK_THROWS_AS(c.check(m), ConfigurationError);
        c.risk_aversion = -1.0;
        CHECK_THROWS_AS(c.check(m), ConfigurationError);
    }
}

TEST_CASE("model evaluation is bit-for-bit deterministic") {
    const ModelSpec m = testing::gbm_model(2, 0.05, 0.2, {{0, 1, 1.0, RateProfile::logistic(0.1, 1.0, 4.0, 1.0)}});
    for (double x : {0.3, 1.0, 2.5}) {
        const Vec a1 = m.drift_at(0.4, vec1(x), 0), a2 = m.drift_at(0.4, vec1(x), 0);
        CHECK(a1[0] == a2[0]);
        CHECK(m.intensity(0.4, vec1(x), 0, 1) == m.intensity(0.4, vec1(x), 0, 1));
        CHECK(m.diffusion_at(0.4, vec1(x), 1)(0, 0) == m.diffusion_at(0.4, vec1(x), 1)(0, 0));
    }
}

TEST_CASE("logistic profile matches its formula and stays within its levels") {
    const RateProfile p = RateProfile::logistic(0.1, 1.0, 4.0, 1.0);
    for (double x : {0.2, 1.0, 3.0}) {
        const double expect = 0.1 + 0.9 / (1.0 + std::exp(4.0 * (x - 1.0)));
        CHECK(p.eval(0.0, vec1(x)) == doctest::Approx(expect).epsilon(1e-14));
        CHECK(p.eval(0.0, vec1(x)) <= p.upper_bound());
    }
    CHECK(p.depends_on_x());
    CHECK_FALSE(RateProfile::constant(0.5).depends_on_x());
}

TEST_CASE("intensity matrix rejects self jumps and duplicate channels") {
    CHECK_THROWS_AS(IntensityMatrix(2, {channel(0, 0, 0.1)}, 1.0), ConfigurationError);
    CHECK_THROWS_AS(IntensityMatrix(2, {channel(0, 1, 0.1), channel(0, 1, 0.2)}, 1.0), ConfigurationError);
    CHECK_THROWS_AS(IntensityMatrix(2, {channel(0, 2, 0.1)}, 1.0), ConfigurationError);
}

TEST_CASE("declared intensity bound must dominate every channel") {
    ModelSpec m = testing::gbm_model(2, 0.0, 0.2, {channel(0, 1, 0.5)});
    m.intensities = IntensityMatrix(2, {channel(0, 1, 0.5)}, 0.4);
    CHECK_THROWS_AS(m.check(), ConfigurationError);
}

TEST_CASE("truncation boundary kappa") {
    ClaimSpec c = ClaimSpec::zero(1);
    SUBCASE("equals K3 at maturity") {
        c.bounds.K1 = 0.7;
        c.bounds.K2 = 0.0;
        c.bounds.K3 = 2.0;
        CHECK(kappa_bound(c, 1.0, 1.0) == doctest::Approx(2.0));
        c.bounds.K2 = 0.4;
        CHECK(kappa_bound(c, 1.0, 1.0) == doctest::Approx(2.0));
    }
    SUBCASE("K2 = 0 grows linearly") {
        c.bounds.K1 = 1.0;
        c.bounds.K2 = 0.0;
        c.bounds.K3 = 2.0;
        CHECK(kappa_bound(c, 4.0, 1.0) == doctest::Approx(5.0).epsilon(1e-14));
    }
    SUBCASE("small K2 recovers the linear branch") {
        c.bounds.K1 = 1.0;
        c.bounds.K3 = 2.0;
        c.bounds.K2 = 0.0;
        const double lin = kappa_bound(c, 4.0, 1.0);
        c.bounds.K2 = 1e-8;
        CHECK(std::abs(kappa_bound(c, 4.0, 1.0) - lin) < 1e-6);
    }
    SUBCASE("time outside the horizon is a usage error") {
        CHECK_THROWS_AS(kappa_bound(c, 1.0, 1.5), UsageError);
        CHECK_THROWS_AS(kappa_bound(c, 1.0, -0.1), UsageError);
    }
}
