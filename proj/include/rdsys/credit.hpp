#pragma once

#include "rdsys/pde.hpp"
#include "rdsys/stats.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace rdsys {

enum class OracleKind { ClosedForm, MatrixExponential, Quadrature, None };

const char* to_string(OracleKind k);

struct ToleranceProfile {
    double oracle_abs = 1e-5;
    double oracle_rel = 0.0;
    double cross_rel = 1e-2;
    double abs_floor = 1e-8;  // absolute slack of the cross-method and recursive checks near zero values
    double se_mult = 3.0;
};

// Ready-made market and claim with an optional independent value oracle.
// Two-state credit models use regime 0 = no default, 1 = default. Baskets use the little-endian
// bitmask of per-firm default flags as regime index (bit i set = firm i defaulted).
struct Scenario {
    std::string name;
    std::string description;
    ModelSpec model;
    ClaimSpec claim;
    PdeVariant variant = PdeVariant::General;
    AxisSpec axis;
    Vec s0;
    int k0 = 0;
    OracleKind oracle_kind = OracleKind::None;
    std::string oracle_formula;
    std::function<double(double, const Vec&, int)> oracle;  // v(t, x, k); empty when oracle_kind is None
    ToleranceProfile tolerance;

    bool has_oracle() const { return static_cast<bool>(oracle); }
};

enum class RecoveryMode { Treasury, MarketValue };

const char* to_string(RecoveryMode m);
RecoveryMode recovery_mode_from_string(const std::string& s);

// Constant level or logistic link low + (high - low) / (1 + exp(slope (x - center))).
struct IntensitySpec {
    RateProfile profile = RateProfile::constant(0.5);

    static IntensitySpec constant(double lambda) { return {RateProfile::constant(lambda)}; }
    static IntensitySpec logistic(double low, double high, double slope, double center) {
        return {RateProfile::logistic(low, high, slope, center)};
    }
    bool is_constant() const { return profile.family == ProfileFamily::Constant; }
};

struct BondOptions {
    RecoveryMode recovery = RecoveryMode::Treasury;
    double R = 0.4;
    IntensitySpec lambda;
    InteractionFamily family = InteractionFamily::Linear;
    double risk_aversion = 1.0;
    double sigma = 0.2;
    double horizon = 1.0;
};

// Two-state absorbing model, h = I_{no default}(eta_T), recovery paid at default.
Scenario scenario_defaultable_bond(const BondOptions& opt);

struct BasketOptions {
    int firms = 2;
    IntensitySpec lambda_bar = IntensitySpec::constant(0.3);
    double contagion = 2.0;  // a >= 1
    double R = 0.4;          // recovery paid per defaulting firm, as a fraction of its 1/ell notional
    double sigma = 0.2;
    double horizon = 1.0;
};

// lambda^{kj} = lambda_bar a^{#defaults in k} for single-firm default transitions, zero otherwise;
// h = fraction of surviving firms, f^{kj} = R / ell.
Scenario scenario_contagion_basket(const BasketOptions& opt);

struct CrashOptions {
    double R = 0.4;               // market-value recovery of the claim, f^{nd} = R v
    double stock_recovery = 0.4;  // the stock drops to this fraction of its value at default
    double sigma = 0.2;
    IntensitySpec lambda;
    double horizon = 1.0;
    // Payoff received at T after default, written on the observed (crashed) stock: weight * min((y - K)^+, cap).
    double post_default_weight = 0.0;
    double post_default_strike = 1.0;
    double post_default_cap = 1.0;
};

// Stock with crash at default, carrying the drift (1 - stock_recovery) lambda x before default.
Scenario scenario_crash_at_default(const CrashOptions& opt);

struct CappedCallOptions {
    double sigma = 0.2;
    double strike = 1.0;
    double cap = 0.5;
    double horizon = 1.0;
};

// One regime, no jumps: h = min((x - K)^+, cap) under driftless geometric Brownian motion.
Scenario scenario_capped_call(const CappedCallOptions& opt);

std::vector<std::string> shipped_scenario_names();
std::vector<Scenario> shipped_scenarios();
Scenario scenario_by_name(const std::string& name);

// Value of an x-independent linear claim with constant intensities, v(t) = solution of the
// linear ODE system v' = -(A v + r) backward from h, through one exponential of [[A, r], [0, 0]].
std::vector<double> markov_chain_value(const ModelSpec& model, const ClaimSpec& claim, double tau);

// E[min((x e^{sigma W_tau - sigma^2 tau / 2} - K)^+, cap)] by adaptive Gauss-Kronrod quadrature.
double capped_call_value(double x, double sigma, double tau, double strike, double cap);

struct CrashMartingaleResult {
    Estimate gap;  // S-bar_T - S-bar_0 with S-bar = S before default and stock_recovery * S after
    bool passed = false;
    std::size_t exited = 0;
};

CrashMartingaleResult crash_martingale_check(const ModelSpec& model, const Vec& s0, std::size_t paths, int steps,
                                             std::uint64_t seed, double se_mult = 3.0);

}  // namespace rdsys
