#include "rdsys/credit.hpp"

#include "rdsys/sde.hpp"

#include <boost/math/constants/constants.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <fmt/format.h>
#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <bit>
#include <cmath>

namespace rdsys {

namespace {

constexpr std::uint64_t kTagCrash = 0xc4a5ULL;

Mat scalar_mat(double v) {
    Mat m(1, 1);
    m(0, 0) = v;
    return m;
}

ModelSpec base_model(int regimes, double sigma, double horizon, std::vector<IntensityEntry> entries) {
    ModelSpec m;
    m.domain = {DomainKind::PositiveOrthant, 1};
    m.regimes = regimes;
    m.brownian_dim = 1;
    m.drift = CoefficientField::zero(regimes, 1, 1);
    m.vol = CoefficientField::multiplicative(std::vector<Mat>(static_cast<size_t>(regimes), scalar_mat(sigma)));
    double bound = 0.0;
    for (const auto& e : entries) bound = std::max(bound, e.scale * e.profile.upper_bound());
    m.intensities = IntensityMatrix(regimes, std::move(entries), bound);
    m.horizon = horizon;
    return m;
}

AxisSpec default_axis() { return AxisSpec{0.25, 4.0, 101, Spacing::Log}; }

void finalize(Scenario& s) {
    s.model.check();
    s.claim.bounds = derive_bounds(s.model, s.claim);
    s.claim.check(s.model);
}

void check_sigma_horizon(double sigma, double horizon) {
    if (!(sigma > 0.0) || !std::isfinite(sigma)) throw ConfigurationError("volatility must be positive");
    if (!(horizon > 0.0) || !std::isfinite(horizon)) throw ConfigurationError("horizon must be positive");
}

}  // namespace

const char* to_string(OracleKind k) {
    switch (k) {
        case OracleKind::ClosedForm: return "closed_form";
        case OracleKind::MatrixExponential: return "matrix_exponential";
        case OracleKind::Quadrature: return "quadrature";
        case OracleKind::None: return "none";
    }
    return "none";
}

const char* to_string(RecoveryMode m) { return m == RecoveryMode::Treasury ? "treasury" : "market_value"; }

RecoveryMode recovery_mode_from_string(const std::string& s) {
    if (s == "treasury") return RecoveryMode::Treasury;
    if (s == "market_value") return RecoveryMode::MarketValue;
    throw ConfigurationError("unknown recovery mode '" + s + "'");
}

std::vector<double> markov_chain_value(const ModelSpec& model, const ClaimSpec& claim, double tau) {
    if (claim.family != InteractionFamily::Linear) throw ConfigurationError("chain oracle needs the linear interaction family");
    if (claim.terminal.depends_on_x()) throw ConfigurationError("chain oracle needs an x-independent terminal payoff");
    const int m = model.regimes;
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(m + 1, m + 1);
    for (int k = 0; k < m; ++k) {
        const auto ku = static_cast<size_t>(k);
        M(k, k) += claim.c(k) + claim.flow_slope[ku];
        M(k, m) += claim.flow_level[ku];
        for (int e : model.intensities.channels_from(k)) {
            const auto& en = model.intensities.entries()[static_cast<size_t>(e)];
            if (en.profile.family != ProfileFamily::Constant) throw ConfigurationError("chain oracle needs constant intensities");
            const double lam = en.scale * en.profile.level;
            M(k, en.to) += lam;
            M(k, k) += lam * (claim.jump_slope(k, en.to) - 1.0);
            M(k, m) += lam * claim.jump_level(k, en.to);
        }
    }
    const Eigen::MatrixXd E = (M * tau).exp();
    std::vector<double> v(static_cast<size_t>(m));
    const Vec x0 = Vec::Ones(model.dim());
    for (int k = 0; k < m; ++k) {
        double acc = E(k, m);
        for (int j = 0; j < m; ++j) acc += E(k, j) * claim.h(x0, j);
        v[static_cast<size_t>(k)] = acc;
    }
    return v;
}

double capped_call_value(double x, double sigma, double tau, double strike, double cap) {
    auto payoff = [&](double y) { return std::min(std::max(y - strike, 0.0), cap); };
    if (tau <= 0.0 || sigma <= 0.0) return payoff(x);
    const double sd = sigma * std::sqrt(tau);
    const double mu = -0.5 * sd * sd;
    const double inv_sqrt_2pi = boost::math::constants::one_div_root_two_pi<double>();
    auto integrand = [&](double z) { return payoff(x * std::exp(mu + sd * z)) * inv_sqrt_2pi * std::exp(-0.5 * z * z); };
    std::vector<double> cuts{-12.0, 12.0};
    for (double level : {strike, strike + cap}) {
        if (level <= 0.0) continue;
        const double z = (std::log(level / x) - mu) / sd;
        if (z > -12.0 && z < 12.0) cuts.push_back(z);
    }
    std::ranges::sort(cuts);
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        acc += boost::math::quadrature::gauss_kronrod<double, 31>::integrate(integrand, cuts[i], cuts[i + 1], 15, 1e-14);
    }
    return acc;
}

Scenario scenario_defaultable_bond(const BondOptions& opt) {
    if (!(opt.R >= 0.0 && opt.R < 1.0)) throw ConfigurationError(fmt::format("recovery R = {} outside [0, 1)", opt.R));
    check_sigma_horizon(opt.sigma, opt.horizon);
    Scenario s;
    const bool linked = !opt.lambda.is_constant();
    s.name = "defaultable_bond";
    s.description = fmt::format("{} recovery bond, R = {}, {} default intensity, {} interaction", to_string(opt.recovery), opt.R,
                                linked ? "stock-linked" : "constant", to_string(opt.family));
    s.model = base_model(2, opt.sigma, opt.horizon, {IntensityEntry{0, 1, 1.0, opt.lambda.profile}});
    s.claim = ClaimSpec::zero(2);
    s.claim.terminal = TerminalPayoff::constant({1.0, 0.0});
    if (opt.recovery == RecoveryMode::Treasury) {
        s.claim.jump_level(0, 1) = opt.R;
    } else {
        s.claim.jump_slope(0, 1) = opt.R;
    }
    s.claim.family = opt.family;
    s.claim.risk_aversion = opt.risk_aversion;
    s.axis = default_axis();
    s.s0 = Vec::Constant(1, 1.0);
    finalize(s);

    const double T = opt.horizon;
    const double R = opt.R;
    if (!linked) {
        const double lam = opt.lambda.profile.level;
        s.oracle_kind = OracleKind::ClosedForm;
        if (opt.family == InteractionFamily::Exponential) {
            if (opt.recovery != RecoveryMode::Treasury) {
                throw ConfigurationError("exponential interaction requires value-independent (treasury) recovery");
            }
            const double a = opt.risk_aversion;
            s.oracle_formula = "v(t,n) = R + ln(1 - (1 - e^{alpha (1 - R)}) e^{-lambda (T - t)}) / alpha, v(t,d) = 0";
            s.oracle = [=](double t, const Vec&, int k) {
                if (k == 1) return 0.0;
                return R + std::log(1.0 - (1.0 - std::exp(a * (1.0 - R))) * std::exp(-lam * (T - t))) / a;
            };
            s.tolerance.oracle_abs = 1e-5;
        } else if (opt.recovery == RecoveryMode::Treasury) {
            s.oracle_formula = "v(t,n) = e^{-lambda (T - t)} + R (1 - e^{-lambda (T - t)}), v(t,d) = 0";
            s.oracle = [=](double t, const Vec&, int k) {
                if (k == 1) return 0.0;
                const double q = std::exp(-lam * (T - t));
                return q + R * (1.0 - q);
            };
        } else {
            s.oracle_formula = "v(t,n) = e^{-lambda (1 - R) (T - t)}, v(t,d) = 0";
            s.oracle = [=](double t, const Vec&, int k) { return k == 1 ? 0.0 : std::exp(-lam * (1.0 - R) * (T - t)); };
        }
    }
    return s;
}

Scenario scenario_contagion_basket(const BasketOptions& opt) {
    if (opt.firms < 2) throw ConfigurationError("a basket needs at least two firms");
    if (opt.firms > 10) throw ConfigurationError(fmt::format("basket of {} firms exceeds the 10-firm state limit", opt.firms));
    if (!(opt.contagion >= 1.0)) throw ConfigurationError("contagion factor a must be >= 1");
    if (!(opt.R >= 0.0 && opt.R < 1.0)) throw ConfigurationError("recovery R outside [0, 1)");
    check_sigma_horizon(opt.sigma, opt.horizon);
    const int ell = opt.firms;
    const int m = 1 << ell;
    std::vector<IntensityEntry> entries;
    for (int k = 0; k < m; ++k) {
        const int defaults = std::popcount(static_cast<unsigned>(k));
        for (int i = 0; i < ell; ++i) {
            if (k & (1 << i)) continue;
            entries.push_back({k, k | (1 << i), std::pow(opt.contagion, defaults), opt.lambda_bar.profile});
        }
    }
    Scenario s;
    s.name = "contagion_basket";
    const bool linked = !opt.lambda_bar.is_constant();
    s.description = fmt::format("{}-firm basket with contagion factor a = {}, {} base intensity, R = {}", ell, opt.contagion,
                                linked ? "stock-linked" : "constant", opt.R);
    s.model = base_model(m, opt.sigma, opt.horizon, std::move(entries));
    s.claim = ClaimSpec::zero(m);
    std::vector<double> survivors(static_cast<size_t>(m));
    for (int k = 0; k < m; ++k) survivors[static_cast<size_t>(k)] = static_cast<double>(ell - std::popcount(static_cast<unsigned>(k))) / ell;
    s.claim.terminal = TerminalPayoff::constant(survivors);
    for (const auto& e : s.model.intensities.entries()) s.claim.jump_level(e.from, e.to) = opt.R / ell;
    s.axis = default_axis();
    s.s0 = Vec::Constant(1, 1.0);
    finalize(s);
    if (!linked) {
        s.oracle_kind = OracleKind::MatrixExponential;
        s.oracle_formula = "v(t) = first m entries of exp((T - t) [[A, r], [0, 0]]) [h; 1], A = generator, r_k = sum_j lambda^{kj} f^{kj}";
        const ModelSpec model = s.model;
        const ClaimSpec claim = s.claim;
        s.oracle = [model, claim](double t, const Vec&, int k) {
            return markov_chain_value(model, claim, model.horizon - t)[static_cast<size_t>(k)];
        };
    }
    return s;
}

Scenario scenario_crash_at_default(const CrashOptions& opt) {
    if (!(opt.stock_recovery >= 0.0 && opt.stock_recovery <= 1.0)) throw ConfigurationError("stock recovery must lie in [0, 1]");
    if (!(opt.R >= 0.0 && opt.R < 1.0)) throw ConfigurationError("recovery R outside [0, 1)");
    check_sigma_horizon(opt.sigma, opt.horizon);
    if (opt.post_default_weight != 0.0 && opt.stock_recovery == 0.0) {
        throw ConfigurationError("post-default payments on the crashed stock are undefined when the stock recovery is 0");
    }
    Scenario s;
    s.name = "crash_at_default";
    s.description = fmt::format("market-value recovery R = {} with the stock crashing to {} of its value at default", opt.R,
                                opt.stock_recovery);
    s.model = base_model(2, opt.sigma, opt.horizon, {IntensityEntry{0, 1, 1.0, opt.lambda.profile}});
    s.model.crash = CrashDrift{opt.stock_recovery, 0, 1};
    s.claim = ClaimSpec::zero(2);
    s.claim.terminal = TerminalPayoff::constant({1.0, 0.0});
    if (opt.post_default_weight != 0.0) {
        s.claim.terminal.shape = PayoffShape::CappedCall;
        s.claim.terminal.strike = opt.post_default_strike;
        s.claim.terminal.cap = opt.post_default_cap;
        s.claim.terminal.weight = {0.0, opt.post_default_weight};
        s.claim.terminal.scale = {1.0, opt.stock_recovery};
    }
    s.claim.jump_slope(0, 1) = opt.R;
    s.variant = PdeVariant::CrashAtDefault;
    s.axis = default_axis();
    s.s0 = Vec::Constant(1, 1.0);
    finalize(s);
    if (opt.lambda.is_constant() && opt.post_default_weight == 0.0) {
        const double lam = opt.lambda.profile.level;
        const double R = opt.R;
        const double T = opt.horizon;
        s.oracle_kind = OracleKind::ClosedForm;
        s.oracle_formula = "v(t,n) = e^{-lambda (1 - R) (T - t)}, v(t,d) = 0";
        s.oracle = [=](double t, const Vec&, int k) { return k == 1 ? 0.0 : std::exp(-lam * (1.0 - R) * (T - t)); };
    }
    return s;
}

Scenario scenario_capped_call(const CappedCallOptions& opt) {
    check_sigma_horizon(opt.sigma, opt.horizon);
    if (!(opt.cap > 0.0) || !(opt.strike >= 0.0)) throw ConfigurationError("capped call needs cap > 0 and strike >= 0");
    Scenario s;
    s.name = "capped_call";
    s.description = fmt::format("capped call min((S - {})^+, {}) under driftless lognormal dynamics", opt.strike, opt.cap);
    s.model = base_model(1, opt.sigma, opt.horizon, {});
    s.claim = ClaimSpec::zero(1);
    s.claim.terminal.shape = PayoffShape::CappedCall;
    s.claim.terminal.strike = opt.strike;
    s.claim.terminal.cap = opt.cap;
    s.claim.terminal.weight = {1.0};
    // Geometric midpoint on the strike so the kink sits on a node.
    const double mid = opt.strike > 0.0 ? opt.strike : 1.0;
    s.axis = AxisSpec{mid / 5.0, mid * 5.0, 1601, Spacing::Log};
    s.s0 = Vec::Constant(1, mid);
    finalize(s);
    s.oracle_kind = OracleKind::Quadrature;
    s.oracle_formula = "v(t,x) = int min((x e^{sigma sqrt(T-t) z - sigma^2 (T-t)/2} - K)^+, C) phi(z) dz";
    s.tolerance.oracle_abs = 1e-5 * opt.cap;
    s.tolerance.oracle_rel = 1e-3;
    s.tolerance.abs_floor = 1e-5 * opt.cap;
    const double sigma = opt.sigma, T = opt.horizon, K = opt.strike, C = opt.cap;
    s.oracle = [=](double t, const Vec& x, int) { return capped_call_value(x[0], sigma, T - t, K, C); };
    return s;
}

std::vector<std::string> shipped_scenario_names() {
    return {"defaultable_bond_treasury", "defaultable_bond_market_value", "defaultable_bond_exponential",
            "defaultable_bond_linked",   "contagion_basket",              "contagion_basket_linked",
            "crash_at_default",          "capped_call"};
}

Scenario scenario_by_name(const std::string& name) {
    Scenario s;
    if (name == "defaultable_bond_treasury") {
        s = scenario_defaultable_bond({});
    } else if (name == "defaultable_bond_market_value") {
        BondOptions o;
        o.recovery = RecoveryMode::MarketValue;
        s = scenario_defaultable_bond(o);
    } else if (name == "defaultable_bond_exponential") {
        BondOptions o;
        o.family = InteractionFamily::Exponential;
        o.risk_aversion = 1.0;
        s = scenario_defaultable_bond(o);
    } else if (name == "defaultable_bond_linked") {
        BondOptions o;
        o.lambda = IntensitySpec::logistic(0.1, 1.0, 4.0, 1.0);
        s = scenario_defaultable_bond(o);
    } else if (name == "contagion_basket") {
        s = scenario_contagion_basket({});
    } else if (name == "contagion_basket_linked") {
        BasketOptions o;
        o.lambda_bar = IntensitySpec::logistic(0.1, 0.6, 4.0, 1.0);
        s = scenario_contagion_basket(o);
    } else if (name == "crash_at_default") {
        s = scenario_crash_at_default({});
    } else if (name == "capped_call") {
        s = scenario_capped_call({});
    } else {
        throw ConfigurationError("unknown scenario '" + name + "'");
    }
    s.name = name;
    return s;
}

std::vector<Scenario> shipped_scenarios() {
    std::vector<Scenario> out;
    for (const auto& n : shipped_scenario_names()) out.push_back(scenario_by_name(n));
    return out;
}

CrashMartingaleResult crash_martingale_check(const ModelSpec& model, const Vec& s0, std::size_t paths, int steps,
                                             std::uint64_t seed, double se_mult) {
    if (!model.crash) throw ConfigurationError("crash martingale check needs a model with a crash drift");
    const CrashDrift crash = *model.crash;
    MarketSimConfig cfg;
    cfg.paths = paths;
    cfg.steps = steps;
    cfg.seed = seed ^ kTagCrash;
    cfg.record_brownian = false;
    std::vector<double> gaps(paths, 0.0);
    std::vector<unsigned char> ok(paths, 0);
    const double sbar0 = s0[0];
    CrashMartingaleResult res;
    res.exited = for_each_market_path(model, s0, crash.from, cfg, Construction::Pasting, [&](std::size_t i, const MarketPath& p) {
        if (!p.usable()) return;
        ok[i] = 1;
        const double sT = p.s_at(p.regime.size() - 1, model.dim())[0];
        gaps[i] = (p.regime.back() == crash.to ? crash.stock_recovery : 1.0) * sT - sbar0;
    });
    std::vector<double> kept;
    for (std::size_t i = 0; i < paths; ++i)
        if (ok[i]) kept.push_back(gaps[i]);
    res.gap = estimate(kept);
    res.passed = std::abs(res.gap.mean) <= se_mult * res.gap.se;
    return res;
}

}  // namespace rdsys
