#include "rdsys/claim.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

namespace rdsys {

namespace {

double shape_value(PayoffShape shape, double x, double strike, double cap) {
    switch (shape) {
        case PayoffShape::None: return 0.0;
        case PayoffShape::CappedCall: return std::min(std::max(x - strike, 0.0), cap);
        case PayoffShape::CappedPut: return std::min(std::max(strike - x, 0.0), cap);
    }
    return 0.0;
}

double channel_bound(const IntensityEntry& e) { return e.scale * e.profile.upper_bound(); }

}  // namespace

TerminalPayoff TerminalPayoff::constant(std::vector<double> level) {
    TerminalPayoff p;
    const size_t m = level.size();
    p.level = std::move(level);
    p.weight.assign(m, 0.0);
    p.scale.assign(m, 1.0);
    return p;
}

double TerminalPayoff::eval(const Vec& x, int k) const {
    const auto ku = static_cast<size_t>(k);
    double v = level[ku];
    if (shape != PayoffShape::None && weight[ku] != 0.0) v += weight[ku] * shape_value(shape, scale[ku] * x[0], strike, cap);
    return v;
}

double TerminalPayoff::sup_abs() const {
    double s = 0.0;
    for (size_t k = 0; k < level.size(); ++k) {
        double extra = shape == PayoffShape::None ? 0.0 : std::abs(weight[k]) * cap;
        s = std::max(s, std::abs(level[k]) + extra);
    }
    return s;
}

bool TerminalPayoff::depends_on_x() const {
    if (shape == PayoffShape::None) return false;
    return std::any_of(weight.begin(), weight.end(), [](double w) { return w != 0.0; });
}

const char* to_string(PayoffShape s) {
    switch (s) {
        case PayoffShape::None: return "none";
        case PayoffShape::CappedCall: return "capped_call";
        case PayoffShape::CappedPut: return "capped_put";
    }
    return "none";
}

PayoffShape payoff_shape_from_string(const std::string& s) {
    if (s == "none") return PayoffShape::None;
    if (s == "capped_call") return PayoffShape::CappedCall;
    if (s == "capped_put") return PayoffShape::CappedPut;
    throw ConfigurationError("unknown payoff shape '" + s + "'");
}

const char* to_string(InteractionFamily f) { return f == InteractionFamily::Linear ? "linear" : "exponential"; }

InteractionFamily interaction_family_from_string(const std::string& s) {
    if (s == "linear") return InteractionFamily::Linear;
    if (s == "exponential") return InteractionFamily::Exponential;
    throw ConfigurationError("unknown interaction family '" + s + "'");
}

const char* to_string(TruncationMode m) {
    switch (m) {
        case TruncationMode::Automatic: return "automatic";
        case TruncationMode::Always: return "always";
        case TruncationMode::Never: return "never";
    }
    return "automatic";
}

TruncationMode truncation_mode_from_string(const std::string& s) {
    if (s == "automatic") return TruncationMode::Automatic;
    if (s == "always") return TruncationMode::Always;
    if (s == "never") return TruncationMode::Never;
    throw ConfigurationError("unknown truncation mode '" + s + "'");
}

ClaimSpec ClaimSpec::zero(int regimes) {
    ClaimSpec c;
    const auto m = static_cast<size_t>(regimes);
    c.terminal = TerminalPayoff::constant(std::vector<double>(m, 0.0));
    c.flow_level.assign(m, 0.0);
    c.flow_slope.assign(m, 0.0);
    c.jump_level = Eigen::MatrixXd::Zero(regimes, regimes);
    c.jump_slope = Eigen::MatrixXd::Zero(regimes, regimes);
    c.discount.assign(m, 0.0);
    return c;
}

bool ClaimSpec::has_flows() const {
    return std::any_of(flow_level.begin(), flow_level.end(), [](double v) { return v != 0.0; }) ||
           std::any_of(flow_slope.begin(), flow_slope.end(), [](double v) { return v != 0.0; });
}

bool ClaimSpec::is_value_dependent() const {
    return std::any_of(flow_slope.begin(), flow_slope.end(), [](double v) { return v != 0.0; }) || !jump_slope.isZero(0.0);
}

bool ClaimSpec::truncation_active() const {
    switch (truncation) {
        case TruncationMode::Always: return true;
        case TruncationMode::Never: return false;
        case TruncationMode::Automatic: return family == InteractionFamily::Exponential;
    }
    return false;
}

void ClaimSpec::check(const ModelSpec& model) const {
    const auto m = static_cast<size_t>(model.regimes);
    if (terminal.level.size() != m || terminal.weight.size() != m || terminal.scale.size() != m) {
        throw ConfigurationError(fmt::format("terminal payoff needs {} regime entries", m));
    }
    if (flow_level.size() != m || flow_slope.size() != m || discount.size() != m) {
        throw ConfigurationError(fmt::format("flow and discount need {} regime entries", m));
    }
    if (jump_level.rows() != model.regimes || jump_level.cols() != model.regimes || jump_slope.rows() != model.regimes ||
        jump_slope.cols() != model.regimes) {
        throw ConfigurationError(fmt::format("jump payments must be {0}x{0}", m));
    }
    if (terminal.shape != PayoffShape::None && !(terminal.cap >= 0.0)) throw ConfigurationError("payoff cap must be >= 0");
    if (family == InteractionFamily::Exponential) {
        if (!(risk_aversion > 0.0)) throw ConfigurationError("exponential interaction needs risk aversion alpha > 0");
        if (!jump_slope.isZero(0.0)) {
            throw ConfigurationError("exponential interaction requires value-independent (bounded) jump payments");
        }
    }
    for (double c : discount)
        if (!std::isfinite(c)) throw ModelDefinitionError("discount rate is not finite");
}

double kappa_bound(const ClaimSpec& claim, double horizon, double t) {
    if (!(t >= 0.0 && t <= horizon)) throw UsageError(fmt::format("kappa_bound: t = {} outside [0, {}]", t, horizon));
    const auto& b = claim.bounds;
    const double tau = horizon - t;
    if (b.K2 == 0.0) return b.K3 + b.K1 * tau;
    const double e = std::exp(b.K2 * tau);
    return b.K3 * e + (b.K1 / b.K2) * (e - 1.0);
}

ClaimBounds derive_bounds(const ModelSpec& model, const ClaimSpec& claim) {
    claim.check(model);
    ClaimBounds b;
    b.K3 = claim.terminal.sup_abs();
    for (double c : claim.discount) b.discount_cap = std::max(b.discount_cap, c);
    for (int k = 0; k < model.regimes; ++k) {
        const auto ku = static_cast<size_t>(k);
        b.growth = std::max({b.growth, std::abs(claim.flow_level[ku]), std::abs(claim.flow_slope[ku])});
        for (int e : model.intensities.channels_from(k)) {
            const auto& en = model.intensities.entries()[static_cast<size_t>(e)];
            b.growth = std::max({b.growth, std::abs(claim.jump_level(k, en.to)), std::abs(claim.jump_slope(k, en.to))});
        }
    }
    if (claim.family == InteractionFamily::Linear) {
        for (int k = 0; k < model.regimes; ++k) {
            const auto ku = static_cast<size_t>(k);
            double k1 = std::abs(claim.flow_level[ku]);
            double k2 = std::abs(claim.flow_slope[ku]);
            double lip = std::abs(claim.flow_slope[ku]);
            for (int e : model.intensities.channels_from(k)) {
                const auto& en = model.intensities.entries()[static_cast<size_t>(e)];
                const double lam = channel_bound(en);
                k1 += lam * std::abs(claim.jump_level(k, en.to));
                k2 += lam * std::abs(claim.jump_slope(k, en.to));
                lip += lam * (std::abs(1.0 - claim.jump_slope(k, en.to)) + 1.0);
            }
            b.K1 = std::max(b.K1, k1);
            b.K2 = std::max(b.K2, k2);
            b.lipschitz = std::max(b.lipschitz, lip);
        }
        return b;
    }
    const double alpha = claim.risk_aversion;
    double fmax = 0.0;
    for (int k = 0; k < model.regimes; ++k) {
        const auto ku = static_cast<size_t>(k);
        double up = std::abs(claim.flow_level[ku]);
        double down = std::abs(claim.flow_level[ku]);
        for (int e : model.intensities.channels_from(k)) {
            const auto& en = model.intensities.entries()[static_cast<size_t>(e)];
            const double lam = channel_bound(en);
            const double f0 = std::abs(claim.jump_level(k, en.to));
            fmax = std::max(fmax, f0);
            up += lam * std::expm1(alpha * f0) / alpha;
            down += lam * -std::expm1(-alpha * f0) / alpha;
        }
        b.K1 = std::max({b.K1, up, down});
        b.K2 = std::max(b.K2, std::abs(claim.flow_slope[ku]));
    }
    ClaimSpec tmp = claim;
    tmp.bounds = b;
    const double kap = kappa_bound(tmp, model.horizon, 0.0);
    for (int k = 0; k < model.regimes; ++k) {
        double lip = std::abs(claim.flow_slope[static_cast<size_t>(k)]);
        for (int e : model.intensities.channels_from(k)) {
            const auto& en = model.intensities.entries()[static_cast<size_t>(e)];
            lip += 2.0 * channel_bound(en) * std::exp(alpha * (2.0 * kap + fmax));
        }
        b.lipschitz = std::max(b.lipschitz, lip);
    }
    return b;
}

double eval_interaction_g(const ClaimSpec& claim, const ModelSpec& model, double t, const Vec& x, int k,
                          std::span<const double> v) {
    const auto ku = static_cast<size_t>(k);
    const double vk = v[ku];
    double g = claim.delta(k, vk);
    const auto& entries = model.intensities.entries();
    if (claim.family == InteractionFamily::Linear) {
        for (int e : model.intensities.channels_from(k)) {
            const auto& en = entries[static_cast<size_t>(e)];
            const double lam = en.scale * en.profile.eval(t, x);
            g += lam * (v[static_cast<size_t>(en.to)] - vk + claim.f(k, en.to, vk));
        }
        return g;
    }
    const double alpha = claim.risk_aversion;
    if (!(alpha > 0.0)) throw ConfigurationError("exponential interaction needs risk aversion alpha > 0");
    for (int e : model.intensities.channels_from(k)) {
        const auto& en = entries[static_cast<size_t>(e)];
        const double lam = en.scale * en.profile.eval(t, x);
        g += lam * std::expm1(alpha * (v[static_cast<size_t>(en.to)] - vk + claim.f(k, en.to, vk))) / alpha;
    }
    return g;
}

}  // namespace rdsys
