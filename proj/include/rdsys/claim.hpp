#pragma once

#include "rdsys/model.hpp"

#include <span>
#include <string>
#include <vector>

namespace rdsys {

enum class PayoffShape { None, CappedCall, CappedPut };

// h(x, k) = level_k + weight_k * shape(scale_k * x^1)
struct TerminalPayoff {
    std::vector<double> level;
    std::vector<double> weight;
    std::vector<double> scale;
    PayoffShape shape = PayoffShape::None;
    double strike = 0.0;
    double cap = 0.0;

    static TerminalPayoff constant(std::vector<double> level);

    double eval(const Vec& x, int k) const;
    double sup_abs() const;
    bool depends_on_x() const;
};

const char* to_string(PayoffShape s);
PayoffShape payoff_shape_from_string(const std::string& s);

enum class InteractionFamily { Linear, Exponential };
enum class TruncationMode { Automatic, Always, Never };

const char* to_string(InteractionFamily f);
InteractionFamily interaction_family_from_string(const std::string& s);
const char* to_string(TruncationMode m);
TruncationMode truncation_mode_from_string(const std::string& s);

// K1, K2: growth constants of the interaction on the ordered sets {v^k >= v^j} / {v^k <= v^j},
// K2 taken w.r.t. the max-norm. K3 bounds |h|. lipschitz bounds g in v (max-norm).
// growth bounds |delta|, |f| by growth * (1 + |v|). discount_cap bounds c from above.
struct ClaimBounds {
    double K1 = 0.0;
    double K2 = 0.0;
    double K3 = 0.0;
    double lipschitz = 0.0;
    double growth = 0.0;
    double discount_cap = 0.0;
};

// Payoff triple (h, delta, f^{kj}) with discount c and interaction family.
//   delta(t, x, k, v) = flow_level_k + flow_slope_k * v
//   f^{kj}(t, x, v)   = jump_level(k,j) + jump_slope(k,j) * v
//   c(t, x, k)        = discount_k
// Flow and jump payments depend on the claim value through the own-regime coordinate v^k.
struct ClaimSpec {
    TerminalPayoff terminal;
    std::vector<double> flow_level;
    std::vector<double> flow_slope;
    Eigen::MatrixXd jump_level;
    Eigen::MatrixXd jump_slope;
    std::vector<double> discount;
    InteractionFamily family = InteractionFamily::Linear;
    double risk_aversion = 1.0;
    TruncationMode truncation = TruncationMode::Automatic;
    ClaimBounds bounds;

    static ClaimSpec zero(int regimes);

    int regimes() const { return static_cast<int>(discount.size()); }
    double h(const Vec& x, int k) const { return terminal.eval(x, k); }
    double delta(int k, double v) const { return flow_level[static_cast<size_t>(k)] + flow_slope[static_cast<size_t>(k)] * v; }
    double f(int k, int j, double v) const { return jump_level(k, j) + jump_slope(k, j) * v; }
    double c(int k) const { return discount[static_cast<size_t>(k)]; }
    bool has_flows() const;
    bool is_value_dependent() const;
    bool truncation_active() const;

    void check(const ModelSpec& model) const;
};

// Growth, Lipschitz and terminal bounds implied by the parametric families and the intensity bound.
// For the exponential family the Lipschitz constant is taken on the box |v| <= kappa(0).
ClaimBounds derive_bounds(const ModelSpec& model, const ClaimSpec& claim);

// g^k(t, x, v) of the linear or exponential interaction family:
//   linear:      delta + sum_j lambda^{kj} (v^j - v^k + f^{kj})
//   exponential: delta + sum_j lambda^{kj} (exp(alpha (v^j - v^k + f^{kj})) - 1) / alpha
double eval_interaction_g(const ClaimSpec& claim, const ModelSpec& model, double t, const Vec& x, int k,
                          std::span<const double> v);

// Truncation boundary kappa(t) bounding the solution of the monotone system.
double kappa_bound(const ClaimSpec& claim, double horizon, double t);

}  // namespace rdsys
