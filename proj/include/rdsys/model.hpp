#pragma once

#include "rdsys/coefficients.hpp"

#include <optional>

namespace rdsys {

// Martingale-restoring drift for a stock that drops to a fraction `stock_recovery` of its
// pre-default value: adds (1 - stock_recovery) * lambda^{from,to}(t, x) * x^1 to the first
// drift component while in regime `from`.
struct CrashDrift {
    double stock_recovery = 1.0;
    int from = 0;
    int to = 1;
};

// The interacting market (S, eta): drift and volatility of S per regime, regime intensities
// depending on (t, S), the state domain and the horizon.
struct ModelSpec {
    Domain domain;
    int regimes = 1;
    int brownian_dim = 1;
    CoefficientField drift;  // d x 1
    CoefficientField vol;    // d x r
    IntensityMatrix intensities;
    double horizon = 1.0;
    double phi_max = 10.0;
    std::optional<CrashDrift> crash;

    int dim() const { return domain.dim; }

    Vec drift_at(double t, const Vec& x, int k) const;
    Mat vol_at(double t, const Vec& x, int k) const { return vol.eval(t, x, k); }
    // a = Sigma Sigma^tr
    Mat diffusion_at(double t, const Vec& x, int k) const;
    double intensity(double t, const Vec& x, int from, int to) const { return intensities.rate(t, x, from, to); }
    // Phi = Sigma^tr (Sigma Sigma^tr)^{-1} Gamma; empty optional when a is singular.
    std::optional<Vec> market_price_of_risk(double t, const Vec& x, int k) const;

    // Same model under the minimal martingale measure: drift removed, intensities unchanged.
    ModelSpec without_drift() const;
    bool has_drift() const { return !drift.is_zero() || crash.has_value(); }
    bool uses_tabulated() const;

    // Shape and range consistency; throws ConfigurationError.
    void check() const;
};

}  // namespace rdsys
