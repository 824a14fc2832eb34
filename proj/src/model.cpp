#include "rdsys/model.hpp"

#include <fmt/format.h>

#include <cmath>

namespace rdsys {

Vec ModelSpec::drift_at(double t, const Vec& x, int k) const {
    Vec g = drift.eval(t, x, k).col(0);
    if (crash && k == crash->from) {
        g[0] += (1.0 - crash->stock_recovery) * intensities.rate(t, x, crash->from, crash->to) * x[0];
    }
    return g;
}

Mat ModelSpec::diffusion_at(double t, const Vec& x, int k) const {
    Mat s = vol.eval(t, x, k);
    return s * s.transpose();
}

std::optional<Vec> ModelSpec::market_price_of_risk(double t, const Vec& x, int k) const {
    Mat s = vol.eval(t, x, k);
    Mat a = s * s.transpose();
    Eigen::LDLT<Mat> ldlt(a);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) return std::nullopt;
    Vec d = ldlt.vectorD();
    for (int i = 0; i < d.size(); ++i)
        if (!(d[i] > 0.0)) return std::nullopt;
    Vec g = drift_at(t, x, k);
    Vec phi = s.transpose() * ldlt.solve(g);
    return phi;
}

ModelSpec ModelSpec::without_drift() const {
    ModelSpec out = *this;
    out.drift = CoefficientField::zero(regimes, domain.dim, 1);
    out.crash.reset();
    return out;
}

bool ModelSpec::uses_tabulated() const {
    if (drift.family() == CoefficientFamily::Tabulated || vol.family() == CoefficientFamily::Tabulated) return true;
    for (const auto& e : intensities.entries())
        if (e.profile.family == ProfileFamily::Tabulated) return true;
    return false;
}

void ModelSpec::check() const {
    domain.check();
    if (regimes < 1) throw ConfigurationError("model needs at least one regime");
    if (brownian_dim < 1 || brownian_dim > kMaxDim) {
        throw ConfigurationError(fmt::format("brownian dimension {} outside [1, {}]", brownian_dim, kMaxDim));
    }
    if (!(horizon > 0.0) || !std::isfinite(horizon)) throw ConfigurationError("horizon T must be positive and finite");
    if (drift.regimes() != regimes || drift.rows() != domain.dim || drift.cols() != 1) {
        throw ConfigurationError(fmt::format("drift must be {}x1 for each of {} regimes", domain.dim, regimes));
    }
    if (vol.regimes() != regimes || vol.rows() != domain.dim || vol.cols() != brownian_dim) {
        throw ConfigurationError(fmt::format("volatility must be {}x{} for each of {} regimes", domain.dim, brownian_dim, regimes));
    }
    if (intensities.regimes() != regimes) throw ConfigurationError("intensity matrix regime count differs from model");
    for (const auto* f : {&drift, &vol}) {
        if (f->family() == CoefficientFamily::Multiplicative && domain.kind != DomainKind::PositiveOrthant) {
            throw ConfigurationError("multiplicative coefficient family requires the positive-orthant domain");
        }
    }
    for (const auto& e : intensities.entries()) {
        if (e.scale * e.profile.upper_bound() > intensities.bound() * (1.0 + 1e-12)) {
            throw ConfigurationError(fmt::format("intensity ({},{}) can reach {} above declared bound {}", e.from, e.to,
                                                 e.scale * e.profile.upper_bound(), intensities.bound()));
        }
        if (e.profile.family == ProfileFamily::Logistic && (e.profile.low < 0.0 || e.profile.high < 0.0)) {
            throw ConfigurationError("logistic intensity levels must be >= 0");
        }
    }
    if (crash) {
        if (crash->stock_recovery < 0.0 || crash->stock_recovery > 1.0) throw ConfigurationError("stock recovery must lie in [0,1]");
        if (domain.kind != DomainKind::PositiveOrthant) throw ConfigurationError("crash drift requires the positive-orthant domain");
        if (crash->from < 0 || crash->from >= regimes || crash->to < 0 || crash->to >= regimes) {
            throw ConfigurationError("crash drift channel outside regime range");
        }
    }
    if (!(phi_max > 0.0)) throw ConfigurationError("phi_max must be positive");
}

}  // namespace rdsys
