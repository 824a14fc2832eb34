#pragma once

#include "rdsys/claim.hpp"
#include "rdsys/model.hpp"

#include <cmath>
#include <vector>

namespace testing {

inline rdsys::Vec vec1(double x) {
    rdsys::Vec v(1);
    v << x;
    return v;
}

inline rdsys::Mat mat1(double x) {
    rdsys::Mat m(1, 1);
    m << x;
    return m;
}

// One-dimensional geometric Brownian motion with per-regime drift/vol rates and the given channels.
inline rdsys::ModelSpec gbm_model(int regimes, double gamma, double sigma, std::vector<rdsys::IntensityEntry> channels = {},
                                  double bound = 0.0, double horizon = 1.0) {
    rdsys::ModelSpec m;
    m.domain = {rdsys::DomainKind::PositiveOrthant, 1};
    m.regimes = regimes;
    m.brownian_dim = 1;
    std::vector<rdsys::Mat> g(static_cast<size_t>(regimes), mat1(gamma));
    std::vector<rdsys::Mat> s(static_cast<size_t>(regimes), mat1(sigma));
    m.drift = gamma == 0.0 ? rdsys::CoefficientField::zero(regimes, 1, 1) : rdsys::CoefficientField::multiplicative(g);
    m.vol = rdsys::CoefficientField::multiplicative(s);
    double b = bound;
    for (const auto& e : channels) b = std::max(b, e.scale * e.profile.upper_bound());
    m.intensities = rdsys::IntensityMatrix(regimes, std::move(channels), b);
    m.horizon = horizon;
    return m;
}

inline rdsys::IntensityEntry channel(int from, int to, double rate) { return {from, to, 1.0, rdsys::RateProfile::constant(rate)}; }

inline rdsys::ClaimSpec claim_with_bounds(const rdsys::ModelSpec& model, rdsys::ClaimSpec c) {
    c.bounds = rdsys::derive_bounds(model, c);
    return c;
}

}  // namespace testing
