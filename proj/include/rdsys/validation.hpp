#pragma once

#include "rdsys/claim.hpp"

#include <string>
#include <vector>

namespace rdsys {

struct ProbeNode {
    double t = 0.0;
    Vec x;
    int k = 0;
};

// Tensor probe grid: n_t times in [0, T] x n_x points per axis in [lo, hi] x every regime.
std::vector<ProbeNode> make_probe_grid(const ModelSpec& model, double lo, double hi, int n_t, int n_x);

struct AssumptionCheck {
    std::string name;
    std::string condition;
    bool passed = true;
    double worst = 0.0;      // worst value observed over the probe grid
    double threshold = 0.0;  // the declared limit it was compared against
    ProbeNode witness;       // node attaining `worst`
};

struct ValidationReport {
    std::vector<AssumptionCheck> checks;
    std::size_t probe_nodes = 0;
    bool assumption_relaxed = false;  // tabulated (only piecewise-linear) coefficients in use

    bool passed() const;
    const AssumptionCheck* find(const std::string& name) const;
};

inline constexpr double kMaxDiffusionCondition = 1e8;

// Probe-grid checks of the standing assumptions: nondegenerate diffusion (condition number of
// a <= 1e8), bounded market price of risk, intensity bounds, terminal bound, linear growth of
// flow/jump payments, discount bounded above and the monotonicity sign conditions of g.
ValidationReport validate_model(const ModelSpec& model, const ClaimSpec& claim, const std::vector<ProbeNode>& probe_grid);

}  // namespace rdsys
