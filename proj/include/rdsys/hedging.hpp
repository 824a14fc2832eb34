#pragma once

#include "rdsys/pde.hpp"
#include "rdsys/sde.hpp"
#include "rdsys/validation.hpp"
#include "rdsys/value_field.hpp"

#include <vector>

namespace rdsys {

// Per-path accounting of the decomposition H = H0 + int theta dS + L_T.
struct PathHedge {
    double H = 0.0;
    double H0 = 0.0;
    double gains = 0.0;          // int theta dS, second-order (Ito-Taylor) quadrature between grid and jump times
    double gains_left = 0.0;     // plain left-point sum of theta dS
    double L_T = 0.0;
    double residual = 0.0;       // H - (H0 + gains + L_T)
    double residual_left = 0.0;  // same with the left-point gains
    double covariation = 0.0;    // sum over steps of dL * (theta dS)
    double weight = 1.0;
    bool flagged = false;        // left the field hull beyond the clamp budget
};

struct HedgeOptions {
    std::size_t keep_paths = 8;       // paths whose per-step series are kept in the report
    double hull_budget = 0.01;        // tolerated fraction of steps outside the field hull per path
};

struct HedgeReport {
    double H0 = 0.0;
    std::vector<double> time_grid;
    std::vector<PathHedge> paths;
    // Per-step series of the first keep_paths paths: theta (d per step), L, theta0.
    std::vector<std::vector<double>> theta_path;
    std::vector<std::vector<double>> L_path;
    std::vector<std::vector<double>> theta0_path;
    // Per-step aggregates over all usable paths (weighted means).
    std::vector<double> mean_L;
    std::vector<double> mean_gains;
    Estimate residual;
    Estimate residual_left;
    double residual_rms = 0.0;
    double residual_left_rms = 0.0;
    Estimate L_terminal;
    Estimate covariation;  // sample covariation [L, int theta dS]_T
    Estimate cost_increment;       // per-step dC = dV + payments - theta dS, pooled
    double cost_gain_correlation = 0.0;
    std::size_t flagged = 0;
    bool weighted = false;
};

// theta = grad_x v(t, S_t, eta_{t-}); L accumulated from the logged jumps and the compensator
// (trapezoid split at jump times); H assembled from h, delta and the lump payments f^{kj}.
HedgeReport build_hedge(const ValueField& field, const ModelSpec& model, const ClaimSpec& claim, const PathBundle& bundle,
                        const HedgeOptions& options = {});

struct OrthogonalityResult {
    Estimate covariation;
    Estimate L_terminal;
    bool covariation_zero = false;
    bool L_martingale = false;
};

OrthogonalityResult orthogonality_check(const HedgeReport& report, double se_mult = 3.0);

struct RecursiveSample {
    double t = 0.0;
    Vec x;
    int k = 0;
    double field_value = 0.0;
    Estimate mc;  // estimate of the right-hand side
    double tolerance = 0.0;
    bool passed = false;
};

struct RecursiveCheckConfig {
    std::size_t paths = 4000;
    int steps_per_unit_time = 100;
    std::uint64_t seed = 7;
    Scheme scheme = Scheme::LogEuler;
    double rel_tol = 1e-2;
    double se_mult = 3.0;
    double abs_floor = 1e-8;
    double bump = 0.0;  // added to the field values on both sides (perturbation test)
};

struct RecursiveCheckReport {
    std::vector<RecursiveSample> samples;
    bool passed = false;
};

// Estimates E[e^{int c} h + int e^{int c} delta(v) du + sum e^{int c} f(v)] from each (t, x, k) with the field
// plugged into delta and f, under the dynamics of `model` (pass the drift-free model for the minimal
// measure), and compares against the field value.
RecursiveCheckReport recursive_value_check(const ValueField& field, const ModelSpec& model, const ClaimSpec& claim,
                                           bool discount, const std::vector<ProbeNode>& nodes,
                                           const RecursiveCheckConfig& cfg);

struct ReplicationConfig {
    AxisSpec axis;
    int t_steps = 100;
    int path_steps = 100;
    std::size_t paths = 4000;
    std::uint64_t seed = 11;
    double s0 = 1.0;
    double degeneracy_tol = 1e-8;
};

struct ReplicationReport {
    Estimate error;              // X_T - H per path
    double rms = 0.0;
    double max_abs = 0.0;
    // Ranges over rebalancing instants before default.
    double psi_min = 0.0;
    double psi_max = 0.0;
    double max_abs_stock_position = 0.0;
    double cash_min = 0.0;
    double cash_max = 0.0;
    std::size_t paths = 0;
};

// Two-state model (no default = 0, default = 1, absorbing) without drift. Holds psi traded bonds and
// phi shares from initial wealth v(0, S0, 0) with a cash account, rebalanced on the path grid.
ReplicationReport replicate_completed_market(const ModelSpec& model, const ClaimSpec& claim, const ClaimSpec& bond_claim,
                                             const ReplicationConfig& cfg);

}  // namespace rdsys
