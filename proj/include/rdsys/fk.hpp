#pragma once

#include "rdsys/claim.hpp"
#include "rdsys/sde.hpp"
#include "rdsys/value_field.hpp"

#include <string>
#include <vector>

namespace rdsys {

struct FkConfig {
    std::size_t paths_per_node = 1000;
    int substeps = 1;  // frozen-path steps per field time interval
    std::uint64_t seed = 1;
    Scheme scheme = Scheme::LogEuler;
    double max_exit_fraction = 1e-3;
};

struct FkResult {
    ValueField value;
    ValueField se;  // Monte Carlo standard error per node
    std::size_t extrapolation_hits = 0;
    std::size_t exited = 0;
};

// Field on (t_grid, x_grid) equal to h(x, k) on every layer; its last layer is the terminal condition.
ValueField terminal_field(const ModelSpec& model, const ClaimSpec& claim, std::vector<double> t_grid,
                         std::vector<std::vector<double>> x_grid);
ValueField constant_field(std::vector<double> t_grid, std::vector<std::vector<double>> x_grid, int regimes, double value);

// One Monte Carlo sample per frozen path from node (ti, k, flat) of
//   h(X_T, k) e^{int c} + int_t^T g~^k(s, X_s, v_in(s, X_s)) e^{int c} ds,
// trapezoid in time on the field's grid refined by substeps. The stream depends only on
// (seed, node), so repeated calls reuse the same paths.
std::vector<double> fk_node_samples(const ModelSpec& model, const ClaimSpec& claim, const ValueField& v_in, NodeRef node,
                                    const FkConfig& cfg, std::size_t* extrapolation_hits = nullptr,
                                    std::size_t* exited = nullptr);

// Feynman-Kac operator applied at every node of v_in's grid; terminal layer set to h exactly.
FkResult apply_F(const ModelSpec& model, const ClaimSpec& claim, const ValueField& v_in, const FkConfig& cfg);

struct ContractionStep {
    int iter = 0;
    double beta_dist = 0.0;  // |v_{n+1} - v_n|_beta
    double sup_dist = 0.0;
    double se = 0.0;         // standard error of beta_dist from paired paths at the argmax node
    double ratio = 0.0;      // beta_dist / previous beta_dist (0 for the first step)
};

struct ContractionTrace {
    std::vector<ContractionStep> steps;
    double beta = 0.0;
    double lipschitz = 0.0;
    double discount_cap = 0.0;
    double theoretical_rate = 0.0;  // L_g e^{K_c T} / beta
    bool converged = false;
    std::vector<std::string> warnings;
};

class ConvergenceError : public EstimationError {
public:
    ConvergenceError(const std::string& what, ContractionTrace trace) : EstimationError(what), trace_(std::move(trace)) {}
    const ContractionTrace& trace() const { return trace_; }

private:
    ContractionTrace trace_;
};

struct FixedPointResult {
    ValueField value;
    ValueField se;
    ContractionTrace trace;
    std::size_t extrapolation_hits = 0;
};

// beta = 2 L_g e^{K_c T}: guaranteed contraction rate 1/2.
double default_beta(const ModelSpec& model, const ClaimSpec& claim);

// Picard iteration v_{n+1} = F v_n until |v_{n+1} - v_n|_beta < tol, running at least min_iter sweeps.
FixedPointResult iterate_to_fixed_point(const ModelSpec& model, const ClaimSpec& claim, const ValueField& v0, double beta,
                                        double tol, int max_iter, const FkConfig& cfg, int min_iter = 0);

}  // namespace rdsys
