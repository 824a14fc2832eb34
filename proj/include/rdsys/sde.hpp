#pragma once

#include "rdsys/model.hpp"
#include "rdsys/stats.hpp"

#include <cstdint>
#include <functional>
#include <vector>

namespace rdsys {

enum class Scheme { Euler, LogEuler };

const char* to_string(Scheme s);
Scheme scheme_from_string(const std::string& s);

// Advances the regime-k diffusion from t by dt with Brownian increment dW.
// Log-Euler steps log x^i with the local rates Gamma^i / x^i and Sigma^i. / x^i, which is exact for
// the multiplicative family with constant rates. Returns false when the new state leaves D.
bool step_diffusion(const ModelSpec& model, double t, double dt, Vec& x, int k, const Vec& dW, Scheme scheme);

struct FrozenPath {
    double t0 = 0.0;
    Vec x0;
    int k = 0;
    std::vector<double> time_grid;
    std::vector<double> x_path;  // (steps + 1) x d, row-major
    bool exit_flag = false;

    Vec at(std::size_t i) const;
};

// Frozen-regime diffusion X^{t,x,k} on a uniform grid from t to T.
FrozenPath simulate_frozen(const ModelSpec& model, double t, const Vec& x, int k, int steps, Scheme scheme,
                           std::uint64_t seed);

struct JumpEvent {
    double time = 0.0;
    int from = 0;
    int to = 0;
    int channel = 0;  // index into IntensityMatrix::entries()
    Vec s;            // S at the jump time (S is continuous)
};

struct MarketPath {
    std::vector<double> s;        // (steps + 1) x d
    std::vector<int> regime;      // regime[i] = eta_{t_i}
    std::vector<JumpEvent> jumps;
    std::vector<std::size_t> jump_offsets;  // jumps in step i are [jump_offsets[i], jump_offsets[i+1])
    std::vector<double> weight;   // Radon-Nikodym weight at grid times; empty when unweighted
    std::vector<double> dW;       // steps x r Brownian increments per grid step
    std::vector<double> channel_counts;        // jumps taken through each channel
    std::vector<double> channel_compensators;  // int I_k(eta_-) lambda^{kj}(t, S_t) dt per channel
    bool exited = false;
    bool weight_degenerate = false;

    Vec s_at(std::size_t i, int d) const;
    double terminal_weight() const { return weight.empty() ? 1.0 : weight.back(); }
    bool usable() const { return !exited; }
};

enum class Construction { Pasting, Reweight };

const char* to_string(Construction c);

struct MarketSimConfig {
    int steps = 100;
    std::size_t paths = 10000;
    std::uint64_t seed = 1;
    Scheme scheme = Scheme::LogEuler;
    double t0 = 0.0;
    bool record_brownian = true;
    double max_exit_fraction = 1e-3;
};

struct PathBundle {
    std::vector<double> time_grid;
    int dim = 1;
    int brownian_dim = 1;
    std::vector<MarketPath> paths;
    Construction construction = Construction::Pasting;
    bool weighted = false;
    bool has_brownian = false;
    bool minimal_measure = false;
    std::uint64_t seed = 0;
    std::size_t exited = 0;
    std::size_t weight_degenerate = 0;

    double exclusion_fraction() const;
};

std::vector<double> uniform_grid(double t0, double t1, int steps);

// One path of (S, eta) from (t0, s0, k0). Pasting: frozen-regime diffusion between jumps, jumps by
// thinning against Lambda_max per channel leaving the current regime. Reweight: autonomous regime
// driven by unit-rate counters on every declared channel, weight = stochastic exponential density.
MarketPath simulate_market_path(const ModelSpec& model, const Vec& s0, int k0, const std::vector<double>& grid,
                                Construction construction, Scheme scheme, bool record_brownian, Rng& rng);

PathBundle simulate_market_pasting(const ModelSpec& model, const Vec& s0, int k0, const MarketSimConfig& cfg);
PathBundle simulate_market_reweight(const ModelSpec& model, const Vec& s0, int k0, const MarketSimConfig& cfg);

// Streams paths through `visit(index, path)` without keeping the bundle; visit must be thread-safe
// across distinct indices. Returns the number of exited paths.
std::size_t for_each_market_path(const ModelSpec& model, const Vec& s0, int k0, const MarketSimConfig& cfg,
                                 Construction construction,
                                 const std::function<void(std::size_t, const MarketPath&)>& visit);

// Multiplies each path weight by the discretized density exp(-sum Phi dW - 1/2 sum |Phi|^2 dt) of the
// minimal martingale measure, Phi evaluated at the left grid point.
PathBundle girsanov_to_minimal_elmm(const ModelSpec& model, PathBundle bundle);

// Alternative route to the minimal measure: simulate the drift-free market directly.
PathBundle simulate_minimal_elmm(const ModelSpec& model, const Vec& s0, int k0, const MarketSimConfig& cfg);

// Pieces of grid step i between the grid times and the logged jump times; the regime is constant
// on each piece and S is known at both ends.
struct PathPiece {
    double t0, t1;
    Vec s0, s1;
    int k;
    const JumpEvent* jump_at_end;  // jump closing the piece, if any
};
std::vector<PathPiece> step_pieces(const MarketPath& path, const std::vector<double>& grid, int d, std::size_t i);

// Trapezoid of fn(t, S, k) over grid step i, split at the jump times.
double step_integral(const MarketPath& path, const std::vector<double>& grid, int d, std::size_t i,
                     const std::function<double(double, const Vec&, int)>& fn);

// Weighted mean of phi(path) over usable paths, each term multiplied by the terminal weight.
Estimate weighted_estimate(const PathBundle& bundle, const std::function<double(const MarketPath&)>& phi);

}  // namespace rdsys
