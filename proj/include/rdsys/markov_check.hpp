#pragma once

#include "rdsys/pde.hpp"
#include "rdsys/sde.hpp"

#include <string>
#include <vector>

namespace rdsys {

// Compactly supported C^2 bump (1 - |(x - center)/radius|^2)^3, scaled per regime.
struct TestFunction {
    std::string name;
    Vec center;
    double radius = 1.0;
    std::vector<double> regime_weight;

    double operator()(const Vec& x, int k) const;
};

// Five bumps around s0 with different centres, widths and regime weights.
std::vector<TestFunction> default_test_functions(const ModelSpec& model, const Vec& s0);

struct MartingaleCheckConfig {
    int steps = 100;
    std::size_t paths = 10000;
    std::uint64_t seed = 3;
    Scheme scheme = Scheme::LogEuler;
    Construction construction = Construction::Pasting;
    int check_times = 5;  // equally spaced in (0, T]
    double se_mult = 3.0;
};

struct MartingaleCheckPoint {
    std::string name;
    double t = 0.0;
    Estimate estimate;
    bool passed = false;
};

struct MartingaleReport {
    std::vector<MartingaleCheckPoint> generator;  // f(S_t, eta_t) - f(S_0, eta_0) - int A f ds
    std::vector<MartingaleCheckPoint> counters;   // N^{kj}_T - int lambda^{kj} ds per declared channel
    std::size_t exited = 0;
    bool passed = false;
};

// Generator-compensated test functions and compensated counters along simulated market paths.
MartingaleReport martingale_check(const ModelSpec& model, const Vec& s0, int k0, const std::vector<TestFunction>& tests,
                                  const MartingaleCheckConfig& cfg);

struct MarkovCheckConfig {
    AxisSpec axis;
    int pde_t_steps = 200;
    int steps = 100;  // path steps on [0, T']
    std::size_t outer = 200;
    std::size_t inner = 200;
    std::uint64_t seed = 5;
    Scheme scheme = Scheme::LogEuler;
    std::vector<double> check_fractions{0.25, 0.5, 0.75};
    double se_mult = 3.0;
};

struct MarkovCheckPoint {
    double t = 0.0;
    Estimate restart_gap;  // inner restart mean of h(S_T', eta_T') minus v(t, S_t, eta_t)
    Estimate increment;    // v(t, S_t, eta_t) - v(0, S_0, eta_0)
    bool passed = false;
};

struct MarkovReport {
    double v0 = 0.0;
    ValueField value;
    std::vector<MarkovCheckPoint> points;
    bool passed = false;
};

// Solves the linear coupled system with terminal data h at T' (the claim's terminal payoff) and
// compares v along simulated paths with restart estimates of E[h(S_T', eta_T') | S_t, eta_t].
MarkovReport markov_property_check(const ModelSpec& model, const ClaimSpec& terminal_claim, double t_prime, const Vec& s0,
                                   int k0, const MarkovCheckConfig& cfg);

}  // namespace rdsys
