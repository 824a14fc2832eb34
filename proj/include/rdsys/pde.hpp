#pragma once

#include "rdsys/claim.hpp"
#include "rdsys/value_field.hpp"

#include <array>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace rdsys {

// general:          0 = v_t + L^k v + c v + g^k(t, x, v)
// markov_test:      g reduced to the pure coupling sum_j lambda^{kj} (v^j - v^k), c = 0
// hedging:          drift removed from L^k (minimal martingale measure dynamics), c = 0
// crash_at_default: general with the martingale-restoring crash drift of the model, c = 0
enum class PdeVariant { General, MarkovTest, Hedging, CrashAtDefault };

const char* to_string(PdeVariant v);
PdeVariant pde_variant_from_string(const std::string& s);

enum class Spacing { Uniform, Log };
// Linear: zero second derivative at the face, one-sided first derivative. DirichletPayoff: v = h.
enum class BoundaryKind { Linear, DirichletPayoff };

const char* to_string(Spacing s);
Spacing spacing_from_string(const std::string& s);
const char* to_string(BoundaryKind b);
BoundaryKind boundary_from_string(const std::string& s);

struct AxisSpec {
    double lo = 0.1;
    double hi = 10.0;
    int count = 101;
    Spacing spacing = Spacing::Log;
};

struct PdeProblem {
    ModelSpec model;
    ClaimSpec claim;
    PdeVariant variant = PdeVariant::General;
    std::optional<CoefficientField> drift_override;  // replaces the drift of L^k when set
    std::vector<AxisSpec> axes;
    int t_steps = 200;
    std::vector<std::array<BoundaryKind, 2>> boundary;  // per axis {low face, high face}; empty = linear
    double theta = 0.5;
    bool rannacher = true;  // first two steps as four implicit half steps
    int picard_max = 50;
    double picard_tol = 1e-12;

    void check() const;
};

struct PdeDiagnostics {
    double max_peclet = 0.0;          // |b| h / (a/2) over interior nodes
    double max_diffusion_number = 0.0;  // dt * a / h^2
    int picard_max_used = 0;
    long picard_total = 0;
    std::size_t time_steps = 0;
    std::size_t nodes = 0;
    std::string scheme;
    std::vector<std::string> boundary;
};

struct PdeResult {
    ValueField value;
    PdeDiagnostics diagnostics;
};

// Backward march from v(T) = h with a Douglas alternating-direction scheme (Crank-Nicolson in one
// dimension). Diffusion and drift are implicit per axis, cross derivatives explicit, and the reaction
// c v + g is taken by the trapezoid rule with the new-time value resolved by Picard sub-iterations.
PdeResult solve_system(const PdeProblem& problem);

// Drift, diffusion and reaction actually used by the solver for a given problem.
struct PdeCoefficients {
    std::function<Vec(double, const Vec&, int)> drift;
    std::function<Mat(double, const Vec&, int)> diffusion;
    std::function<double(double, const Vec&, int, std::span<const double>)> reaction;
};
PdeCoefficients pde_coefficients(const PdeProblem& problem);

// A f = Gamma . grad f + 1/2 sum a^{ij} f_{x^i x^j} + sum_j lambda^{kj} (f(x, j) - f(x, k)),
// derivatives by central differences with relative step h.
double apply_generator(const ModelSpec& model, const std::function<double(const Vec&, int)>& f, double t, const Vec& x, int k,
                       double h = 1e-4);

}  // namespace rdsys
