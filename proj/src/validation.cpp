#include "rdsys/validation.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace rdsys {

namespace {

constexpr double kSlack = 1e-9;

void require_finite(double v, const char* field, const ProbeNode& n) {
    if (!std::isfinite(v)) {
        throw ModelDefinitionError(fmt::format("{} evaluates to {} at t={} x0={} k={}", field, v, n.t, n.x[0], n.k));
    }
}

void require_finite(const Mat& m, const char* field, const ProbeNode& n) {
    for (int i = 0; i < m.size(); ++i) require_finite(m.data()[i], field, n);
}

struct Tracker {
    AssumptionCheck check;
    bool seen = false;

    Tracker(std::string name, std::string condition, double threshold) {
        check.name = std::move(name);
        check.condition = std::move(condition);
        check.threshold = threshold;
        check.worst = -std::numeric_limits<double>::infinity();
    }

    // Records `value`; the check fails when any value exceeds the threshold.
    void observe(double value, const ProbeNode& node) {
        if (!seen || value > check.worst || (std::isnan(value) && !std::isnan(check.worst))) {
            check.worst = value;
            check.witness = node;
            seen = true;
        }
        if (!(value <= check.threshold * (1.0 + kSlack) + kSlack)) check.passed = false;
    }
};

double condition_number(const Mat& a) {
    Eigen::SelfAdjointEigenSolver<Mat> es(a, Eigen::EigenvaluesOnly);
    const auto& ev = es.eigenvalues();
    const double lo = ev.minCoeff();
    const double hi = ev.maxCoeff();
    if (!(lo > 0.0)) return std::numeric_limits<double>::infinity();
    return hi / lo;
}

}  // namespace

std::vector<ProbeNode> make_probe_grid(const ModelSpec& model, double lo, double hi, int n_t, int n_x) {
    if (n_t < 1 || n_x < 1) throw UsageError("probe grid needs at least one node per axis");
    const int d = model.dim();
    std::vector<ProbeNode> nodes;
    std::vector<int> idx(static_cast<size_t>(d), 0);
    long total = 1;
    for (int i = 0; i < d; ++i) total *= n_x;
    for (int it = 0; it < n_t; ++it) {
        const double t = n_t == 1 ? 0.0 : model.horizon * it / (n_t - 1);
        for (long flat = 0; flat < total; ++flat) {
            Vec x(d);
            long rem = flat;
            for (int i = 0; i < d; ++i) {
                const int j = static_cast<int>(rem % n_x);
                rem /= n_x;
                x[i] = n_x == 1 ? lo : lo + (hi - lo) * j / (n_x - 1);
            }
            for (int k = 0; k < model.regimes; ++k) nodes.push_back({t, x, k});
        }
    }
    return nodes;
}

bool ValidationReport::passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const AssumptionCheck& c) { return c.passed; });
}

const AssumptionCheck* ValidationReport::find(const std::string& name) const {
    for (const auto& c : checks)
        if (c.name == name) return &c;
    return nullptr;
}

ValidationReport validate_model(const ModelSpec& model, const ClaimSpec& claim, const std::vector<ProbeNode>& probe_grid) {
    if (probe_grid.empty()) throw UsageError("validate_model: probe grid is empty");
    model.check();
    claim.check(model);
    const auto& b = claim.bounds;
    const int m = model.regimes;

    Tracker ellipticity("diffusion_nondegenerate", "cond(Sigma Sigma^tr) <= 1e8", kMaxDiffusionCondition);
    Tracker mpr("market_price_of_risk_bounded", "|Sigma^tr (Sigma Sigma^tr)^-1 Gamma| <= phi_max", model.phi_max);
    Tracker lam_hi("intensity_bounded", "lambda^{kj}(t,x) <= Lambda_max", model.intensities.bound());
    Tracker lam_lo("intensity_nonnegative", "-lambda^{kj}(t,x) <= 0", 0.0);
    Tracker term("terminal_bounded", "|h(x,k)| <= K3", b.K3);
    Tracker growth("payment_linear_growth", "|delta|, |f^{kj}| <= K (1 + |v|)", 0.0);
    Tracker disc("discount_bounded_above", "c(t,x,k) <= K_c", b.discount_cap);
    Tracker mono("interaction_monotone", "g^k <= K1 + K2|v| on {v^k max}, g^k >= -K1 - K2|v| on {v^k min}", 0.0);
    Tracker lip("interaction_lipschitz", "|g(v1) - g(v2)| <= L_g |v1 - v2|_inf on |v| <= kappa(0)", b.lipschitz);

    std::mt19937_64 rng(0x5eed5eedULL);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    const double box = std::max(1.0, kappa_bound(claim, model.horizon, 0.0));
    std::vector<double> v1(static_cast<size_t>(m)), v2(static_cast<size_t>(m));

    for (const auto& node : probe_grid) {
        if (node.k < 0 || node.k >= m) throw UsageError(fmt::format("probe node regime {} outside [0,{})", node.k, m));
        if (!(node.t >= 0.0 && node.t <= model.horizon)) throw UsageError(fmt::format("probe node time {} outside [0,T]", node.t));
        if (!model.domain.contains(node.x)) throw UsageError("probe node lies outside the domain");

        const Vec g = model.drift_at(node.t, node.x, node.k);
        require_finite(Mat(g), "drift", node);
        const Mat s = model.vol_at(node.t, node.x, node.k);
        require_finite(s, "vol", node);
        const Mat a = s * s.transpose();
        ellipticity.observe(condition_number(a), node);
        if (auto phi = model.market_price_of_risk(node.t, node.x, node.k); phi && condition_number(a) <= kMaxDiffusionCondition) {
            mpr.observe(phi->norm(), node);
        } else {
            mpr.observe(std::numeric_limits<double>::infinity(), node);
        }
        for (int j = 0; j < m; ++j) {
            if (j == node.k) continue;
            const double lam = model.intensity(node.t, node.x, node.k, j);
            require_finite(lam, "intensity", node);
            lam_hi.observe(lam, node);
            lam_lo.observe(-lam, node);
        }
        const double h = claim.h(node.x, node.k);
        require_finite(h, "terminal payoff", node);
        term.observe(std::abs(h), node);
        disc.observe(claim.c(node.k), node);
        for (double vs : {-10.0, -1.0, 0.0, 1.0, 10.0}) {
            const double v = vs * (1.0 + b.K3);
            growth.observe(std::abs(claim.delta(node.k, v)) - b.growth * (1.0 + std::abs(v)), node);
            for (int j = 0; j < m; ++j) {
                if (j == node.k || model.intensity(node.t, node.x, node.k, j) == 0.0) continue;
                growth.observe(std::abs(claim.f(node.k, j, v)) - b.growth * (1.0 + std::abs(v)), node);
            }
        }
        const auto k = static_cast<size_t>(node.k);
        for (int sample = 0; sample < 8; ++sample) {
            for (auto& v : v1) v = box * unif(rng);
            double vmax = *std::max_element(v1.begin(), v1.end());
            double vmin = *std::min_element(v1.begin(), v1.end());
            double norm = std::max(std::abs(vmax), std::abs(vmin));
            v2 = v1;
            v2[k] = vmax;
            double gk = eval_interaction_g(claim, model, node.t, node.x, node.k, v2);
            mono.observe(gk - (b.K1 + b.K2 * norm), node);
            v2[k] = vmin;
            gk = eval_interaction_g(claim, model, node.t, node.x, node.k, v2);
            mono.observe(-(b.K1 + b.K2 * norm) - gk, node);

            for (auto& v : v2) v = box * unif(rng);
            double dist = 0.0;
            for (size_t i = 0; i < v1.size(); ++i) dist = std::max(dist, std::abs(v1[i] - v2[i]));
            if (dist > 0.0) {
                const double g1 = eval_interaction_g(claim, model, node.t, node.x, node.k, v1);
                const double g2 = eval_interaction_g(claim, model, node.t, node.x, node.k, v2);
                lip.observe(std::abs(g1 - g2) / dist, node);
            }
        }
    }

    ValidationReport report;
    report.probe_nodes = probe_grid.size();
    report.assumption_relaxed = model.uses_tabulated();
    for (auto* t : {&ellipticity, &mpr, &lam_hi, &lam_lo, &term, &growth, &disc, &mono, &lip}) report.checks.push_back(t->check);
    return report;
}

}  // namespace rdsys
