#include "rdsys/fk.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>

namespace rdsys {

namespace {

constexpr std::uint64_t kTagFk = 0xf4e1ULL;

void clamp_to_kappa(std::span<double> v, double kappa) {
    for (double& x : v) x = std::clamp(x, -kappa, kappa);
}

}  // namespace

ValueField constant_field(std::vector<double> t_grid, std::vector<std::vector<double>> x_grid, int regimes, double value) {
    ValueField f(std::move(t_grid), std::move(x_grid), regimes);
    for (std::size_t ti = 0; ti < f.time_count(); ++ti)
        for (int k = 0; k < regimes; ++k) std::ranges::fill(f.layer(ti, k), value);
    return f;
}

ValueField terminal_field(const ModelSpec& model, const ClaimSpec& claim, std::vector<double> t_grid,
                          std::vector<std::vector<double>> x_grid) {
    ValueField f(std::move(t_grid), std::move(x_grid), model.regimes);
    for (std::size_t flat = 0; flat < f.space_count(); ++flat) {
        const Vec x = f.node(flat);
        for (int k = 0; k < model.regimes; ++k) {
            const double h = claim.h(x, k);
            for (std::size_t ti = 0; ti < f.time_count(); ++ti) f.at(ti, k, flat) = h;
        }
    }
    return f;
}

std::vector<double> fk_node_samples(const ModelSpec& model, const ClaimSpec& claim, const ValueField& v_in, NodeRef node,
                                    const FkConfig& cfg, std::size_t* extrapolation_hits, std::size_t* exited) {
    if (cfg.paths_per_node == 0 || cfg.substeps < 1) throw UsageError("FK needs paths_per_node >= 1 and substeps >= 1");
    const auto& tg = v_in.t_grid();
    const std::size_t nt = tg.size();
    const int m = model.regimes;
    const int k = node.k;
    const Vec x0 = v_in.node(node.flat);
    const double t0 = tg[node.ti];
    const double c = claim.c(k);
    const bool truncate = claim.truncation_active();
    const double T = model.horizon;

    std::vector<double> samples;
    samples.reserve(cfg.paths_per_node);
    if (node.ti + 1 >= nt) {
        samples.assign(cfg.paths_per_node, claim.h(x0, k));
        return samples;
    }

    Rng rng = make_stream(cfg.seed, kTagFk, node.ti * static_cast<std::uint64_t>(m) + static_cast<std::uint64_t>(k), node.flat);
    std::normal_distribution<double> normal;
    std::vector<double> va(static_cast<size_t>(m)), vb(static_cast<size_t>(m));
    Vec dw(model.brownian_dim);
    std::size_t hits = 0;
    std::size_t lost = 0;

    // Interaction at time s (between layers j and j+1 with weight w) and state x, with v_in plugged in.
    auto g_at = [&](std::size_t j, double w, double s, const Vec& x) {
        bool clamped = v_in.interpolate_regimes(j, x, va);
        if (w > 0.0) {
            clamped = v_in.interpolate_regimes(j + 1, x, vb) || clamped;
            for (int i = 0; i < m; ++i) va[static_cast<size_t>(i)] += w * (vb[static_cast<size_t>(i)] - va[static_cast<size_t>(i)]);
        }
        if (clamped) ++hits;
        if (truncate) clamp_to_kappa(va, kappa_bound(claim, T, std::min(s, T)));
        return eval_interaction_g(claim, model, s, x, k, va);
    };

    for (std::size_t p = 0; p < cfg.paths_per_node; ++p) {
        Vec x = x0;
        double acc = 0.0;
        double s_prev = t0;
        double g_prev = g_at(node.ti, 0.0, t0, x);
        bool out = false;
        for (std::size_t j = node.ti; j + 1 < nt && !out; ++j) {
            const double h = (tg[j + 1] - tg[j]) / cfg.substeps;
            for (int sub = 1; sub <= cfg.substeps; ++sub) {
                const double s = sub == cfg.substeps ? tg[j + 1] : tg[j] + sub * h;
                for (int i = 0; i < model.brownian_dim; ++i) dw[i] = std::sqrt(h) * normal(rng);
                if (!step_diffusion(model, s_prev, h, x, k, dw, cfg.scheme)) {
                    out = true;
                    break;
                }
                for (int i = 0; i < x.size(); ++i)
                    if (!std::isfinite(x[i])) throw SimulationError("frozen path became non-finite", static_cast<long>(j));
                const double g = sub == cfg.substeps ? g_at(j + 1, 0.0, s, x) : g_at(j, static_cast<double>(sub) / cfg.substeps, s, x);
                acc += 0.5 * (s - s_prev) * (std::exp(c * (s_prev - t0)) * g_prev + std::exp(c * (s - t0)) * g);
                g_prev = g;
                s_prev = s;
            }
        }
        if (out) {
            ++lost;
            continue;
        }
        acc += std::exp(c * (T - t0)) * claim.h(x, k);
        samples.push_back(acc);
    }
    if (static_cast<double>(lost) > cfg.max_exit_fraction * static_cast<double>(cfg.paths_per_node)) {
        throw EstimationError(fmt::format("FK node (t={}, x0={}, k={}): {} of {} frozen paths left the domain", t0, x0[0], k,
                                          lost, cfg.paths_per_node));
    }
    if (extrapolation_hits) *extrapolation_hits += hits;
    if (exited) *exited += lost;
    return samples;
}

FkResult apply_F(const ModelSpec& model, const ClaimSpec& claim, const ValueField& v_in, const FkConfig& cfg) {
    if (v_in.regimes() != model.regimes) throw UsageError("apply_F: field regime count differs from model");
    if (v_in.dim() != model.dim()) throw UsageError("apply_F: field dimension differs from model");
    FkResult r{ValueField(v_in.t_grid(), v_in.x_grid(), model.regimes), ValueField(v_in.t_grid(), v_in.x_grid(), model.regimes), 0, 0};
    const std::size_t nt = v_in.time_count();
    const std::size_t nx = v_in.space_count();
    const auto m = static_cast<std::size_t>(model.regimes);
    for (std::size_t flat = 0; flat < nx; ++flat) {
        const Vec x = v_in.node(flat);
        for (int k = 0; k < model.regimes; ++k) r.value.at(nt - 1, k, flat) = claim.h(x, k);
    }
    const std::size_t total = (nt - 1) * m * nx;
    std::vector<std::size_t> hits(total, 0), lost(total, 0);
    parallel_for(total, [&](std::size_t idx) {
        NodeRef node{idx / (m * nx), static_cast<int>((idx / nx) % m), idx % nx};
        const auto samples = fk_node_samples(model, claim, v_in, node, cfg, &hits[idx], &lost[idx]);
        const Estimate e = estimate(samples);
        r.value.at(node.ti, node.k, node.flat) = e.mean;
        r.se.at(node.ti, node.k, node.flat) = e.se;
    });
    for (std::size_t i = 0; i < total; ++i) {
        r.extrapolation_hits += hits[i];
        r.exited += lost[i];
    }
    return r;
}

double default_beta(const ModelSpec& model, const ClaimSpec& claim) {
    return 2.0 * claim.bounds.lipschitz * std::exp(claim.bounds.discount_cap * model.horizon);
}

FixedPointResult iterate_to_fixed_point(const ModelSpec& model, const ClaimSpec& claim, const ValueField& v0, double beta,
                                        double tol, int max_iter, const FkConfig& cfg, int min_iter) {
    if (max_iter < 1) throw UsageError("iterate_to_fixed_point needs max_iter >= 1");
    if (!(beta >= 0.0)) throw UsageError("beta must be >= 0");
    FixedPointResult out;
    ContractionTrace& trace = out.trace;
    trace.beta = beta;
    trace.lipschitz = claim.bounds.lipschitz;
    trace.discount_cap = claim.bounds.discount_cap;
    const double critical = trace.lipschitz * std::exp(trace.discount_cap * model.horizon);
    if (beta > 0.0) {
        trace.theoretical_rate = critical / beta;
    } else {
        trace.theoretical_rate = critical == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    }
    if (critical > 0.0 && beta <= critical) {
        trace.warnings.push_back(fmt::format("beta = {:.6g} <= L e^(K T) = {:.6g}: contraction not guaranteed", beta, critical));
    }

    ValueField v = v0;
    ValueField v_prev;
    const double T = model.horizon;
    for (int n = 0; n < max_iter; ++n) {
        FkResult res = apply_F(model, claim, v, cfg);
        out.extrapolation_hits += res.extrapolation_hits;
        ContractionStep step;
        step.iter = n;
        const NodeRef arg = beta_norm_argmax(res.value, v, beta);
        const double weight = std::exp(-beta * (T - v.t_grid()[arg.ti]));
        step.beta_dist = weight * std::abs(res.value.at(arg.ti, arg.k, arg.flat) - v.at(arg.ti, arg.k, arg.flat));
        step.sup_dist = beta_norm(res.value, v, 0.0);
        if (n == 0) {
            step.se = weight * res.se.at(arg.ti, arg.k, arg.flat);
        } else {
            const auto a = fk_node_samples(model, claim, v, arg, cfg);
            const auto b = fk_node_samples(model, claim, v_prev, arg, cfg);
            step.se = weight * paired_difference(a, b).se;
        }
        if (!trace.steps.empty() && trace.steps.back().beta_dist > 0.0) step.ratio = step.beta_dist / trace.steps.back().beta_dist;
        trace.steps.push_back(step);
        v_prev = std::move(v);
        v = std::move(res.value);
        out.se = std::move(res.se);
        if (step.beta_dist < tol && n + 1 >= min_iter) {
            trace.converged = true;
            break;
        }
    }
    out.value = std::move(v);
    if (!trace.converged) {
        throw ConvergenceError(fmt::format("no convergence to tol {} within {} iterations (last beta distance {})", tol, max_iter,
                                           trace.steps.back().beta_dist),
                               trace);
    }
    return out;
}

}  // namespace rdsys
