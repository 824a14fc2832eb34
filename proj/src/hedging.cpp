#include "rdsys/hedging.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>

namespace rdsys {

namespace {

constexpr std::uint64_t kTagRecursive = 0x7ec5ULL;

// Sum over channels leaving k of lambda^{kj} (v^j - v^k + f^{kj}(v^k)) at (t, x).
double compensator_rate(const ValueField& field, const ModelSpec& model, const ClaimSpec& claim, double t, const Vec& x, int k) {
    const double vk = field.interpolate(t, x, k);
    double acc = 0.0;
    for (int e : model.intensities.channels_from(k)) {
        const auto& en = model.intensities.entries()[static_cast<size_t>(e)];
        const double lam = en.scale * en.profile.eval(t, x);
        if (lam == 0.0) continue;
        acc += lam * (field.interpolate(t, x, en.to) - vk + claim.f(k, en.to, vk));
    }
    return acc;
}

double dot(const Vec& a, const Vec& b) { return a.dot(b); }

Estimate weighted(const std::vector<double>& xs, const std::vector<double>& ws) {
    std::vector<double> v(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) v[i] = ws[i] == 0.0 ? 0.0 : ws[i] * xs[i];
    return estimate(v);
}

}  // namespace

HedgeReport build_hedge(const ValueField& field, const ModelSpec& model, const ClaimSpec& claim, const PathBundle& bundle,
                        const HedgeOptions& options) {
    if (field.regimes() != model.regimes || field.dim() != model.dim()) throw UsageError("build_hedge: field does not match model");
    if (bundle.paths.empty()) throw UsageError("build_hedge: empty path bundle");
    const int d = model.dim();
    const auto& grid = bundle.time_grid;
    const std::size_t n = grid.size() - 1;
    const std::size_t np = bundle.paths.size();

    HedgeReport rep;
    rep.time_grid = grid;
    rep.weighted = bundle.weighted;
    rep.paths.resize(np);
    std::vector<std::vector<double>> L_series(np), G_series(np);
    const std::size_t keep = std::min(options.keep_paths, np);
    rep.theta_path.resize(keep);
    rep.L_path.resize(keep);
    rep.theta0_path.resize(keep);
    // Pooled cost increments and gains, per path: sums of dC, dC^2, dG, dG^2, dC dG and the count.
    std::vector<std::array<double, 6>> cost_moments(np, std::array<double, 6>{});

    parallel_for(np, [&](std::size_t pi) {
        const MarketPath& p = bundle.paths[pi];
        PathHedge& ph = rep.paths[pi];
        ph.weight = bundle.weighted ? p.terminal_weight() : 1.0;
        if (!p.usable()) {
            ph.flagged = true;
            return;
        }
        auto& Ls = L_series[pi];
        auto& Gs = G_series[pi];
        Ls.assign(n + 1, 0.0);
        Gs.assign(n + 1, 0.0);
        const Vec s0 = p.s_at(0, d);
        ph.H0 = field.interpolate(grid[0], s0, p.regime[0]);
        double H = 0.0, G = 0.0, G_left = 0.0, jumps = 0.0, comp = 0.0, cov = 0.0;
        std::size_t outside = 0, evaluations = 0;
        double V_prev = ph.H0;
        std::array<double, 6>& cm = cost_moments[pi];
        const bool keep_series = pi < keep;
        if (keep_series) {
            rep.theta_path[pi].reserve((n + 1) * static_cast<size_t>(d));
            rep.L_path[pi].reserve(n + 1);
            rep.theta0_path[pi].reserve(n + 1);
        }
        auto record = [&](std::size_t i, double L_now, double G_now) {
            if (!keep_series) return;
            const Vec x = p.s_at(i, d);
            const Vec th = field.gradient(grid[i], x, p.regime[i]);
            for (int j = 0; j < d; ++j) rep.theta_path[pi].push_back(th[j]);
            rep.L_path[pi].push_back(L_now);
            rep.theta0_path[pi].push_back(ph.H0 + L_now + G_now - dot(th, x));
        };
        record(0, 0.0, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const double L_before = jumps - comp;
            const double G_before = G;
            double payments = 0.0;
            for (const auto& piece : step_pieces(p, grid, d, i)) {
                const int k = piece.k;
                ++evaluations;
                if (!field.inside_hull(piece.s0)) ++outside;
                const Vec th = field.gradient(piece.t0, piece.s0, k);
                const Vec dS = piece.s1 - piece.s0;
                const double dt = piece.t1 - piece.t0;
                G_left += dot(th, dS);
                const Mat hess = field.hessian(piece.t0, piece.s0, k);
                const Mat a = model.diffusion_at(piece.t0, piece.s0, k);
                double corr = 0.0;
                for (int r = 0; r < d; ++r)
                    for (int c = 0; c < d; ++c) corr += hess(r, c) * (dS[r] * dS[c] - a(r, c) * dt);
                G += dot(th, dS) + 0.5 * corr;

                const double v0 = field.interpolate(piece.t0, piece.s0, k);
                const double v1 = field.interpolate(piece.t1, piece.s1, k);
                const double flow = 0.5 * dt * (claim.delta(k, v0) + claim.delta(k, v1));
                H += flow;
                payments += flow;
                comp += 0.5 * dt *
                        (compensator_rate(field, model, claim, piece.t0, piece.s0, k) +
                         compensator_rate(field, model, claim, piece.t1, piece.s1, k));
                if (piece.jump_at_end) {
                    const JumpEvent& e = *piece.jump_at_end;
                    const double vk = field.interpolate(e.time, e.s, e.from);
                    const double lump = claim.f(e.from, e.to, vk);
                    H += lump;
                    payments += lump;
                    jumps += field.interpolate(e.time, e.s, e.to) - vk + lump;
                }
            }
            const double L_now = jumps - comp;
            const double dL = L_now - L_before;
            const double dG = G - G_before;
            cov += dL * dG;
            Ls[i + 1] = L_now;
            Gs[i + 1] = G;
            const double V_now = field.interpolate(grid[i + 1], p.s_at(i + 1, d), p.regime[i + 1]);
            const double dC = V_now - V_prev + payments - dG;
            V_prev = V_now;
            cm[0] += dC;
            cm[1] += dC * dC;
            cm[2] += dG;
            cm[3] += dG * dG;
            cm[4] += dC * dG;
            cm[5] += 1.0;
            record(i + 1, L_now, G);
        }
        const Vec sT = p.s_at(n, d);
        H += claim.h(sT, p.regime[n]);
        ph.H = H;
        ph.gains = G;
        ph.gains_left = G_left;
        ph.L_T = jumps - comp;
        ph.residual = H - (ph.H0 + G + ph.L_T);
        ph.residual_left = H - (ph.H0 + G_left + ph.L_T);
        ph.covariation = cov;
        if (evaluations > 0 && static_cast<double>(outside) > options.hull_budget * static_cast<double>(evaluations)) ph.flagged = true;
    });

    std::vector<double> res, res_left, LT, covs, ws, res2, res_left2;
    rep.mean_L.assign(n + 1, 0.0);
    rep.mean_gains.assign(n + 1, 0.0);
    double wsum = 0.0;
    std::array<double, 6> pooled{};
    for (std::size_t pi = 0; pi < np; ++pi) {
        const PathHedge& ph = rep.paths[pi];
        if (ph.flagged) {
            ++rep.flagged;
            continue;
        }
        res.push_back(ph.residual);
        res_left.push_back(ph.residual_left);
        res2.push_back(ph.residual * ph.residual);
        res_left2.push_back(ph.residual_left * ph.residual_left);
        LT.push_back(ph.L_T);
        covs.push_back(ph.covariation);
        ws.push_back(ph.weight);
        wsum += ph.weight;
        for (std::size_t i = 0; i <= n; ++i) {
            rep.mean_L[i] += ph.weight * L_series[pi][i];
            rep.mean_gains[i] += ph.weight * G_series[pi][i];
        }
        for (std::size_t j = 0; j < 6; ++j) pooled[j] += (j == 5 ? 1.0 : ph.weight) * cost_moments[pi][j];
    }
    if (res.empty()) throw EstimationError("build_hedge: every path was flagged");
    const double count = static_cast<double>(res.size());
    for (std::size_t i = 0; i <= n; ++i) {
        rep.mean_L[i] /= count;
        rep.mean_gains[i] /= count;
    }
    rep.H0 = rep.paths.front().H0;
    rep.residual = weighted(res, ws);
    rep.residual_left = weighted(res_left, ws);
    rep.residual_rms = std::sqrt(std::max(0.0, weighted(res2, ws).mean));
    rep.residual_left_rms = std::sqrt(std::max(0.0, weighted(res_left2, ws).mean));
    rep.L_terminal = weighted(LT, ws);
    rep.covariation = weighted(covs, ws);
    if (pooled[5] > 0.0) {
        const double m = pooled[5];
        const double mc = pooled[0] / m;
        const double mg = pooled[2] / m;
        const double vc = std::max(0.0, pooled[1] / m - mc * mc);
        const double vg = std::max(0.0, pooled[3] / m - mg * mg);
        rep.cost_increment.mean = mc;
        rep.cost_increment.sd = std::sqrt(vc);
        rep.cost_increment.n = static_cast<size_t>(m);
        rep.cost_increment.se = rep.cost_increment.sd / std::sqrt(m);
        rep.cost_gain_correlation = vc > 0.0 && vg > 0.0 ? (pooled[4] / m - mc * mg) / std::sqrt(vc * vg) : 0.0;
    }
    (void)wsum;
    return rep;
}

OrthogonalityResult orthogonality_check(const HedgeReport& report, double se_mult) {
    OrthogonalityResult r;
    r.covariation = report.covariation;
    r.L_terminal = report.L_terminal;
    r.covariation_zero = std::abs(r.covariation.mean) <= se_mult * r.covariation.se;
    r.L_martingale = std::abs(r.L_terminal.mean) <= se_mult * r.L_terminal.se;
    return r;
}

RecursiveCheckReport recursive_value_check(const ValueField& field, const ModelSpec& model, const ClaimSpec& claim, bool discount,
                                           const std::vector<ProbeNode>& nodes, const RecursiveCheckConfig& cfg) {
    if (claim.family != InteractionFamily::Linear) {
        throw ConfigurationError("the direct representation of the value needs the linear interaction family");
    }
    if (cfg.paths < 2) throw UsageError("recursive_value_check needs at least 2 paths");
    const int d = model.dim();
    const double T = model.horizon;
    RecursiveCheckReport rep;
    rep.passed = true;
    for (std::size_t ni = 0; ni < nodes.size(); ++ni) {
        const ProbeNode& node = nodes[ni];
        if (!(node.t >= 0.0 && node.t < T)) throw UsageError("recursive_value_check: node time outside [0, T)");
        RecursiveSample smp;
        smp.t = node.t;
        smp.x = node.x;
        smp.k = node.k;
        smp.field_value = field.interpolate(node.t, node.x, node.k) + cfg.bump;
        const int steps = std::max(1, static_cast<int>(std::ceil((T - node.t) * cfg.steps_per_unit_time - 1e-9)));
        const auto grid = uniform_grid(node.t, T, steps);
        std::vector<double> vals(cfg.paths, 0.0);
        std::vector<unsigned char> lost(cfg.paths, 0);
        parallel_for(cfg.paths, [&](std::size_t pi) {
            Rng rng = make_stream(cfg.seed, kTagRecursive, ni, pi);
            const MarketPath p = simulate_market_path(model, node.x, node.k, grid, Construction::Pasting, cfg.scheme, false, rng);
            if (p.exited) {
                lost[pi] = 1;
                return;
            }
            double log_disc = 0.0;
            double acc = 0.0;
            auto v_at = [&](double t, const Vec& x, int k) { return field.interpolate(t, x, k) + cfg.bump; };
            for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
                for (const auto& piece : step_pieces(p, grid, d, i)) {
                    const int k = piece.k;
                    const double c = discount ? claim.c(k) : 0.0;
                    const double dt = piece.t1 - piece.t0;
                    const double disc0 = std::exp(log_disc);
                    const double disc1 = std::exp(log_disc + c * dt);
                    acc += 0.5 * dt * (disc0 * claim.delta(k, v_at(piece.t0, piece.s0, k)) + disc1 * claim.delta(k, v_at(piece.t1, piece.s1, k)));
                    log_disc += c * dt;
                    if (piece.jump_at_end) {
                        const JumpEvent& e = *piece.jump_at_end;
                        acc += std::exp(log_disc) * claim.f(e.from, e.to, v_at(e.time, e.s, e.from));
                    }
                }
            }
            acc += std::exp(log_disc) * claim.h(p.s_at(grid.size() - 1, d), p.regime.back());
            vals[pi] = acc;
        });
        std::vector<double> kept;
        kept.reserve(cfg.paths);
        std::size_t n_lost = 0;
        for (std::size_t i = 0; i < cfg.paths; ++i) {
            if (lost[i]) {
                ++n_lost;
            } else {
                kept.push_back(vals[i]);
            }
        }
        if (static_cast<double>(n_lost) > 1e-3 * static_cast<double>(cfg.paths)) {
            throw SimulationError(fmt::format("recursive check: {} of {} paths left the domain", n_lost, cfg.paths), -1);
        }
        smp.mc = estimate(kept);
        smp.tolerance = std::max({cfg.rel_tol * std::abs(smp.field_value), cfg.se_mult * smp.mc.se, cfg.abs_floor});
        smp.passed = std::abs(smp.mc.mean - smp.field_value) <= smp.tolerance;
        rep.passed = rep.passed && smp.passed;
        rep.samples.push_back(std::move(smp));
    }
    return rep;
}

ReplicationReport replicate_completed_market(const ModelSpec& model, const ClaimSpec& claim, const ClaimSpec& bond_claim,
                                             const ReplicationConfig& cfg) {
    if (model.regimes != 2) throw ConfigurationError("completed-market replication needs the two-state default model");
    if (model.has_drift()) throw ConfigurationError("completed-market replication needs a drift-free stock");
    if (!model.intensities.channels_from(1).empty()) throw ConfigurationError("the default state must be absorbing");
    if (model.dim() != 1) throw ConfigurationError("completed-market replication is implemented for one stock");

    PdeProblem pb;
    pb.model = model;
    pb.variant = PdeVariant::Hedging;
    pb.axes = {cfg.axis};
    pb.t_steps = cfg.t_steps;
    pb.claim = claim;
    const PdeResult claim_sol = solve_system(pb);
    pb.claim = bond_claim;
    const PdeResult bond_sol = solve_system(pb);
    const ValueField& v = claim_sol.value;
    const ValueField& vb = bond_sol.value;
    const double scale = std::max(vb.max_abs(), std::numeric_limits<double>::min());

    MarketSimConfig sc;
    sc.steps = cfg.path_steps;
    sc.paths = cfg.paths;
    sc.seed = cfg.seed;
    sc.record_brownian = false;
    const Vec s0 = Vec::Constant(1, cfg.s0);
    const PathBundle bundle = simulate_market_pasting(model, s0, 0, sc);
    const auto& grid = bundle.time_grid;
    const std::size_t n = grid.size() - 1;

    std::vector<double> errors(bundle.paths.size(), 0.0);
    std::vector<std::array<double, 5>> ranges(bundle.paths.size());
    std::vector<unsigned char> degenerate(bundle.paths.size(), 0);
    parallel_for(bundle.paths.size(), [&](std::size_t pi) {
        const MarketPath& p = bundle.paths[pi];
        auto& rg = ranges[pi];
        rg = {std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity(), 0.0,
              std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
        Vec x = p.s_at(0, 1);
        double X = v.interpolate(grid[0], x, 0);
        double H = 0.0;
        double bond_value = vb.interpolate(grid[0], x, 0);
        for (std::size_t i = 0; i < n; ++i) {
            const double t = grid[i];
            const int k = p.regime[i];
            double psi = 0.0;
            double phi = 0.0;
            if (k == 0) {
                const double vn = v.interpolate(t, x, 0);
                const double vbn = vb.interpolate(t, x, 0);
                const double dv = v.interpolate(t, x, 1) - vn + claim.f(0, 1, vn);
                const double dvb = vb.interpolate(t, x, 1) - vbn + bond_claim.f(0, 1, vbn);
                if (!(std::abs(dvb) >= cfg.degeneracy_tol * scale)) {
                    degenerate[pi] = 1;
                    return;
                }
                psi = dv / dvb;
                phi = v.gradient(t, x, 0)[0] - psi * vb.gradient(t, x, 0)[0];
            } else {
                phi = v.gradient(t, x, k)[0];
            }
            const double cash = X - phi * x[0] - psi * bond_value;
            if (k == 0) {
                rg[0] = std::min(rg[0], psi);
                rg[1] = std::max(rg[1], psi);
                rg[2] = std::max(rg[2], std::abs(phi));
                rg[3] = std::min(rg[3], cash);
                rg[4] = std::max(rg[4], cash);
            }
            double bond_paid = 0.0;
            for (const auto& piece : step_pieces(p, grid, 1, i)) {
                const double dt = piece.t1 - piece.t0;
                H += 0.5 * dt * (claim.delta(piece.k, v.interpolate(piece.t0, piece.s0, piece.k)) +
                                 claim.delta(piece.k, v.interpolate(piece.t1, piece.s1, piece.k)));
                bond_paid += 0.5 * dt * (bond_claim.delta(piece.k, vb.interpolate(piece.t0, piece.s0, piece.k)) +
                                         bond_claim.delta(piece.k, vb.interpolate(piece.t1, piece.s1, piece.k)));
                if (piece.jump_at_end) {
                    const JumpEvent& e = *piece.jump_at_end;
                    H += claim.f(e.from, e.to, v.interpolate(e.time, e.s, e.from));
                    bond_paid += bond_claim.f(e.from, e.to, vb.interpolate(e.time, e.s, e.from));
                }
            }
            x = p.s_at(i + 1, 1);
            bond_value = i + 1 == n ? bond_claim.h(x, p.regime[n]) : vb.interpolate(grid[i + 1], x, p.regime[i + 1]);
            X = cash + phi * x[0] + psi * (bond_value + bond_paid);
        }
        H += claim.h(x, p.regime[n]);
        errors[pi] = X - H;
    });
    for (std::size_t pi = 0; pi < degenerate.size(); ++pi) {
        if (degenerate[pi]) {
            throw DegeneracyError(fmt::format("traded bond has no default sensitivity on path {} (|v(d) - v(n)| < {} x scale)", pi,
                                              cfg.degeneracy_tol));
        }
    }
    ReplicationReport rep;
    rep.paths = errors.size();
    rep.error = estimate(errors);
    double ss = 0.0;
    for (double e : errors) {
        ss += e * e;
        rep.max_abs = std::max(rep.max_abs, std::abs(e));
    }
    rep.rms = std::sqrt(ss / static_cast<double>(errors.size()));
    rep.psi_min = std::numeric_limits<double>::infinity();
    rep.psi_max = -std::numeric_limits<double>::infinity();
    rep.cash_min = std::numeric_limits<double>::infinity();
    rep.cash_max = -std::numeric_limits<double>::infinity();
    for (const auto& rg : ranges) {
        rep.psi_min = std::min(rep.psi_min, rg[0]);
        rep.psi_max = std::max(rep.psi_max, rg[1]);
        rep.max_abs_stock_position = std::max(rep.max_abs_stock_position, rg[2]);
        rep.cash_min = std::min(rep.cash_min, rg[3]);
        rep.cash_max = std::max(rep.cash_max, rg[4]);
    }
    return rep;
}

}  // namespace rdsys
