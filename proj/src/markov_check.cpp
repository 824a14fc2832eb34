#include "rdsys/markov_check.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

namespace rdsys {

namespace {

constexpr std::uint64_t kTagRestart = 0x5e57a7ULL;
constexpr std::uint64_t kTagOuter = 0x0de7ULL;

bool within(const Estimate& e, double se_mult) { return std::abs(e.mean) <= se_mult * e.se; }

std::vector<std::size_t> check_indices(std::size_t n, int count) {
    std::vector<std::size_t> idx;
    for (int c = 1; c <= count; ++c) {
        const auto i = static_cast<std::size_t>(std::llround(static_cast<double>(c) * static_cast<double>(n) / count));
        idx.push_back(std::clamp<std::size_t>(i, 1, n));
    }
    return idx;
}

}  // namespace

double TestFunction::operator()(const Vec& x, int k) const {
    const double r2 = (x - center).squaredNorm() / (radius * radius);
    if (r2 >= 1.0) return 0.0;
    const double b = 1.0 - r2;
    return regime_weight[static_cast<size_t>(k)] * b * b * b;
}

std::vector<TestFunction> default_test_functions(const ModelSpec& model, const Vec& s0) {
    const int m = model.regimes;
    const auto mu = static_cast<size_t>(m);
    auto weights = [&](auto&& fn) {
        std::vector<double> w(mu);
        for (int k = 0; k < m; ++k) w[static_cast<size_t>(k)] = fn(k);
        return w;
    };
    const double scale = std::max(1.0, s0.cwiseAbs().maxCoeff());
    std::vector<TestFunction> out;
    out.push_back({"bump_centre_uniform", s0, 0.6 * scale, weights([](int) { return 1.0; })});
    out.push_back({"bump_centre_first_regime", s0, 0.4 * scale, weights([](int k) { return k == 0 ? 1.0 : 0.0; })});
    out.push_back({"bump_up_alternating", (s0.array() + 0.2 * scale).matrix(), 0.5 * scale,
                   weights([](int k) { return k % 2 == 0 ? 1.0 : -0.5; })});
    out.push_back({"bump_down_ramp", (s0.array() - 0.15 * scale).matrix(), 0.45 * scale,
                   weights([m](int k) { return 1.0 + static_cast<double>(k) / m; })});
    out.push_back({"bump_wide_last_regime", s0, 0.9 * scale, weights([m](int k) { return k == m - 1 ? 2.0 : 0.5; })});
    if (model.domain.kind == DomainKind::PositiveOrthant) {
        for (auto& f : out) f.center = f.center.cwiseMax(1e-3);
    }
    return out;
}

MartingaleReport martingale_check(const ModelSpec& model, const Vec& s0, int k0, const std::vector<TestFunction>& tests,
                                  const MartingaleCheckConfig& cfg) {
    if (cfg.check_times < 1) throw UsageError("martingale_check needs at least one check time");
    const int d = model.dim();
    const auto grid = uniform_grid(0.0, model.horizon, cfg.steps);
    const std::size_t n = grid.size() - 1;
    const auto idx = check_indices(n, cfg.check_times);
    const std::size_t nf = tests.size();
    const std::size_t nc = idx.size();
    const std::size_t nch = model.intensities.entries().size();
    // Per path: [test][check] compensated values, then per-channel compensated counters.
    const std::size_t stride = nf * nc + nch;
    std::vector<double> data(cfg.paths * stride, 0.0);
    std::vector<double> weights(cfg.paths, 1.0);
    std::vector<unsigned char> usable(cfg.paths, 0);

    MarketSimConfig sc;
    sc.steps = cfg.steps;
    sc.paths = cfg.paths;
    sc.seed = cfg.seed;
    sc.scheme = cfg.scheme;
    sc.record_brownian = false;
    MartingaleReport rep;
    rep.exited = for_each_market_path(model, s0, k0, sc, cfg.construction, [&](std::size_t pi, const MarketPath& p) {
        if (!p.usable()) return;
        usable[pi] = 1;
        weights[pi] = p.terminal_weight();
        double* row = data.data() + pi * stride;
        for (std::size_t fi = 0; fi < nf; ++fi) {
            const TestFunction& f = tests[fi];
            auto gen = [&](double t, const Vec& x, int k) { return apply_generator(model, f, t, x, k); };
            const double f0 = f(p.s_at(0, d), p.regime[0]);
            double integral = 0.0;
            std::size_t next = 0;
            for (std::size_t i = 0; i < n && next < nc; ++i) {
                integral += step_integral(p, grid, d, i, gen);
                if (i + 1 == idx[next]) {
                    row[fi * nc + next] = f(p.s_at(i + 1, d), p.regime[i + 1]) - f0 - integral;
                    ++next;
                }
            }
        }
        for (std::size_t e = 0; e < nch; ++e) row[nf * nc + e] = p.channel_counts[e] - p.channel_compensators[e];
    });

    const bool weighted = cfg.construction == Construction::Reweight;
    auto column = [&](std::size_t col) {
        std::vector<double> xs;
        xs.reserve(cfg.paths);
        for (std::size_t pi = 0; pi < cfg.paths; ++pi) {
            if (!usable[pi]) continue;
            const double w = weighted ? weights[pi] : 1.0;
            xs.push_back(w == 0.0 ? 0.0 : w * data[pi * stride + col]);
        }
        return estimate(xs);
    };
    rep.passed = true;
    for (std::size_t fi = 0; fi < nf; ++fi) {
        for (std::size_t c = 0; c < nc; ++c) {
            MartingaleCheckPoint pt{tests[fi].name, grid[idx[c]], column(fi * nc + c), false};
            pt.passed = within(pt.estimate, cfg.se_mult) || (pt.estimate.se == 0.0 && std::abs(pt.estimate.mean) < 1e-12);
            rep.passed = rep.passed && pt.passed;
            rep.generator.push_back(std::move(pt));
        }
    }
    for (std::size_t e = 0; e < nch; ++e) {
        const auto& en = model.intensities.entries()[e];
        MartingaleCheckPoint pt{fmt::format("M^{}{}", en.from, en.to), model.horizon, column(nf * nc + e), false};
        pt.passed = within(pt.estimate, cfg.se_mult) || (pt.estimate.se == 0.0 && std::abs(pt.estimate.mean) < 1e-12);
        rep.passed = rep.passed && pt.passed;
        rep.counters.push_back(std::move(pt));
    }
    return rep;
}

MarkovReport markov_property_check(const ModelSpec& model, const ClaimSpec& terminal_claim, double t_prime, const Vec& s0,
                                   int k0, const MarkovCheckConfig& cfg) {
    if (!(t_prime > 0.0 && t_prime <= model.horizon)) throw UsageError("markov_property_check: T' must lie in (0, T]");
    if (cfg.outer < 2 || cfg.inner < 1) throw UsageError("markov_property_check needs outer >= 2 and inner >= 1");
    ModelSpec mdl = model;
    mdl.horizon = t_prime;
    const int d = mdl.dim();

    PdeProblem pb;
    pb.model = mdl;
    pb.claim = terminal_claim;
    pb.variant = PdeVariant::MarkovTest;
    pb.axes.assign(static_cast<size_t>(d), cfg.axis);
    pb.t_steps = cfg.pde_t_steps;
    MarkovReport rep;
    rep.value = solve_system(pb).value;
    const ValueField& v = rep.value;
    rep.v0 = v.interpolate(0.0, s0, k0);

    const auto grid = uniform_grid(0.0, t_prime, cfg.steps);
    const std::size_t n = grid.size() - 1;
    std::vector<std::size_t> idx;
    for (double fr : cfg.check_fractions) {
        if (!(fr > 0.0 && fr < 1.0)) throw UsageError("markov check fractions must lie in (0, 1)");
        idx.push_back(std::clamp<std::size_t>(static_cast<std::size_t>(std::llround(fr * static_cast<double>(n))), 1, n - 1));
    }
    const std::size_t nc = idx.size();
    std::vector<double> gaps(cfg.outer * nc, 0.0), incs(cfg.outer * nc, 0.0);
    std::vector<unsigned char> lost(cfg.outer, 0);
    parallel_for(cfg.outer, [&](std::size_t oi) {
        Rng rng = make_stream(cfg.seed, kTagOuter, oi);
        const MarketPath p = simulate_market_path(mdl, s0, k0, grid, Construction::Pasting, cfg.scheme, false, rng);
        if (p.exited) {
            lost[oi] = 1;
            return;
        }
        for (std::size_t c = 0; c < nc; ++c) {
            const std::size_t i = idx[c];
            const Vec x = p.s_at(i, d);
            const int k = p.regime[i];
            const double vt = v.interpolate(grid[i], x, k);
            const std::vector<double> sub(grid.begin() + static_cast<std::ptrdiff_t>(i), grid.end());
            std::vector<double> hs;
            hs.reserve(cfg.inner);
            for (std::size_t ii = 0; ii < cfg.inner; ++ii) {
                Rng r2 = make_stream(cfg.seed, kTagRestart, oi * nc + c, ii);
                const MarketPath q = simulate_market_path(mdl, x, k, sub, Construction::Pasting, cfg.scheme, false, r2);
                if (q.exited) continue;
                hs.push_back(terminal_claim.h(q.s_at(sub.size() - 1, d), q.regime.back()));
            }
            if (hs.empty()) {
                lost[oi] = 1;
                return;
            }
            gaps[oi * nc + c] = estimate(hs).mean - vt;
            incs[oi * nc + c] = vt - rep.v0;
        }
    });
    std::size_t n_lost = 0;
    for (auto l : lost) n_lost += l;
    if (static_cast<double>(n_lost) > 1e-3 * static_cast<double>(cfg.outer) && n_lost > 0) {
        throw SimulationError(fmt::format("markov check: {} of {} outer paths left the domain", n_lost, cfg.outer), -1);
    }
    rep.passed = true;
    for (std::size_t c = 0; c < nc; ++c) {
        std::vector<double> g, in;
        for (std::size_t oi = 0; oi < cfg.outer; ++oi) {
            if (lost[oi]) continue;
            g.push_back(gaps[oi * nc + c]);
            in.push_back(incs[oi * nc + c]);
        }
        MarkovCheckPoint pt;
        pt.t = grid[idx[c]];
        pt.restart_gap = estimate(g);
        pt.increment = estimate(in);
        const double floor = 1e-6 * std::max(1.0, std::abs(rep.v0));
        pt.passed = std::abs(pt.restart_gap.mean) <= cfg.se_mult * pt.restart_gap.se + floor &&
                    std::abs(pt.increment.mean) <= cfg.se_mult * pt.increment.se + floor;
        rep.passed = rep.passed && pt.passed;
        rep.points.push_back(pt);
    }
    return rep;
}

}  // namespace rdsys
