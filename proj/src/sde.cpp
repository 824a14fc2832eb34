#include "rdsys/sde.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>

namespace rdsys {

namespace {

constexpr std::uint64_t kTagFrozen = 0xf002e9ULL;
constexpr std::uint64_t kTagMarket = 0x3a28e7ULL;
constexpr double kWeightFloor = std::numeric_limits<double>::min();

void require_finite_state(const Vec& x, long step) {
    for (int i = 0; i < x.size(); ++i) {
        if (!std::isfinite(x[i])) throw SimulationError(fmt::format("state component {} became {} ", i, x[i]), step);
    }
}

// Per-path simulation state shared by both constructions.
class MarketStepper {
public:
    MarketStepper(const ModelSpec& model, Scheme scheme, bool record_brownian, Rng& rng)
        : model_(model), scheme_(scheme), record_(record_brownian), rng_(rng), r_(model.brownian_dim) {}

    // Moves S from u to v in regime k, accumulating the Brownian increment into dw.
    bool advance(double u, double v, Vec& s, int k, Vec& dw, long step) {
        const double dt = v - u;
        if (dt <= 0.0) return true;
        Vec z(r_);
        const double sq = std::sqrt(dt);
        for (int i = 0; i < r_; ++i) z[i] = sq * normal_(rng_);
        if (record_) dw += z;
        const bool inside = step_diffusion(model_, u, dt, s, k, z, scheme_);
        require_finite_state(s, step);
        return inside;
    }

    double exponential(double rate) { return std::exponential_distribution<double>(rate)(rng_); }
    double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(rng_); }
    std::size_t pick(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng_); }

private:
    const ModelSpec& model_;
    Scheme scheme_;
    bool record_;
    Rng& rng_;
    int r_;
    std::normal_distribution<double> normal_;
};

double channel_rate(const ModelSpec& model, int e, double t, const Vec& s) {
    const auto& en = model.intensities.entries()[static_cast<size_t>(e)];
    const double lam = en.scale * en.profile.eval(t, s);
    if (!std::isfinite(lam) || lam < 0.0) {
        throw ModelDefinitionError(fmt::format("intensity ({},{}) evaluates to {} at t={}", en.from, en.to, lam, t));
    }
    return lam;
}

// Adds the trapezoid of lambda over [u, v] for every channel leaving k.
void add_compensators(const ModelSpec& model, MarketPath& p, int k, double u, const Vec& su, double v, const Vec& sv) {
    const double dt = v - u;
    if (dt <= 0.0) return;
    for (int e : model.intensities.channels_from(k)) {
        p.channel_compensators[static_cast<size_t>(e)] += 0.5 * dt * (channel_rate(model, e, u, su) + channel_rate(model, e, v, sv));
    }
}

void store_state(MarketPath& p, std::size_t i, const Vec& s, int k) {
    const int d = static_cast<int>(s.size());
    for (int j = 0; j < d; ++j) p.s[i * static_cast<size_t>(d) + static_cast<size_t>(j)] = s[j];
    p.regime[i] = k;
}

void freeze_rest(MarketPath& p, std::size_t from, const Vec& s, int k) {
    const std::size_t n = p.regime.size();
    for (std::size_t i = from; i < n; ++i) store_state(p, i, s, k);
    for (std::size_t i = from; i < p.jump_offsets.size(); ++i) p.jump_offsets[i] = p.jumps.size();
    if (!p.weight.empty())
        for (std::size_t i = from; i < n; ++i) p.weight[i] = p.weight[from - 1];
}

}  // namespace

const char* to_string(Scheme s) { return s == Scheme::Euler ? "euler" : "log-euler"; }

Scheme scheme_from_string(const std::string& s) {
    if (s == "euler") return Scheme::Euler;
    if (s == "log-euler" || s == "log_euler") return Scheme::LogEuler;
    throw ConfigurationError("unknown scheme '" + s + "'");
}

const char* to_string(Construction c) { return c == Construction::Pasting ? "pasting" : "reweight"; }

bool step_diffusion(const ModelSpec& model, double t, double dt, Vec& x, int k, const Vec& dW, Scheme scheme) {
    const Vec g = model.drift_at(t, x, k);
    const Mat s = model.vol_at(t, x, k);
    if (scheme == Scheme::Euler) {
        x += g * dt + s * dW;
        return model.domain.contains(x);
    }
    if (model.domain.kind != DomainKind::PositiveOrthant) {
        throw ConfigurationError("log-euler scheme requires the positive-orthant domain");
    }
    for (int i = 0; i < x.size(); ++i) {
        const double xi = x[i];
        const double gi = g[i] / xi;
        double var = 0.0;
        double shock = 0.0;
        for (int j = 0; j < s.cols(); ++j) {
            const double sij = s(i, j) / xi;
            var += sij * sij;
            shock += sij * dW[j];
        }
        x[i] = xi * std::exp((gi - 0.5 * var) * dt + shock);
    }
    return model.domain.contains(x);
}

Vec FrozenPath::at(std::size_t i) const {
    const int d = static_cast<int>(x0.size());
    Vec x(d);
    for (int j = 0; j < d; ++j) x[j] = x_path[i * static_cast<size_t>(d) + static_cast<size_t>(j)];
    return x;
}

std::vector<double> uniform_grid(double t0, double t1, int steps) {
    if (steps < 1) throw UsageError("time grid needs at least one step");
    if (!(t1 > t0)) throw UsageError(fmt::format("time grid [{}, {}] is empty", t0, t1));
    std::vector<double> g(static_cast<size_t>(steps) + 1);
    for (int i = 0; i <= steps; ++i) g[static_cast<size_t>(i)] = t0 + (t1 - t0) * i / steps;
    g.back() = t1;
    return g;
}

FrozenPath simulate_frozen(const ModelSpec& model, double t, const Vec& x, int k, int steps, Scheme scheme,
                           std::uint64_t seed) {
    if (steps < 1) throw UsageError("simulate_frozen needs at least one step");
    if (k < 0 || k >= model.regimes) throw UsageError("simulate_frozen: regime out of range");
    if (!model.domain.contains(x)) throw UsageError("simulate_frozen: start point outside the domain");
    FrozenPath p;
    p.t0 = t;
    p.x0 = x;
    p.k = k;
    p.time_grid = uniform_grid(t, model.horizon, steps);
    const int d = model.dim();
    p.x_path.resize((static_cast<size_t>(steps) + 1) * static_cast<size_t>(d));
    Rng rng = make_stream(seed, kTagFrozen, static_cast<std::uint64_t>(k));
    std::normal_distribution<double> normal;
    Vec cur = x;
    Vec dw(model.brownian_dim);
    for (int i = 0; i <= steps; ++i) {
        if (i > 0 && !p.exit_flag) {
            const double dt = p.time_grid[static_cast<size_t>(i)] - p.time_grid[static_cast<size_t>(i) - 1];
            for (int j = 0; j < model.brownian_dim; ++j) dw[j] = std::sqrt(dt) * normal(rng);
            if (!step_diffusion(model, p.time_grid[static_cast<size_t>(i) - 1], dt, cur, k, dw, scheme)) p.exit_flag = true;
            require_finite_state(cur, i);
        }
        for (int j = 0; j < d; ++j) p.x_path[static_cast<size_t>(i * d + j)] = cur[j];
    }
    return p;
}

Vec MarketPath::s_at(std::size_t i, int d) const {
    Vec x(d);
    for (int j = 0; j < d; ++j) x[j] = s[i * static_cast<size_t>(d) + static_cast<size_t>(j)];
    return x;
}

double PathBundle::exclusion_fraction() const {
    if (paths.empty()) return 0.0;
    return static_cast<double>(exited) / static_cast<double>(paths.size());
}

MarketPath simulate_market_path(const ModelSpec& model, const Vec& s0, int k0, const std::vector<double>& grid,
                                Construction construction, Scheme scheme, bool record_brownian, Rng& rng) {
    if (k0 < 0 || k0 >= model.regimes) throw UsageError("market path: start regime out of range");
    if (!model.domain.contains(s0)) throw UsageError("market path: start point outside the domain");
    const int d = model.dim();
    const int r = model.brownian_dim;
    const std::size_t n = grid.size() - 1;
    const auto& entries = model.intensities.entries();
    const double lam_max = model.intensities.bound();

    MarketPath p;
    p.s.assign((n + 1) * static_cast<size_t>(d), 0.0);
    p.regime.assign(n + 1, k0);
    p.jump_offsets.assign(n + 1, 0);
    p.channel_counts.assign(entries.size(), 0.0);
    p.channel_compensators.assign(entries.size(), 0.0);
    if (record_brownian) p.dW.assign(n * static_cast<size_t>(r), 0.0);
    const bool reweight = construction == Construction::Reweight;
    if (reweight) p.weight.assign(n + 1, 1.0);

    MarketStepper stepper(model, scheme, record_brownian, rng);
    Vec s = s0;
    int k = k0;
    double log_w = 0.0;
    store_state(p, 0, s, k);

    // All declared channels tick at unit rate under the reference measure.
    const double reweight_rate = static_cast<double>(entries.size());
    std::vector<int> all_channels(entries.size());
    for (std::size_t e = 0; e < entries.size(); ++e) all_channels[e] = static_cast<int>(e);

    auto excess_rate = [&](double t, const Vec& x) {
        double acc = 0.0;
        for (std::size_t e = 0; e < entries.size(); ++e) acc += channel_rate(model, static_cast<int>(e), t, x) - 1.0;
        return acc;
    };

    for (std::size_t i = 0; i < n; ++i) {
        const double t_end = grid[i + 1];
        double u = grid[i];
        Vec dw = Vec::Zero(r);
        p.jump_offsets[i] = p.jumps.size();
        while (true) {
            const auto& channels = reweight ? all_channels : model.intensities.channels_from(k);
            const double rate = reweight ? reweight_rate : lam_max * static_cast<double>(channels.size());
            const double tau = rate > 0.0 ? u + stepper.exponential(rate) : std::numeric_limits<double>::infinity();
            const double v = std::min(tau, t_end);
            const Vec s_u = s;
            const double excess_u = reweight ? excess_rate(u, s_u) : 0.0;
            const bool inside = stepper.advance(u, v, s, k, dw, static_cast<long>(i));
            add_compensators(model, p, k, u, s_u, v, s);
            if (reweight) log_w -= 0.5 * (v - u) * (excess_u + excess_rate(v, s));
            if (!inside) {
                p.exited = true;
                if (record_brownian)
                    for (int j = 0; j < r; ++j) p.dW[i * static_cast<size_t>(r) + static_cast<size_t>(j)] = dw[j];
                store_state(p, i + 1, s, k);
                if (reweight) p.weight[i + 1] = std::exp(log_w);
                freeze_rest(p, i + 2, s, k);
                p.jump_offsets[i + 1] = p.jumps.size();
                return p;
            }
            u = v;
            if (tau >= t_end) break;
            const int e = channels[stepper.pick(channels.size())];
            const auto& en = entries[static_cast<size_t>(e)];
            const double lam = channel_rate(model, e, tau, s);
            bool jump = false;
            if (reweight) {
                log_w += std::log(lam);
                jump = en.from == k;
            } else {
                if (lam > lam_max * (1.0 + 1e-12)) {
                    throw ModelDefinitionError(
                        fmt::format("thinning bound violated: lambda({},{}) = {} > {} at t={}", en.from, en.to, lam, lam_max, tau));
                }
                jump = stepper.uniform() * lam_max < lam;
            }
            if (jump) {
                p.jumps.push_back({tau, k, en.to, e, s});
                p.channel_counts[static_cast<size_t>(e)] += 1.0;
                k = en.to;
            }
        }
        if (record_brownian)
            for (int j = 0; j < r; ++j) p.dW[i * static_cast<size_t>(r) + static_cast<size_t>(j)] = dw[j];
        store_state(p, i + 1, s, k);
        if (reweight) {
            const double w = std::exp(log_w);
            if (!(w >= kWeightFloor)) p.weight_degenerate = true;
            p.weight[i + 1] = w;
        }
    }
    p.jump_offsets[n] = p.jumps.size();
    return p;
}

std::size_t for_each_market_path(const ModelSpec& model, const Vec& s0, int k0, const MarketSimConfig& cfg,
                                 Construction construction,
                                 const std::function<void(std::size_t, const MarketPath&)>& visit) {
    model.check();
    const auto grid = uniform_grid(cfg.t0, model.horizon, cfg.steps);
    std::vector<unsigned char> exited(cfg.paths, 0);
    parallel_for(cfg.paths, [&](std::size_t i) {
        Rng rng = make_stream(cfg.seed, kTagMarket, static_cast<std::uint64_t>(construction), i);
        MarketPath p = simulate_market_path(model, s0, k0, grid, construction, cfg.scheme, cfg.record_brownian, rng);
        exited[i] = p.exited ? 1 : 0;
        visit(i, p);
    });
    std::size_t count = 0;
    for (auto e : exited) count += e;
    if (cfg.paths > 0 && static_cast<double>(count) > cfg.max_exit_fraction * static_cast<double>(cfg.paths)) {
        throw SimulationError(fmt::format("{} of {} paths left the domain (limit {:.3g}%)", count, cfg.paths,
                                          100.0 * cfg.max_exit_fraction),
                              -1);
    }
    return count;
}

namespace {

PathBundle simulate_bundle(const ModelSpec& model, const Vec& s0, int k0, const MarketSimConfig& cfg, Construction c) {
    PathBundle b;
    b.time_grid = uniform_grid(cfg.t0, model.horizon, cfg.steps);
    b.dim = model.dim();
    b.brownian_dim = model.brownian_dim;
    b.construction = c;
    b.weighted = c == Construction::Reweight;
    b.has_brownian = cfg.record_brownian;
    b.seed = cfg.seed;
    b.paths.resize(cfg.paths);
    b.exited = for_each_market_path(model, s0, k0, cfg, c, [&](std::size_t i, const MarketPath& p) { b.paths[i] = p; });
    for (const auto& p : b.paths) b.weight_degenerate += p.weight_degenerate ? 1 : 0;
    return b;
}

}  // namespace

PathBundle simulate_market_pasting(const ModelSpec& model, const Vec& s0, int k0, const MarketSimConfig& cfg) {
    return simulate_bundle(model, s0, k0, cfg, Construction::Pasting);
}

PathBundle simulate_market_reweight(const ModelSpec& model, const Vec& s0, int k0, const MarketSimConfig& cfg) {
    return simulate_bundle(model, s0, k0, cfg, Construction::Reweight);
}

PathBundle girsanov_to_minimal_elmm(const ModelSpec& model, PathBundle bundle) {
    if (!bundle.has_brownian) throw UsageError("girsanov_to_minimal_elmm: bundle carries no Brownian increments");
    const int d = bundle.dim;
    const int r = bundle.brownian_dim;
    const std::size_t n = bundle.time_grid.size() - 1;
    parallel_for(bundle.paths.size(), [&](std::size_t pi) {
        MarketPath& p = bundle.paths[pi];
        if (p.weight.empty()) p.weight.assign(n + 1, 1.0);
        double log_z = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double t = bundle.time_grid[i];
            const double dt = bundle.time_grid[i + 1] - t;
            const Vec x = p.s_at(i, d);
            const auto phi = model.market_price_of_risk(t, x, p.regime[i]);
            if (!phi) throw ModelDefinitionError(fmt::format("market price of risk undefined at t={} (singular diffusion)", t));
            double dot = 0.0;
            for (int j = 0; j < r; ++j) dot += (*phi)[j] * p.dW[i * static_cast<size_t>(r) + static_cast<size_t>(j)];
            log_z += -dot - 0.5 * phi->squaredNorm() * dt;
            p.weight[i + 1] *= std::exp(log_z);
            if (!(p.weight[i + 1] >= kWeightFloor)) p.weight_degenerate = true;
        }
    });
    bundle.weighted = true;
    bundle.minimal_measure = true;
    bundle.weight_degenerate = 0;
    for (const auto& p : bundle.paths) bundle.weight_degenerate += p.weight_degenerate ? 1 : 0;
    return bundle;
}

PathBundle simulate_minimal_elmm(const ModelSpec& model, const Vec& s0, int k0, const MarketSimConfig& cfg) {
    PathBundle b = simulate_market_pasting(model.without_drift(), s0, k0, cfg);
    b.minimal_measure = true;
    return b;
}

std::vector<PathPiece> step_pieces(const MarketPath& path, const std::vector<double>& grid, int d, std::size_t i) {
    std::vector<PathPiece> out;
    double u = grid[i];
    Vec su = path.s_at(i, d);
    int k = path.regime[i];
    for (std::size_t j = path.jump_offsets[i]; j < path.jump_offsets[i + 1]; ++j) {
        const JumpEvent& e = path.jumps[j];
        out.push_back({u, e.time, su, e.s, k, &e});
        u = e.time;
        su = e.s;
        k = e.to;
    }
    out.push_back({u, grid[i + 1], su, path.s_at(i + 1, d), k, nullptr});
    return out;
}

double step_integral(const MarketPath& path, const std::vector<double>& grid, int d, std::size_t i,
                     const std::function<double(double, const Vec&, int)>& fn) {
    double acc = 0.0;
    for (const auto& p : step_pieces(path, grid, d, i)) acc += 0.5 * (p.t1 - p.t0) * (fn(p.t0, p.s0, p.k) + fn(p.t1, p.s1, p.k));
    return acc;
}

Estimate weighted_estimate(const PathBundle& bundle, const std::function<double(const MarketPath&)>& phi) {
    std::vector<double> xs;
    xs.reserve(bundle.paths.size());
    for (const auto& p : bundle.paths) {
        if (!p.usable()) continue;
        const double w = bundle.weighted ? p.terminal_weight() : 1.0;
        xs.push_back(w == 0.0 ? 0.0 : w * phi(p));
    }
    if (xs.empty()) throw EstimationError("no usable paths in bundle");
    return estimate(xs);
}

}  // namespace rdsys
