#include "rdsys/pde.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

namespace rdsys {

const char* to_string(PdeVariant v) {
    switch (v) {
        case PdeVariant::General: return "general";
        case PdeVariant::MarkovTest: return "markov_test";
        case PdeVariant::Hedging: return "hedging";
        case PdeVariant::CrashAtDefault: return "crash_at_default";
    }
    return "general";
}

PdeVariant pde_variant_from_string(const std::string& s) {
    if (s == "general") return PdeVariant::General;
    if (s == "markov_test") return PdeVariant::MarkovTest;
    if (s == "hedging") return PdeVariant::Hedging;
    if (s == "crash_at_default") return PdeVariant::CrashAtDefault;
    throw ConfigurationError("unknown PDE variant '" + s + "'");
}

const char* to_string(Spacing s) { return s == Spacing::Uniform ? "uniform" : "log"; }

Spacing spacing_from_string(const std::string& s) {
    if (s == "uniform") return Spacing::Uniform;
    if (s == "log") return Spacing::Log;
    throw ConfigurationError("unknown spacing '" + s + "'");
}

const char* to_string(BoundaryKind b) { return b == BoundaryKind::Linear ? "linear" : "dirichlet_payoff"; }

BoundaryKind boundary_from_string(const std::string& s) {
    if (s == "linear") return BoundaryKind::Linear;
    if (s == "dirichlet_payoff") return BoundaryKind::DirichletPayoff;
    throw ConfigurationError("unknown boundary kind '" + s + "'");
}

void PdeProblem::check() const {
    model.check();
    claim.check(model);
    const int d = model.dim();
    if (d > 2) throw ConfigurationError("the finite-difference solver supports d <= 2");
    if (static_cast<int>(axes.size()) != d) throw ConfigurationError(fmt::format("PDE grid needs {} axes", d));
    for (const auto& a : axes) {
        if (a.count < 3) throw ConfigurationError("each PDE axis needs at least 3 nodes");
        if (!(a.hi > a.lo)) throw ConfigurationError("PDE axis bounds must satisfy lo < hi");
        if (model.domain.kind == DomainKind::PositiveOrthant && !(a.lo > 0.0)) {
            throw ConfigurationError("positive-orthant domain needs axis lo > 0");
        }
        if (a.spacing == Spacing::Log && !(a.lo > 0.0)) throw ConfigurationError("log spacing needs lo > 0");
    }
    if (!boundary.empty() && static_cast<int>(boundary.size()) != d) throw ConfigurationError("boundary needs one entry per axis");
    if (t_steps < 2) throw ConfigurationError("PDE needs at least 2 time steps");
    if (!(theta >= 0.5 && theta <= 1.0)) throw ConfigurationError("theta must lie in [1/2, 1]");
    if (picard_max < 1) throw ConfigurationError("picard_max must be >= 1");
    if (variant == PdeVariant::CrashAtDefault && !model.crash) {
        throw ConfigurationError("crash_at_default variant needs a model with crash drift");
    }
    if (drift_override && (drift_override->rows() != d || drift_override->cols() != 1 || drift_override->regimes() != model.regimes)) {
        throw ConfigurationError("drift override must be d x 1 per regime");
    }
}

PdeCoefficients pde_coefficients(const PdeProblem& pb) {
    PdeCoefficients co;
    const ModelSpec& model = pb.model;
    const ClaimSpec& claim = pb.claim;
    if (pb.variant == PdeVariant::Hedging) {
        co.drift = [d = model.dim()](double, const Vec&, int) { return Vec(Vec::Zero(d)); };
    } else if (pb.drift_override) {
        co.drift = [f = *pb.drift_override](double t, const Vec& x, int k) { return Vec(f.eval(t, x, k).col(0)); };
    } else {
        co.drift = [&model](double t, const Vec& x, int k) { return model.drift_at(t, x, k); };
    }
    co.diffusion = [&model](double t, const Vec& x, int k) { return model.diffusion_at(t, x, k); };
    switch (pb.variant) {
        case PdeVariant::MarkovTest:
            co.reaction = [&model](double t, const Vec& x, int k, std::span<const double> v) {
                double r = 0.0;
                for (int e : model.intensities.channels_from(k)) {
                    const auto& en = model.intensities.entries()[static_cast<size_t>(e)];
                    r += en.scale * en.profile.eval(t, x) * (v[static_cast<size_t>(en.to)] - v[static_cast<size_t>(k)]);
                }
                return r;
            };
            break;
        case PdeVariant::Hedging:
        case PdeVariant::General:
        case PdeVariant::CrashAtDefault: {
            const bool discount = pb.variant != PdeVariant::Hedging;
            co.reaction = [&model, &claim, discount](double t, const Vec& x, int k, std::span<const double> v) {
                double r = discount ? claim.c(k) * v[static_cast<size_t>(k)] : 0.0;
                if (claim.truncation_active()) {
                    const double kap = kappa_bound(claim, model.horizon, std::clamp(t, 0.0, model.horizon));
                    thread_local std::vector<double> w;
                    w.resize(v.size());
                    for (size_t i = 0; i < v.size(); ++i) w[i] = std::clamp(v[i], -kap, kap);
                    return r + eval_interaction_g(claim, model, t, x, k, w);
                }
                return r + eval_interaction_g(claim, model, t, x, k, v);
            };
            break;
        }
    }
    return co;
}

namespace {

// Tridiagonal stencil of the one-dimensional operator b d/dx + (a/2) d^2/dx^2 along one axis.
struct AxisOperator {
    std::vector<double> lo, mid, up;
};

class DouglasSolver {
public:
    DouglasSolver(const PdeProblem& pb, ValueField& field, PdeDiagnostics& diag)
        : pb_(pb), co_(pdecoeffs(pb)), f_(field), diag_(diag), d_(field.dim()), m_(field.regimes()), nx_(field.space_count()) {
        for (int j = 0; j < d_; ++j) {
            n_.push_back(field.axis(j).size());
            stride_.push_back(j == 0 ? 1 : stride_.back() * n_[static_cast<size_t>(j) - 1]);
        }
        nodes_.reserve(nx_);
        for (std::size_t f = 0; f < nx_; ++f) nodes_.push_back(field.node(f));
        dirichlet_.assign(nx_, 0);
        for (std::size_t f = 0; f < nx_; ++f) {
            for (int j = 0; j < d_; ++j) {
                const auto ju = static_cast<size_t>(j);
                const std::size_t i = (f / stride_[ju]) % n_[ju];
                const auto kinds = pb.boundary.empty() ? std::array{BoundaryKind::Linear, BoundaryKind::Linear} : pb.boundary[ju];
                if ((i == 0 && kinds[0] == BoundaryKind::DirichletPayoff) || (i + 1 == n_[ju] && kinds[1] == BoundaryKind::DirichletPayoff)) {
                    dirichlet_[f] = 1;
                }
            }
        }
        payoff_.assign(static_cast<size_t>(m_) * nx_, 0.0);
        for (int k = 0; k < m_; ++k)
            for (std::size_t f = 0; f < nx_; ++f) payoff_[idx(k, f)] = pb.claim.h(nodes_[f], k);
    }

    // One step from U at t_old back to V at t_new = t_old - dt.
    void step(const std::vector<double>& U, std::vector<double>& V, double t_old, double dt, double theta, long time_index) {
        std::vector<AxisOperator> old_ops, new_ops;
        std::vector<double> mixed_old;
        build(t_old, dt, old_ops, &mixed_old);
        build(t_old - dt, dt, new_ops, nullptr);
        const double t_new = t_old - dt;

        std::vector<double> R_old(U.size());
        reaction(t_old, U, R_old);

        // Explicit predictor without the new-time reaction.
        std::vector<double> E(U.size());
        std::vector<std::vector<double>> AU(static_cast<size_t>(d_), std::vector<double>(U.size()));
        for (int k = 0; k < m_; ++k) {
            for (int j = 0; j < d_; ++j) apply_axis(old_ops[op_index(k, j)], j, U, k, AU[static_cast<size_t>(j)]);
            for (std::size_t f = 0; f < nx_; ++f) {
                const std::size_t i = idx(k, f);
                if (dirichlet_[f]) {
                    E[i] = payoff_[i];
                    continue;
                }
                double acc = 0.0;
                for (int j = 0; j < d_; ++j) acc += AU[static_cast<size_t>(j)][i];
                if (d_ == 2) acc += mixed_apply(mixed_old, U, k, f);
                E[i] = U[i] + dt * acc + dt * (1.0 - theta) * R_old[i];
            }
        }

        std::vector<double> Vp = U, R_new(U.size()), Y(U.size()), rhs(U.size());
        const double scale = std::max(1.0, max_abs(U));
        int p = 0;
        for (;; ++p) {
            if (p >= pb_.picard_max) {
                throw NumericalError(fmt::format("Picard sub-iterations did not converge within {} at t={}", pb_.picard_max, t_new),
                                     time_index);
            }
            reaction(t_new, Vp, R_new);
            for (std::size_t i = 0; i < Y.size(); ++i) Y[i] = dirichlet_[i % nx_] ? E[i] : E[i] + dt * theta * R_new[i];
            for (int j = 0; j < d_; ++j) {
                for (std::size_t i = 0; i < Y.size(); ++i) rhs[i] = dirichlet_[i % nx_] ? Y[i] : Y[i] - theta * dt * AU[static_cast<size_t>(j)][i];
                for (int k = 0; k < m_; ++k) solve_axis(new_ops[op_index(k, j)], j, k, theta * dt, rhs, Y, time_index);
            }
            double diff = 0.0;
            for (std::size_t i = 0; i < Y.size(); ++i) {
                if (!std::isfinite(Y[i])) throw NumericalError(fmt::format("non-finite value at t={}", t_new), time_index);
                diff = std::max(diff, std::abs(Y[i] - Vp[i]));
            }
            Vp.swap(Y);
            if (diff <= pb_.picard_tol * scale) break;
        }
        diag_.picard_max_used = std::max(diag_.picard_max_used, p + 1);
        diag_.picard_total += p + 1;
        V = std::move(Vp);
    }

    std::size_t idx(int k, std::size_t f) const { return static_cast<size_t>(k) * nx_ + f; }

private:
    static PdeCoefficients pdecoeffs(const PdeProblem& pb) { return pde_coefficients(pb); }

    std::size_t op_index(int k, int j) const { return static_cast<size_t>(k) * static_cast<size_t>(d_) + static_cast<size_t>(j); }

    static double max_abs(const std::vector<double>& v) {
        double m = 0.0;
        for (double x : v) m = std::max(m, std::abs(x));
        return m;
    }

    void reaction(double t, const std::vector<double>& U, std::vector<double>& R) const {
        std::vector<double> v(static_cast<size_t>(m_));
        for (std::size_t f = 0; f < nx_; ++f) {
            if (dirichlet_[f]) continue;
            for (int k = 0; k < m_; ++k) v[static_cast<size_t>(k)] = U[idx(k, f)];
            for (int k = 0; k < m_; ++k) R[idx(k, f)] = co_.reaction(t, nodes_[f], k, v);
        }
    }

    void build(double t, double dt, std::vector<AxisOperator>& ops, std::vector<double>* mixed) {
        ops.assign(static_cast<size_t>(m_ * d_), AxisOperator{});
        for (auto& op : ops) {
            op.lo.assign(nx_, 0.0);
            op.mid.assign(nx_, 0.0);
            op.up.assign(nx_, 0.0);
        }
        if (mixed) mixed->assign(static_cast<size_t>(m_) * nx_, 0.0);
        for (int k = 0; k < m_; ++k) {
            for (std::size_t f = 0; f < nx_; ++f) {
                if (dirichlet_[f]) continue;
                const Vec& x = nodes_[f];
                const Vec b = co_.drift(t, x, k);
                const Mat a = co_.diffusion(t, x, k);
                for (int j = 0; j < d_; ++j) {
                    const auto ju = static_cast<size_t>(j);
                    const auto& ax = f_.axis(j);
                    const std::size_t i = (f / stride_[ju]) % n_[ju];
                    AxisOperator& op = ops[op_index(k, j)];
                    const double bj = b[j];
                    const double aj = a(j, j);
                    if (i == 0) {
                        const double h = ax[1] - ax[0];
                        op.mid[f] = -bj / h;
                        op.up[f] = bj / h;
                    } else if (i + 1 == n_[ju]) {
                        const double h = ax[i] - ax[i - 1];
                        op.lo[f] = -bj / h;
                        op.mid[f] = bj / h;
                    } else {
                        const double hm = ax[i] - ax[i - 1];
                        const double hp = ax[i + 1] - ax[i];
                        const double s = hm + hp;
                        op.lo[f] = bj * (-hp / (hm * s)) + aj / (hm * s);
                        op.mid[f] = bj * ((hp - hm) / (hm * hp)) - aj / (hm * hp);
                        op.up[f] = bj * (hm / (hp * s)) + aj / (hp * s);
                        if (aj > 0.0) diag_.max_peclet = std::max(diag_.max_peclet, std::abs(bj) * std::max(hm, hp) / (0.5 * aj));
                        diag_.max_diffusion_number = std::max(diag_.max_diffusion_number, dt * aj / (std::min(hm, hp) * std::min(hm, hp)));
                    }
                }
                if (mixed && d_ == 2) {
                    const std::size_t i0 = f % n_[0];
                    const std::size_t i1 = (f / stride_[1]) % n_[1];
                    if (i0 > 0 && i0 + 1 < n_[0] && i1 > 0 && i1 + 1 < n_[1]) {
                        const auto& x0 = f_.axis(0);
                        const auto& x1 = f_.axis(1);
                        (*mixed)[idx(k, f)] = 0.5 * (a(0, 1) + a(1, 0)) / ((x0[i0 + 1] - x0[i0 - 1]) * (x1[i1 + 1] - x1[i1 - 1]));
                    }
                }
            }
        }
    }

    double mixed_apply(const std::vector<double>& mixed, const std::vector<double>& U, int k, std::size_t f) const {
        const double c = mixed[idx(k, f)];
        if (c == 0.0) return 0.0;
        const std::size_t s1 = stride_[1];
        const std::size_t base = idx(k, 0);
        return c * (U[base + f + 1 + s1] - U[base + f + 1 - s1] - U[base + f - 1 + s1] + U[base + f - 1 - s1]);
    }

    void apply_axis(const AxisOperator& op, int j, const std::vector<double>& U, int k, std::vector<double>& out) const {
        const auto ju = static_cast<size_t>(j);
        const std::size_t s = stride_[ju];
        const std::size_t base = idx(k, 0);
        for (std::size_t f = 0; f < nx_; ++f) {
            const std::size_t i = (f / s) % n_[ju];
            double acc = op.mid[f] * U[base + f];
            if (i > 0) acc += op.lo[f] * U[base + f - s];
            if (i + 1 < n_[ju]) acc += op.up[f] * U[base + f + s];
            out[base + f] = acc;
        }
    }

    // Solves (I - w A_j) Y = rhs on every line of axis j for regime k (Dirichlet rows are identity).
    void solve_axis(const AxisOperator& op, int j, int k, double w, const std::vector<double>& rhs, std::vector<double>& Y,
                    long time_index) const {
        const auto ju = static_cast<size_t>(j);
        const std::size_t s = stride_[ju];
        const std::size_t n = n_[ju];
        const std::size_t base = idx(k, 0);
        std::vector<double> cp(n), dp(n);
        for (std::size_t start = 0; start < nx_; ++start) {
            if ((start / s) % n != 0) continue;
            for (std::size_t i = 0; i < n; ++i) {
                const std::size_t f = start + i * s;
                double a = 0.0, b = 1.0, c = 0.0;
                if (!dirichlet_[f]) {
                    a = -w * op.lo[f];
                    b = 1.0 - w * op.mid[f];
                    c = -w * op.up[f];
                }
                const double denom = i == 0 ? b : b - a * cp[i - 1];
                if (!(std::abs(denom) > 1e-300) || !std::isfinite(denom)) {
                    throw NumericalError(fmt::format("singular implicit solve on axis {} regime {}", j, k), time_index);
                }
                cp[i] = c / denom;
                dp[i] = (rhs[base + f] - (i == 0 ? 0.0 : a * dp[i - 1])) / denom;
            }
            for (std::size_t i = n; i-- > 0;) {
                const std::size_t f = start + i * s;
                Y[base + f] = i + 1 == n ? dp[i] : dp[i] - cp[i] * Y[base + f + s];
            }
        }
    }

    const PdeProblem& pb_;
    PdeCoefficients co_;
    ValueField& f_;
    PdeDiagnostics& diag_;
    int d_;
    int m_;
    std::size_t nx_;
    std::vector<std::size_t> n_;
    std::vector<std::size_t> stride_;
    std::vector<Vec> nodes_;
    std::vector<unsigned char> dirichlet_;
    std::vector<double> payoff_;
};

}  // namespace

PdeResult solve_system(const PdeProblem& pb) {
    pb.check();
    std::vector<std::vector<double>> xg;
    for (const auto& a : pb.axes) xg.push_back(make_axis(a.lo, a.hi, a.count, a.spacing == Spacing::Log));
    const double T = pb.model.horizon;
    std::vector<double> tg(static_cast<size_t>(pb.t_steps) + 1);
    for (int i = 0; i <= pb.t_steps; ++i) tg[static_cast<size_t>(i)] = T * i / pb.t_steps;
    tg.back() = T;

    PdeResult res{ValueField(tg, xg, pb.model.regimes), {}};
    ValueField& field = res.value;
    PdeDiagnostics& diag = res.diagnostics;
    diag.time_steps = static_cast<size_t>(pb.t_steps);
    diag.nodes = field.space_count();
    diag.scheme = pb.model.dim() == 1 ? "crank_nicolson" : "douglas_adi";
    if (pb.rannacher) diag.scheme += "+rannacher";
    for (int j = 0; j < pb.model.dim(); ++j) {
        const auto kinds = pb.boundary.empty() ? std::array{BoundaryKind::Linear, BoundaryKind::Linear} : pb.boundary[static_cast<size_t>(j)];
        diag.boundary.push_back(fmt::format("axis{}:{}/{}", j, to_string(kinds[0]), to_string(kinds[1])));
    }

    DouglasSolver solver(pb, field, diag);
    const int m = pb.model.regimes;
    const std::size_t nx = field.space_count();
    const std::size_t N = tg.size() - 1;
    std::vector<double> U(static_cast<size_t>(m) * nx), V;
    for (int k = 0; k < m; ++k)
        for (std::size_t f = 0; f < nx; ++f) U[solver.idx(k, f)] = pb.claim.h(field.node(f), k);

    auto store = [&](std::size_t ti, const std::vector<double>& W) {
        for (int k = 0; k < m; ++k) std::copy_n(W.begin() + static_cast<long>(solver.idx(k, 0)), nx, field.layer(ti, k).begin());
    };
    store(N, U);
    std::size_t n = N;
    if (pb.rannacher) {
        for (int s = 0; s < 2 && n > 0; ++s, --n) {
            const double dt = tg[n] - tg[n - 1];
            solver.step(U, V, tg[n], 0.5 * dt, 1.0, static_cast<long>(n - 1));
            U.swap(V);
            solver.step(U, V, tg[n] - 0.5 * dt, 0.5 * dt, 1.0, static_cast<long>(n - 1));
            U.swap(V);
            store(n - 1, U);
        }
    }
    for (; n > 0; --n) {
        solver.step(U, V, tg[n], tg[n] - tg[n - 1], pb.theta, static_cast<long>(n - 1));
        U.swap(V);
        store(n - 1, U);
    }
    return res;
}

}  // namespace rdsys
