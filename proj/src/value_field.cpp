#include "rdsys/value_field.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

namespace rdsys {

namespace {

// Index i with nodes[i] <= x <= nodes[i+1] (clamped) and the weight of nodes[i+1].
std::pair<int, double> bracket(const std::vector<double>& nodes, double x, bool* clamped) {
    const int n = static_cast<int>(nodes.size());
    if (n == 1) return {0, 0.0};
    if (x <= nodes.front()) {
        if (x < nodes.front()) *clamped = true;
        return {0, 0.0};
    }
    if (x >= nodes.back()) {
        if (x > nodes.back()) *clamped = true;
        return {n - 2, 1.0};
    }
    const auto it = std::upper_bound(nodes.begin(), nodes.end(), x);
    const int i = static_cast<int>(it - nodes.begin()) - 1;
    const double w = (x - nodes[static_cast<size_t>(i)]) / (nodes[static_cast<size_t>(i) + 1] - nodes[static_cast<size_t>(i)]);
    return {i, w};
}

}  // namespace

ValueField::ValueField(std::vector<double> t_grid, std::vector<std::vector<double>> x_grid, int regimes)
    : t_(std::move(t_grid)), x_(std::move(x_grid)), m_(regimes) {
    if (t_.empty()) throw UsageError("value field needs at least one time node");
    if (x_.empty() || static_cast<int>(x_.size()) > kMaxDim) throw UsageError("value field needs 1..4 spatial axes");
    if (regimes < 1) throw UsageError("value field needs at least one regime");
    if (!std::is_sorted(t_.begin(), t_.end()) || std::adjacent_find(t_.begin(), t_.end()) != t_.end()) {
        throw UsageError("time grid must be strictly increasing");
    }
    nx_ = 1;
    for (const auto& ax : x_) {
        if (ax.empty()) throw UsageError("spatial axis is empty");
        for (size_t i = 1; i < ax.size(); ++i)
            if (!(ax[i] > ax[i - 1])) throw UsageError("spatial axis must be strictly increasing");
        stride_.push_back(nx_);
        nx_ *= ax.size();
    }
    values_.assign(t_.size() * static_cast<size_t>(m_) * nx_, 0.0);
}

std::size_t ValueField::flat_index(std::span<const int> idx) const {
    std::size_t f = 0;
    for (size_t i = 0; i < x_.size(); ++i) f += static_cast<size_t>(idx[i]) * stride_[i];
    return f;
}

void ValueField::unflatten(std::size_t flat, std::span<int> idx) const {
    for (size_t i = 0; i < x_.size(); ++i) {
        idx[i] = static_cast<int>(flat % x_[i].size());
        flat /= x_[i].size();
    }
}

Vec ValueField::node(std::size_t flat) const {
    Vec x(dim());
    for (size_t i = 0; i < x_.size(); ++i) {
        x[static_cast<int>(i)] = x_[i][flat % x_[i].size()];
        flat /= x_[i].size();
    }
    return x;
}

bool ValueField::same_grid(const ValueField& o) const { return t_ == o.t_ && x_ == o.x_ && m_ == o.m_; }

bool ValueField::inside_hull(const Vec& x) const {
    for (size_t i = 0; i < x_.size(); ++i) {
        const double xi = x[static_cast<int>(i)];
        if (xi < x_[i].front() || xi > x_[i].back()) return false;
    }
    return true;
}

bool ValueField::locate(const Vec& x, int* lo, double* w) const {
    bool clamped = false;
    for (size_t i = 0; i < x_.size(); ++i) {
        auto [j, wi] = bracket(x_[i], x[static_cast<int>(i)], &clamped);
        lo[i] = j;
        w[i] = wi;
    }
    return clamped;
}

template <class F>
double ValueField::multilinear(const Vec& x, F&& node_value) const {
    int lo[kMaxDim];
    double w[kMaxDim];
    locate(x, lo, w);
    const int d = dim();
    // Corner c has bit i set for the upper node on axis i; each pass folds the lowest remaining axis
    // with a + w (b - a), which reproduces constant data exactly.
    double partial[1 << kMaxDim];
    const int corners = 1 << d;
    for (int c = 0; c < corners; ++c) {
        std::size_t f = 0;
        for (int i = 0; i < d; ++i) {
            const int hi = (c >> i) & 1;
            const int j = std::min<int>(lo[i] + hi, static_cast<int>(x_[static_cast<size_t>(i)].size()) - 1);
            f += static_cast<size_t>(j) * stride_[static_cast<size_t>(i)];
        }
        partial[c] = node_value(f);
    }
    for (int i = 0; i < d; ++i) {
        const int half = 1 << (d - i - 1);
        for (int c = 0; c < half; ++c) {
            const double a = partial[2 * c];
            const double b = partial[2 * c + 1];
            partial[c] = a + w[i] * (b - a);
        }
    }
    return partial[0];
}

double ValueField::interpolate_layer(std::size_t ti, const Vec& x, int k) const {
    const size_t base = offset(ti, k);
    return multilinear(x, [&](std::size_t f) { return values_[base + f]; });
}

bool ValueField::interpolate_regimes(std::size_t ti, const Vec& x, std::span<double> out) const {
    int lo[kMaxDim];
    double w[kMaxDim];
    const bool clamped = locate(x, lo, w);
    const int d = dim();
    const int corners = 1 << d;
    std::size_t corner_flat[1 << kMaxDim];
    for (int c = 0; c < corners; ++c) {
        std::size_t f = 0;
        for (int i = 0; i < d; ++i) {
            const int j = std::min<int>(lo[i] + ((c >> i) & 1), static_cast<int>(x_[static_cast<size_t>(i)].size()) - 1);
            f += static_cast<size_t>(j) * stride_[static_cast<size_t>(i)];
        }
        corner_flat[c] = f;
    }
    for (int k = 0; k < m_; ++k) {
        const double* base = values_.data() + offset(ti, k);
        double partial[1 << kMaxDim];
        for (int c = 0; c < corners; ++c) partial[c] = base[corner_flat[c]];
        for (int i = 0; i < d; ++i) {
            for (int c = 0; c < (1 << (d - i - 1)); ++c) partial[c] = partial[2 * c] + w[i] * (partial[2 * c + 1] - partial[2 * c]);
        }
        out[static_cast<size_t>(k)] = partial[0];
    }
    return clamped;
}

double ValueField::interpolate(double t, const Vec& x, int k, std::size_t* extrapolation_hits) const {
    if (extrapolation_hits) {
        int lo[kMaxDim];
        double w[kMaxDim];
        if (locate(x, lo, w)) ++*extrapolation_hits;
    }
    bool clamped = false;
    auto [ti, wt] = bracket(t_, t, &clamped);
    const double a = interpolate_layer(static_cast<size_t>(ti), x, k);
    if (t_.size() == 1 || wt == 0.0) return a;
    const double b = interpolate_layer(static_cast<size_t>(ti) + 1, x, k);
    return a + wt * (b - a);
}

double ValueField::nodal_derivative(std::size_t ti, int k, std::size_t flat, int axis) const {
    const auto ax = static_cast<size_t>(axis);
    const auto& nodes = x_[ax];
    const size_t n = nodes.size();
    if (n < 2) return 0.0;
    const size_t j = (flat / stride_[ax]) % n;
    const size_t base = offset(ti, k);
    const size_t s = stride_[ax];
    if (j == 0) return (values_[base + flat + s] - values_[base + flat]) / (nodes[1] - nodes[0]);
    if (j == n - 1) return (values_[base + flat] - values_[base + flat - s]) / (nodes[n - 1] - nodes[n - 2]);
    const double hm = nodes[j] - nodes[j - 1];
    const double hp = nodes[j + 1] - nodes[j];
    const double um = values_[base + flat - s];
    const double u0 = values_[base + flat];
    const double up = values_[base + flat + s];
    return (-hp / (hm * (hm + hp))) * um + ((hp - hm) / (hm * hp)) * u0 + (hm / (hp * (hm + hp))) * up;
}

Vec ValueField::gradient_layer(std::size_t ti, const Vec& x, int k) const {
    Vec g(dim());
    for (int i = 0; i < dim(); ++i) {
        g[i] = multilinear(x, [&](std::size_t f) { return nodal_derivative(ti, k, f, i); });
    }
    return g;
}

Vec ValueField::gradient(double t, const Vec& x, int k) const {
    bool clamped = false;
    auto [ti, wt] = bracket(t_, t, &clamped);
    Vec a = gradient_layer(static_cast<size_t>(ti), x, k);
    if (t_.size() == 1 || wt == 0.0) return a;
    Vec b = gradient_layer(static_cast<size_t>(ti) + 1, x, k);
    return a + wt * (b - a);
}

double ValueField::nodal_second(std::size_t ti, int k, std::size_t flat, int i, int j) const {
    const auto iu = static_cast<size_t>(i);
    const auto& nodes = x_[iu];
    const size_t n = nodes.size();
    if (n < 3) return 0.0;
    size_t idx = (flat / stride_[iu]) % n;
    const size_t s = stride_[iu];
    if (i != j) {
        // Central difference along axis i of the nodal derivative along axis j.
        const size_t lo = idx == 0 ? flat : flat - s;
        const size_t hi = idx + 1 == n ? flat : flat + s;
        const double dx = nodes[idx + 1 == n ? idx : idx + 1] - nodes[idx == 0 ? idx : idx - 1];
        return (nodal_derivative(ti, k, hi, j) - nodal_derivative(ti, k, lo, j)) / dx;
    }
    // Boundary nodes reuse the stencil of their interior neighbour.
    if (idx == 0) {
        flat += s;
        idx = 1;
    } else if (idx + 1 == n) {
        flat -= s;
        idx = n - 2;
    }
    const size_t base = offset(ti, k);
    const double hm = nodes[idx] - nodes[idx - 1];
    const double hp = nodes[idx + 1] - nodes[idx];
    return 2.0 * (values_[base + flat - s] / (hm * (hm + hp)) - values_[base + flat] / (hm * hp) +
                  values_[base + flat + s] / (hp * (hm + hp)));
}

Mat ValueField::hessian_layer(std::size_t ti, const Vec& x, int k) const {
    const int d = dim();
    Mat h(d, d);
    for (int i = 0; i < d; ++i) {
        for (int j = i; j < d; ++j) {
            h(i, j) = multilinear(x, [&](std::size_t f) { return nodal_second(ti, k, f, i, j); });
            h(j, i) = h(i, j);
        }
    }
    return h;
}

Mat ValueField::hessian(double t, const Vec& x, int k) const {
    bool clamped = false;
    auto [ti, wt] = bracket(t_, t, &clamped);
    Mat a = hessian_layer(static_cast<size_t>(ti), x, k);
    if (t_.size() == 1 || wt == 0.0) return a;
    Mat b = hessian_layer(static_cast<size_t>(ti) + 1, x, k);
    return a + wt * (b - a);
}

double ValueField::max_abs() const {
    double m = 0.0;
    for (double v : values_) m = std::max(m, std::abs(v));
    return m;
}

NodeRef beta_norm_argmax(const ValueField& v, const ValueField& w, double beta) {
    if (!v.same_grid(w)) throw UsageError("beta_norm: value fields live on different grids");
    const double T = v.t_grid().back();
    NodeRef best;
    double worst = -1.0;
    for (size_t ti = 0; ti < v.time_count(); ++ti) {
        const double weight = std::exp(-beta * (T - v.t_grid()[ti]));
        for (int k = 0; k < v.regimes(); ++k) {
            auto a = v.layer(ti, k);
            auto b = w.layer(ti, k);
            for (size_t f = 0; f < a.size(); ++f) {
                const double d = weight * std::abs(a[f] - b[f]);
                if (d > worst) {
                    worst = d;
                    best = {ti, k, f};
                }
            }
        }
    }
    return best;
}

double beta_norm(const ValueField& v, const ValueField& w, double beta) {
    const NodeRef n = beta_norm_argmax(v, w, beta);
    const double T = v.t_grid().back();
    return std::exp(-beta * (T - v.t_grid()[n.ti])) * std::abs(v.at(n.ti, n.k, n.flat) - w.at(n.ti, n.k, n.flat));
}

std::vector<double> make_axis(double lo, double hi, int count, bool log_spacing) {
    if (count < 1) throw UsageError("axis needs at least one node");
    if (count == 1) return {lo};
    if (!(hi > lo)) throw UsageError(fmt::format("axis bounds [{}, {}] are not increasing", lo, hi));
    if (log_spacing && !(lo > 0.0)) throw UsageError("log-spaced axis needs lo > 0");
    std::vector<double> a(static_cast<size_t>(count));
    for (int i = 0; i < count; ++i) {
        const double u = static_cast<double>(i) / (count - 1);
        a[static_cast<size_t>(i)] = log_spacing ? lo * std::exp(u * std::log(hi / lo)) : lo + u * (hi - lo);
    }
    a.front() = lo;
    a.back() = hi;
    return a;
}

}  // namespace rdsys
