#pragma once

#include "rdsys/types.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace rdsys {

// v(t, x, k) on a tensor grid: times x per-axis spatial nodes x regimes.
// Storage is [ti][k][flat], flat index with axis 0 fastest.
class ValueField {
public:
    ValueField() = default;
    ValueField(std::vector<double> t_grid, std::vector<std::vector<double>> x_grid, int regimes);

    const std::vector<double>& t_grid() const { return t_; }
    const std::vector<std::vector<double>>& x_grid() const { return x_; }
    const std::vector<double>& axis(int i) const { return x_[static_cast<std::size_t>(i)]; }
    int dim() const { return static_cast<int>(x_.size()); }
    int regimes() const { return m_; }
    std::size_t time_count() const { return t_.size(); }
    std::size_t space_count() const { return nx_; }
    std::size_t size() const { return values_.size(); }

    std::size_t flat_index(std::span<const int> idx) const;
    void unflatten(std::size_t flat, std::span<int> idx) const;
    Vec node(std::size_t flat) const;

    double& at(std::size_t ti, int k, std::size_t flat) { return values_[offset(ti, k) + flat]; }
    double at(std::size_t ti, int k, std::size_t flat) const { return values_[offset(ti, k) + flat]; }
    std::span<double> layer(std::size_t ti, int k) { return {values_.data() + offset(ti, k), nx_}; }
    std::span<const double> layer(std::size_t ti, int k) const { return {values_.data() + offset(ti, k), nx_}; }
    std::span<const double> values() const { return values_; }

    bool same_grid(const ValueField& other) const;
    bool inside_hull(const Vec& x) const;

    // Multilinear in x (clamped to the hull), linear in t. Increments *extrapolation_hits when x is
    // clamped.
    double interpolate(double t, const Vec& x, int k, std::size_t* extrapolation_hits = nullptr) const;
    double interpolate_layer(std::size_t ti, const Vec& x, int k) const;
    // All regime layers at time node ti; returns true when x was clamped to the hull.
    bool interpolate_regimes(std::size_t ti, const Vec& x, std::span<double> out) const;
    // Gradient in x: nodal central differences on the nonuniform grid, interpolated like the values.
    Vec gradient(double t, const Vec& x, int k) const;
    Vec gradient_layer(std::size_t ti, const Vec& x, int k) const;

    // Second derivatives: nodal three-point stencils (mixed terms from the nodal gradient), interpolated.
    Mat hessian(double t, const Vec& x, int k) const;
    Mat hessian_layer(std::size_t ti, const Vec& x, int k) const;

    double max_abs() const;

private:
    std::size_t offset(std::size_t ti, int k) const { return (ti * static_cast<std::size_t>(m_) + static_cast<std::size_t>(k)) * nx_; }
    double nodal_derivative(std::size_t ti, int k, std::size_t flat, int axis) const;
    double nodal_second(std::size_t ti, int k, std::size_t flat, int i, int j) const;
    // Per axis: lower node index and weight of the clamped location of x.
    bool locate(const Vec& x, int* lo, double* w) const;
    template <class F>
    double multilinear(const Vec& x, F&& node_value) const;

    std::vector<double> t_;
    std::vector<std::vector<double>> x_;
    std::vector<std::size_t> stride_;
    int m_ = 0;
    std::size_t nx_ = 0;
    std::vector<double> values_;
};

// max over nodes of exp(-beta (T - t)) * max_k |v - w|.
double beta_norm(const ValueField& v, const ValueField& w, double beta);

// Node of the argmax in beta_norm: (ti, k, flat).
struct NodeRef {
    std::size_t ti = 0;
    int k = 0;
    std::size_t flat = 0;
};
NodeRef beta_norm_argmax(const ValueField& v, const ValueField& w, double beta);

// 0 <= i < n nodes on [lo, hi], uniform or geometric.
std::vector<double> make_axis(double lo, double hi, int count, bool log_spacing);

}  // namespace rdsys
