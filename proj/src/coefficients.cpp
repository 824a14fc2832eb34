#include "rdsys/coefficients.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

namespace rdsys {

bool Domain::contains(const Vec& x) const {
    if (x.size() != dim) return false;
    for (int i = 0; i < dim; ++i) {
        if (!std::isfinite(x[i])) return false;
        if (kind == DomainKind::PositiveOrthant && !(x[i] > 0.0)) return false;
    }
    return true;
}

void Domain::check() const {
    if (dim < 1 || dim > kMaxDim) {
        throw ConfigurationError(fmt::format("domain dimension {} outside [1, {}]", dim, kMaxDim));
    }
}

namespace {

// Index i with nodes[i] <= v < nodes[i+1], clamped to the table hull, plus the interpolation weight.
std::pair<size_t, double> bracket(const std::vector<double>& nodes, double v) {
    if (nodes.size() == 1 || v <= nodes.front()) return {0, 0.0};
    if (v >= nodes.back()) return {nodes.size() - 2, 1.0};
    auto it = std::upper_bound(nodes.begin(), nodes.end(), v);
    size_t i = static_cast<size_t>(it - nodes.begin()) - 1;
    return {i, (v - nodes[i]) / (nodes[i + 1] - nodes[i])};
}

}  // namespace

double Table::eval(double t, double x1) const {
    auto [xi, wx] = bracket(x_nodes, x1);
    const size_t nx = x_nodes.size();
    auto row = [&](size_t ti) {
        double a = values[ti * nx + xi];
        if (nx == 1) return a;
        double b = values[ti * nx + xi + 1];
        return a + wx * (b - a);
    };
    auto [ti, wt] = bracket(t_nodes, t);
    double a = row(ti);
    if (t_nodes.size() == 1) return a;
    return a + wt * (row(ti + 1) - a);
}

void Table::check(const std::string& what) const {
    if (t_nodes.empty() || x_nodes.empty()) throw ConfigurationError(what + ": table needs at least one t and x node");
    if (values.size() != t_nodes.size() * x_nodes.size()) {
        throw ConfigurationError(fmt::format("{}: table has {} values, expected {}", what, values.size(),
                                             t_nodes.size() * x_nodes.size()));
    }
    if (!std::is_sorted(t_nodes.begin(), t_nodes.end()) || !std::is_sorted(x_nodes.begin(), x_nodes.end()) ||
        std::adjacent_find(t_nodes.begin(), t_nodes.end()) != t_nodes.end() ||
        std::adjacent_find(x_nodes.begin(), x_nodes.end()) != x_nodes.end()) {
        throw ConfigurationError(what + ": table nodes must be strictly increasing");
    }
}

CoefficientField CoefficientField::constant(std::vector<Mat> per_regime) {
    if (per_regime.empty()) throw ConfigurationError("coefficient field needs at least one regime");
    CoefficientField f;
    f.family_ = CoefficientFamily::Constant;
    f.regimes_ = static_cast<int>(per_regime.size());
    f.rows_ = static_cast<int>(per_regime[0].rows());
    f.cols_ = static_cast<int>(per_regime[0].cols());
    for (const auto& m : per_regime) {
        if (m.rows() != f.rows_ || m.cols() != f.cols_) throw ConfigurationError("coefficient shapes differ across regimes");
    }
    f.base_ = std::move(per_regime);
    return f;
}

CoefficientField CoefficientField::affine(std::vector<Mat> base, std::vector<std::vector<Mat>> slopes) {
    CoefficientField f = constant(std::move(base));
    f.family_ = CoefficientFamily::Affine;
    if (slopes.size() != f.base_.size()) throw ConfigurationError("affine coefficient: slopes needed for every regime");
    for (const auto& per_k : slopes) {
        for (const auto& m : per_k) {
            if (m.rows() != f.rows_ || m.cols() != f.cols_) throw ConfigurationError("affine slope shape mismatch");
        }
    }
    f.slopes_ = std::move(slopes);
    return f;
}

CoefficientField CoefficientField::multiplicative(std::vector<Mat> rates) {
    CoefficientField f = constant(std::move(rates));
    f.family_ = CoefficientFamily::Multiplicative;
    return f;
}

CoefficientField CoefficientField::tabulated(int rows, int cols, std::vector<std::vector<Table>> tables) {
    if (tables.empty()) throw ConfigurationError("coefficient field needs at least one regime");
    CoefficientField f;
    f.family_ = CoefficientFamily::Tabulated;
    f.regimes_ = static_cast<int>(tables.size());
    f.rows_ = rows;
    f.cols_ = cols;
    for (const auto& per_k : tables) {
        if (per_k.size() != static_cast<size_t>(rows * cols)) throw ConfigurationError("tabulated coefficient: one table per entry");
        for (const auto& t : per_k) t.check("tabulated coefficient");
    }
    f.tables_ = std::move(tables);
    return f;
}

CoefficientField CoefficientField::zero(int regimes, int rows, int cols) {
    return constant(std::vector<Mat>(static_cast<size_t>(regimes), Mat::Zero(rows, cols)));
}

bool CoefficientField::is_zero() const {
    if (family_ == CoefficientFamily::Tabulated) {
        for (const auto& per_k : tables_)
            for (const auto& t : per_k)
                for (double v : t.values)
                    if (v != 0.0) return false;
        return true;
    }
    for (const auto& m : base_)
        if (!m.isZero(0.0)) return false;
    for (const auto& per_k : slopes_)
        for (const auto& m : per_k)
            if (!m.isZero(0.0)) return false;
    return true;
}

Mat CoefficientField::eval(double t, const Vec& x, int k) const {
    const auto ku = static_cast<size_t>(k);
    switch (family_) {
        case CoefficientFamily::Constant:
            return base_[ku];
        case CoefficientFamily::Affine: {
            Mat out = base_[ku];
            const auto& s = slopes_[ku];
            for (size_t i = 0; i < s.size() && static_cast<int>(i) < x.size(); ++i) out += x[static_cast<int>(i)] * s[i];
            return out;
        }
        case CoefficientFamily::Multiplicative: {
            Mat out = base_[ku];
            for (int i = 0; i < rows_; ++i) out.row(i) *= x[i];
            return out;
        }
        case CoefficientFamily::Tabulated: {
            Mat out(rows_, cols_);
            const auto& tabs = tables_[ku];
            for (int r = 0; r < rows_; ++r)
                for (int c = 0; c < cols_; ++c) out(r, c) = tabs[static_cast<size_t>(r * cols_ + c)].eval(t, x[0]);
            return out;
        }
    }
    return base_[ku];
}

const char* to_string(CoefficientFamily f) {
    switch (f) {
        case CoefficientFamily::Constant: return "constant";
        case CoefficientFamily::Affine: return "affine";
        case CoefficientFamily::Multiplicative: return "multiplicative";
        case CoefficientFamily::Tabulated: return "tabulated";
    }
    return "constant";
}

CoefficientFamily coefficient_family_from_string(const std::string& s) {
    if (s == "constant") return CoefficientFamily::Constant;
    if (s == "affine") return CoefficientFamily::Affine;
    if (s == "multiplicative") return CoefficientFamily::Multiplicative;
    if (s == "tabulated") return CoefficientFamily::Tabulated;
    throw ConfigurationError("unknown coefficient family '" + s + "'");
}

RateProfile RateProfile::constant(double level) {
    RateProfile p;
    p.family = ProfileFamily::Constant;
    p.level = level;
    return p;
}

RateProfile RateProfile::logistic(double low, double high, double slope, double center) {
    RateProfile p;
    p.family = ProfileFamily::Logistic;
    p.low = low;
    p.high = high;
    p.slope = slope;
    p.center = center;
    return p;
}

double RateProfile::eval(double t, const Vec& x) const {
    switch (family) {
        case ProfileFamily::Constant: return level;
        case ProfileFamily::Logistic: return low + (high - low) / (1.0 + std::exp(slope * (x[0] - center)));
        case ProfileFamily::Tabulated: return table.eval(t, x[0]);
    }
    return level;
}

double RateProfile::upper_bound() const {
    switch (family) {
        case ProfileFamily::Constant: return level;
        case ProfileFamily::Logistic: return std::max(low, high);
        case ProfileFamily::Tabulated: return *std::max_element(table.values.begin(), table.values.end());
    }
    return level;
}

bool RateProfile::depends_on_x() const {
    switch (family) {
        case ProfileFamily::Constant: return false;
        case ProfileFamily::Logistic: return low != high && slope != 0.0;
        case ProfileFamily::Tabulated: return table.x_nodes.size() > 1;
    }
    return false;
}

const char* to_string(ProfileFamily f) {
    switch (f) {
        case ProfileFamily::Constant: return "constant";
        case ProfileFamily::Logistic: return "logistic";
        case ProfileFamily::Tabulated: return "tabulated";
    }
    return "constant";
}

ProfileFamily profile_family_from_string(const std::string& s) {
    if (s == "constant") return ProfileFamily::Constant;
    if (s == "logistic") return ProfileFamily::Logistic;
    if (s == "tabulated") return ProfileFamily::Tabulated;
    throw ConfigurationError("unknown rate profile family '" + s + "'");
}

IntensityMatrix::IntensityMatrix(int regimes, std::vector<IntensityEntry> entries, double bound)
    : regimes_(regimes), bound_(bound), entries_(std::move(entries)), by_source_(static_cast<size_t>(regimes)) {
    if (regimes < 1) throw ConfigurationError("intensity matrix needs at least one regime");
    if (!(bound >= 0.0) || !std::isfinite(bound)) throw ConfigurationError("intensity bound must be finite and >= 0");
    for (size_t e = 0; e < entries_.size(); ++e) {
        const auto& en = entries_[e];
        if (en.from < 0 || en.from >= regimes || en.to < 0 || en.to >= regimes) {
            throw ConfigurationError(fmt::format("intensity channel ({},{}) outside regime range", en.from, en.to));
        }
        if (en.from == en.to) throw ConfigurationError(fmt::format("self-jump channel ({0},{0}) is not allowed", en.from));
        if (!(en.scale >= 0.0)) throw ConfigurationError("intensity scale must be >= 0");
        if (en.profile.family == ProfileFamily::Tabulated) en.profile.table.check("intensity table");
        for (size_t o = 0; o < e; ++o) {
            if (entries_[o].from == en.from && entries_[o].to == en.to) {
                throw ConfigurationError(fmt::format("duplicate intensity channel ({},{})", en.from, en.to));
            }
        }
        by_source_[static_cast<size_t>(en.from)].push_back(static_cast<int>(e));
    }
}

double IntensityMatrix::rate(double t, const Vec& x, int from, int to) const {
    for (int e : by_source_[static_cast<size_t>(from)]) {
        const auto& en = entries_[static_cast<size_t>(e)];
        if (en.to == to) return en.scale * en.profile.eval(t, x);
    }
    return 0.0;
}

bool IntensityMatrix::any_x_dependence() const {
    return std::any_of(entries_.begin(), entries_.end(), [](const IntensityEntry& e) { return e.profile.depends_on_x(); });
}

}  // namespace rdsys
