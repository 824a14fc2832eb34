#pragma once

#include "rdsys/types.hpp"

#include <optional>
#include <string>
#include <vector>

namespace rdsys {

enum class DomainKind { PositiveOrthant, FullSpace };

struct Domain {
    DomainKind kind = DomainKind::PositiveOrthant;
    int dim = 1;

    bool contains(const Vec& x) const;
    void check() const;
};

// Piecewise-linear table over (t, x^1). A single time node means time-independent.
struct Table {
    std::vector<double> t_nodes;
    std::vector<double> x_nodes;
    // values[ti * x_nodes.size() + xi]
    std::vector<double> values;

    double eval(double t, double x1) const;
    void check(const std::string& what) const;
};

enum class CoefficientFamily { Constant, Affine, Multiplicative, Tabulated };

// Matrix-valued coefficient (t, x, k) -> rows x cols drawn from a closed parametric family.
//   constant:        base_k
//   affine:          base_k + sum_i x^i slope_{k,i}
//   multiplicative:  diag(x) base_k    (Black-Scholes style, positive orthant only)
//   tabulated:       entry (r,c) read from table_{k,r,c}(t, x^1)
class CoefficientField {
public:
    CoefficientField() = default;

    static CoefficientField constant(std::vector<Mat> per_regime);
    static CoefficientField affine(std::vector<Mat> base, std::vector<std::vector<Mat>> slopes);
    static CoefficientField multiplicative(std::vector<Mat> rates);
    static CoefficientField tabulated(int rows, int cols, std::vector<std::vector<Table>> tables);
    static CoefficientField zero(int regimes, int rows, int cols);

    Mat eval(double t, const Vec& x, int k) const;

    CoefficientFamily family() const { return family_; }
    int regimes() const { return regimes_; }
    int rows() const { return rows_; }
    int cols() const { return cols_; }
    bool is_zero() const;

    const std::vector<Mat>& base() const { return base_; }
    const std::vector<std::vector<Mat>>& slopes() const { return slopes_; }
    const std::vector<std::vector<Table>>& tables() const { return tables_; }

private:
    CoefficientFamily family_ = CoefficientFamily::Constant;
    int regimes_ = 0;
    int rows_ = 0;
    int cols_ = 0;
    std::vector<Mat> base_;
    std::vector<std::vector<Mat>> slopes_;
    // tables_[k][r * cols + c]
    std::vector<std::vector<Table>> tables_;
};

const char* to_string(CoefficientFamily f);
CoefficientFamily coefficient_family_from_string(const std::string& s);

enum class ProfileFamily { Constant, Logistic, Tabulated };

// Scalar non-negative rate profile in (t, x).
//   constant:  level
//   logistic:  low + (high - low) / (1 + exp(slope * (x^1 - center)))
//   tabulated: table(t, x^1)
struct RateProfile {
    ProfileFamily family = ProfileFamily::Constant;
    double level = 0.0;
    double low = 0.0;
    double high = 0.0;
    double slope = 0.0;
    double center = 0.0;
    Table table;

    static RateProfile constant(double level);
    static RateProfile logistic(double low, double high, double slope, double center);

    double eval(double t, const Vec& x) const;
    double upper_bound() const;
    bool depends_on_x() const;
};

const char* to_string(ProfileFamily f);
ProfileFamily profile_family_from_string(const std::string& s);

// lambda^{kj}(t, x) = scale * profile(t, x) on declared channels; undeclared channels are identically 0.
struct IntensityEntry {
    int from = 0;
    int to = 0;
    double scale = 1.0;
    RateProfile profile;
};

class IntensityMatrix {
public:
    IntensityMatrix() = default;
    IntensityMatrix(int regimes, std::vector<IntensityEntry> entries, double bound);

    int regimes() const { return regimes_; }
    double bound() const { return bound_; }
    const std::vector<IntensityEntry>& entries() const { return entries_; }

    double rate(double t, const Vec& x, int from, int to) const;
    // Indices into entries() of the channels leaving regime k.
    const std::vector<int>& channels_from(int k) const { return by_source_[static_cast<size_t>(k)]; }
    bool any_x_dependence() const;
    bool is_zero() const { return entries_.empty(); }

private:
    int regimes_ = 0;
    double bound_ = 0.0;
    std::vector<IntensityEntry> entries_;
    std::vector<std::vector<int>> by_source_;
};

}  // namespace rdsys
