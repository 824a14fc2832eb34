#include "rdsys/pde.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

namespace rdsys {

double apply_generator(const ModelSpec& model, const std::function<double(const Vec&, int)>& f, double t, const Vec& x, int k,
                       double h) {
    if (k < 0 || k >= model.regimes) throw UsageError(fmt::format("apply_generator: regime {} out of range", k));
    if (x.size() != model.dim()) throw UsageError("apply_generator: state dimension differs from model");
    if (!model.domain.contains(x)) throw UsageError("apply_generator: state outside the domain");
    if (!(h > 0.0)) throw UsageError("apply_generator: step must be positive");
    const int d = model.dim();
    Vec step(d);
    for (int i = 0; i < d; ++i) {
        double hi = h * std::max(1.0, std::abs(x[i]));
        if (model.domain.kind == DomainKind::PositiveOrthant) hi = std::min(hi, 0.5 * x[i]);
        step[i] = hi;
    }
    const double f0 = f(x, k);
    auto shifted = [&](int i, double si, int j, double sj) {
        Vec y = x;
        y[i] += si;
        if (j >= 0) y[j] += sj;
        return f(y, k);
    };
    Vec grad(d);
    Mat hess(d, d);
    for (int i = 0; i < d; ++i) {
        const double fp = shifted(i, step[i], -1, 0.0);
        const double fm = shifted(i, -step[i], -1, 0.0);
        grad[i] = (fp - fm) / (2.0 * step[i]);
        hess(i, i) = (fp - 2.0 * f0 + fm) / (step[i] * step[i]);
    }
    for (int i = 0; i < d; ++i) {
        for (int j = i + 1; j < d; ++j) {
            const double fpp = shifted(i, step[i], j, step[j]);
            const double fpm = shifted(i, step[i], j, -step[j]);
            const double fmp = shifted(i, -step[i], j, step[j]);
            const double fmm = shifted(i, -step[i], j, -step[j]);
            hess(i, j) = hess(j, i) = (fpp - fpm - fmp + fmm) / (4.0 * step[i] * step[j]);
        }
    }
    const Vec b = model.drift_at(t, x, k);
    const Mat a = model.diffusion_at(t, x, k);
    double out = b.dot(grad);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) out += 0.5 * a(i, j) * hess(i, j);
    for (int e : model.intensities.channels_from(k)) {
        const auto& en = model.intensities.entries()[static_cast<size_t>(e)];
        const double lam = en.scale * en.profile.eval(t, x);
        if (lam != 0.0) out += lam * (f(x, en.to) - f0);
    }
    return out;
}

}  // namespace rdsys
