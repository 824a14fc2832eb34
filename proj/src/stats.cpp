#include "rdsys/stats.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <thread>

namespace rdsys {

Rng make_stream(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint64_t c) {
    auto lo = [](std::uint64_t v) { return static_cast<std::uint32_t>(v & 0xffffffffULL); };
    auto hi = [](std::uint64_t v) { return static_cast<std::uint32_t>(v >> 32); };
    std::seed_seq seq{lo(seed), hi(seed), lo(a), hi(a), lo(b), hi(b), lo(c), hi(c)};
    return Rng(seq);
}

double pairwise_sum(std::span<const double> xs) {
    if (xs.size() <= 16) {
        double s = 0.0;
        for (double x : xs) s += x;
        return s;
    }
    const std::size_t half = xs.size() / 2;
    return pairwise_sum(xs.first(half)) + pairwise_sum(xs.subspan(half));
}

Estimate estimate(std::span<const double> xs) {
    Estimate e;
    e.n = xs.size();
    if (xs.empty()) return e;
    e.mean = pairwise_sum(xs) / static_cast<double>(xs.size());
    if (xs.size() < 2) return e;
    std::vector<double> sq(xs.size());
    std::transform(xs.begin(), xs.end(), sq.begin(), [&](double x) { return (x - e.mean) * (x - e.mean); });
    e.sd = std::sqrt(pairwise_sum(sq) / static_cast<double>(xs.size() - 1));
    e.se = e.sd / std::sqrt(static_cast<double>(xs.size()));
    return e;
}

Estimate paired_difference(std::span<const double> a, std::span<const double> b) {
    std::vector<double> d(std::min(a.size(), b.size()));
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = a[i] - b[i];
    return estimate(d);
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body) {
    const std::size_t workers = std::min<std::size_t>(std::max(1u, std::thread::hardware_concurrency()), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> pool;
    const std::size_t chunk = (n + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (std::size_t i = w * chunk; i < std::min(n, (w + 1) * chunk); ++i) body(i);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

}  // namespace rdsys
