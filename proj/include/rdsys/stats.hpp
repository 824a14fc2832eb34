#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

namespace rdsys {

using Rng = std::mt19937_64;

// Independent stream keyed by (seed, key...): the same key always yields the same sequence,
// whatever order or thread the stream is created on.
Rng make_stream(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0);

// Pairwise (cascade) summation; the result depends only on the input order.
double pairwise_sum(std::span<const double> xs);

struct Estimate {
    double mean = 0.0;
    double se = 0.0;  // standard error of the mean
    double sd = 0.0;
    std::size_t n = 0;
};

Estimate estimate(std::span<const double> xs);
// Mean and standard error of a - b for paired samples.
Estimate paired_difference(std::span<const double> a, std::span<const double> b);

// Runs body(i) for i in [0, n) across hardware threads in contiguous chunks.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace rdsys
