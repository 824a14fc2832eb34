#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace rdsys {

// Fixed-capacity storage keeps the per-step evaluations in the simulators off the heap.
inline constexpr int kMaxDim = 4;

using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxDim, 1>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxDim, kMaxDim>;

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Caller passed inconsistent arguments (empty grids, mismatched shapes, t outside [0,T]).
class UsageError : public Error {
public:
    using Error::Error;
};

// A coefficient or payoff function produced an invalid value.
class ModelDefinitionError : public Error {
public:
    using Error::Error;
};

// Parameters are individually valid but the combination is not supported.
class ConfigurationError : public Error {
public:
    using Error::Error;
};

class SimulationError : public Error {
public:
    SimulationError(const std::string& what, long step) : Error(what), step_(step) {}
    long step() const { return step_; }

private:
    long step_;
};

class EstimationError : public Error {
public:
    using Error::Error;
};

class NumericalError : public Error {
public:
    NumericalError(const std::string& what, long time_index) : Error(what), time_index_(time_index) {}
    long time_index() const { return time_index_; }

private:
    long time_index_;
};

// Market completion breaks down: the traded default-sensitive security has no default sensitivity.
class DegeneracyError : public Error {
public:
    using Error::Error;
};

}  // namespace rdsys
