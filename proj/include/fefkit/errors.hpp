#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace fefkit {

/// Base class for all toolkit errors.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Inconsistent matrix or signal dimensions.
class DimensionError : public Error {
  public:
    using Error::Error;
};

/// A numerical routine produced non-finite values or lost definiteness.
class NumericError : public Error {
  public:
    using Error::Error;
};

/// Least-squares regressor is rank deficient (and no ridge was requested).
class IllConditionedRegression : public Error {
  public:
    IllConditionedRegression(const std::string& msg, double condition)
        : Error(msg), condition_(condition) {}
    double condition() const { return condition_; }

  private:
    double condition_;
};

/// Riccati iteration failed to converge to a stabilizing solution.
class NoStabilizingSolution : public Error {
  public:
    using Error::Error;
};

/// Hankel realization produced a numerically singular normal equation.
class RealizationDegenerate : public Error {
  public:
    RealizationDegenerate(const std::string& msg, double condition)
        : Error(msg), condition_(condition) {}
    double condition() const { return condition_; }

  private:
    double condition_;
};

/// Gain design left the filter unstable.
class DesignFailed : public Error {
  public:
    using Error::Error;
};

/// All fault Markov parameters are below the detection threshold.
class ZeroFaultSubsystem : public Error {
  public:
    using Error::Error;
};

/// The leading fault Markov parameter is column-rank deficient.
class AssumptionViolated : public Error {
  public:
    using Error::Error;
};

/// A simulation or filter state left the finite range.
class DivergenceError : public Error {
  public:
    DivergenceError(const std::string& msg, std::ptrdiff_t sample)
        : Error(msg), sample_(sample) {}
    std::ptrdiff_t sample() const { return sample_; }

  private:
    std::ptrdiff_t sample_;
};

}  // namespace fefkit
