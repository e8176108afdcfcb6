#pragma once

#include <stdexcept>
#include <string>

namespace cwfa {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A parameter value violates its domain (non-positive variance, bad code...).
class InvalidParameter : public Error {
 public:
  using Error::Error;
};

/// Input data or arguments are malformed (empty dataset, q > p, bad label...).
class InvalidInput : public Error {
 public:
  using Error::Error;
};

/// The q x q inner matrix of a low-rank covariance could not be factorized.
class DegenerateCovariance : public Error {
 public:
  using Error::Error;
};

/// A component lost (almost) all of its members during fitting.
class DegenerateComponent : public Error {
 public:
  DegenerateComponent(int component, int iteration, double count)
      : Error("degenerate component " + std::to_string(component + 1) +
              " at iteration " + std::to_string(iteration) +
              " (expected size " + std::to_string(count) + ")"),
        component_(component),
        iteration_(iteration) {}

  int component() const noexcept { return component_; }
  int iteration() const noexcept { return iteration_; }

 private:
  int component_;
  int iteration_;
};

/// The weighted second-moment matrix of the covariates is singular.
class SingularRegression : public Error {
 public:
  explicit SingularRegression(int component)
      : Error("singular regression design in component " +
              std::to_string(component + 1)),
        component_(component) {}

  int component() const noexcept { return component_; }

 private:
  int component_;
};

/// The root (most constrained) model of the initialization hierarchy failed.
class FamilyInitError : public Error {
 public:
  using Error::Error;
};

/// Every fit of a grid search failed.
class SearchFailed : public Error {
 public:
  using Error::Error;
};

}  // namespace cwfa
