#pragma once

#include <stdexcept>
#include <string>

namespace cqed {

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A parameter or configuration value failed validation. `field()` names it.
class ValidationError : public Error {
 public:
  explicit ValidationError(std::string field, const std::string& what = {})
      : Error(what.empty() ? "invalid value for '" + field + "'" : what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// The Fock-space truncation holds too much population in its top level.
class CutoffTooSmall : public Error {
 public:
  CutoffTooSmall(double coupling, int cutoff, double top_population)
      : Error("Fock cutoff " + std::to_string(cutoff) + " too small at g=" + std::to_string(coupling) +
              " (top-level population " + std::to_string(top_population) + ")"),
        coupling_(coupling), cutoff_(cutoff), top_population_(top_population) {}
  double coupling() const noexcept { return coupling_; }
  int cutoff() const noexcept { return cutoff_; }
  double top_population() const noexcept { return top_population_; }

 private:
  double coupling_;
  int cutoff_;
  double top_population_;
};

class SolveFailure : public Error {
 public:
  using Error::Error;
};

class SingularLiouvillian : public Error {
 public:
  using Error::Error;
};

class OutOfRange : public Error {
 public:
  using Error::Error;
};

class NoTransit : public Error {
 public:
  NoTransit() : Error("signal never distinguishable from the empty-cavity level") {}
};

class EmptyEnsemble : public Error {
 public:
  EmptyEnsemble() : Error("no valid samples in ensemble") {}
};

class SignalTooShort : public Error {
 public:
  using Error::Error;
};

}  // namespace cqed
