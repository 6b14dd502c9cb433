#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace rna {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed arguments: dimension mismatch, out-of-range index, bad config.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

/// The regularized Gram system could not be factorized, even after jitter.
class SingularSystem : public Error {
 public:
  using Error::Error;
};

/// 1^T z vanished while normalizing the extrapolation weights.
class DegenerateNormalization : public Error {
 public:
  using Error::Error;
};

/// Every grid-search candidate (safeguard included) had a non-finite objective.
class AllCandidatesInvalid : public Error {
 public:
  using Error::Error;
};

/// A bound was evaluated outside its domain (e.g. a negative radicand).
class InvalidRegime : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Outcome of an iterative run. Divergence is reported, not thrown, so callers
/// can keep the partial trace.
enum class RunStatus { kOk, kDiverged };

inline const char* to_string(RunStatus status) {
  return status == RunStatus::kOk ? "ok" : "diverged";
}

/// Iterates with a non-finite entry or norm above 1e15 count as divergence.
inline bool is_diverged(const Vector& x) {
  constexpr double kDivergenceNorm = 1e15;
  if (!x.allFinite()) return true;
  return x.norm() > kDivergenceNorm;
}

}  // namespace rna
