#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "rna/common.hpp"

namespace rna {

/// Ordered optimizer states x~_0 ... x~_{k+1}, stored column-wise.
class IterateWindow {
 public:
  /// Requires at least two points, all of the same dimension.
  explicit IterateWindow(std::span<const Vector> points);
  explicit IterateWindow(Matrix columns);

  /// k, so that the window holds k + 2 points.
  int k() const { return static_cast<int>(points_.cols()) - 2; }
  Eigen::Index dimension() const { return points_.rows(); }
  Eigen::Index size() const { return points_.cols(); }

  auto point(Eigen::Index i) const { return points_.col(i); }
  auto last() const { return points_.col(points_.cols() - 1); }
  const Matrix& columns() const { return points_; }

  /// Same window shifted by a constant vector.
  IterateWindow translated(const Vector& shift) const;

 private:
  Matrix points_;
};

/// Residuals r~_i = x~_{i+1} - x~_i as a d x (k+1) matrix.
using ResidualMatrix = Matrix;

struct CoefficientVector {
  Vector weights;
  double lambda_used = 0.0;
};

/// How a relative grid value becomes an absolute regularization.
enum class LambdaScale {
  /// lambda = value * ||R~||_F^2
  kFrobeniusSquared,
  /// lambda = ||R~^T R~||_2 / value (literal reading of the SGD experiment's
  /// "||R^T R|| / 1e-6")
  kLegacyInverse,
};

/// Relative regularization values, strictly positive and sorted descending.
class LambdaGrid {
 public:
  explicit LambdaGrid(std::vector<double> relative_values,
                      LambdaScale scale = LambdaScale::kFrobeniusSquared);

  /// {1, 1e-1, ..., 1e-(size-1)}.
  static LambdaGrid geometric(int size);
  static LambdaGrid single(double relative_value,
                           LambdaScale scale = LambdaScale::kFrobeniusSquared) {
    return LambdaGrid({relative_value}, scale);
  }

  const std::vector<double>& relative_values() const { return values_; }
  std::size_t size() const { return values_.size(); }
  LambdaScale scale() const { return scale_; }

  double absolute(double relative_value, const ResidualMatrix& residuals) const;

 private:
  std::vector<double> values_;
  LambdaScale scale_;
};

ResidualMatrix compute_residuals(const IterateWindow& window);

/// ||R~||_F^2, the scale that relative lambda values multiply.
double residual_scale(const ResidualMatrix& residuals);

/// Solves (R~^T R~ + lambda I) z = 1 by Cholesky and returns z / 1^T z.
/// A failed factorization is retried once with jitter 1e-12 * trace / (k+1).
CoefficientVector solve_coefficients(const ResidualMatrix& residuals, double lambda);

/// sum_i c_i x~_i over the first k+1 points of the window.
Vector extrapolate(const IterateWindow& window, const CoefficientVector& coeffs);

/// Full extrapolation step. A window whose residuals are all zero returns x~_0.
Vector rna(const IterateWindow& window, double lambda);

using ObjectiveFn = std::function<double(const Vector&)>;

struct GridSearchResult {
  Vector point;
  /// Absolute lambda of the chosen candidate; 0 when the safeguard won.
  double lambda = 0.0;
  bool safeguard_chosen = false;
  double objective = 0.0;
  /// One entry per grid value, in grid order, then the safeguard x~_{k+1}.
  std::vector<double> candidate_objectives;
};

/// Evaluates the objective at every extrapolated candidate and at the last
/// iterate; returns the minimizer. The last iterate only wins on a strict
/// improvement.
GridSearchResult grid_search_lambda(const IterateWindow& window, const LambdaGrid& grid,
                                    const ObjectiveFn& objective);

/// Anything that produces a stream of snapshots and can be restarted. The
/// optimizers in rna/optimizers.hpp implement it.
class SnapshotSource {
 public:
  virtual ~SnapshotSource() = default;

  /// Resume from x. Method-specific state (momentum, tables) is reset.
  virtual void restart(const Vector& x) = 0;
  /// Advance to the next snapshot; false once the iterate diverged.
  virtual bool advance() = 0;
  virtual const Vector& current() const = 0;
  /// Cumulative data queries since construction.
  virtual std::int64_t queries() const = 0;
  /// Data queries one full pass of the objective costs (N for finite sums).
  virtual std::int64_t pass_queries() const = 0;
};

struct RestartOptions {
  int k = 10;
  LambdaGrid grid = LambdaGrid::geometric(10);
  /// Total data-query budget, grid-search passes included.
  std::int64_t budget = 0;
  /// Queries charged per grid search; negative means one pass of the source.
  std::int64_t evaluation_queries = -1;
};

/// One observation emitted while a restart loop runs.
struct LoopSample {
  std::int64_t queries = 0;
  const Vector* point = nullptr;
  bool is_restart = false;
};

struct RestartRecord {
  std::int64_t queries = 0;
  double lambda = 0.0;
  double objective = 0.0;
  bool safeguard_chosen = false;
  Vector point;
};

struct RestartTrace {
  std::vector<RestartRecord> restarts;
  RunStatus status = RunStatus::kOk;
  std::int64_t queries = 0;
};

/// Collects k+1 snapshots after the current point, extrapolates the k+2 window
/// by grid search, restarts the source from the result, and repeats until the
/// next window would exceed the budget.
RestartTrace restart_loop(SnapshotSource& source, const RestartOptions& options,
                          const ObjectiveFn& objective,
                          const std::function<void(const LoopSample&)>& observer = {});

}  // namespace rna
