#include "rna/extrapolation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace rna {

IterateWindow::IterateWindow(std::span<const Vector> points) {
  if (points.size() < 2) {
    throw InvalidInput("IterateWindow: need at least 2 points, got " +
                       std::to_string(points.size()));
  }
  const Eigen::Index d = points.front().size();
  if (d == 0) throw InvalidInput("IterateWindow: points have dimension 0");
  points_.resize(d, static_cast<Eigen::Index>(points.size()));
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (points[i].size() != d) {
      throw InvalidInput("IterateWindow: point " + std::to_string(i) + " has dimension " +
                         std::to_string(points[i].size()) + ", expected " +
                         std::to_string(d));
    }
    points_.col(static_cast<Eigen::Index>(i)) = points[i];
  }
}

IterateWindow::IterateWindow(Matrix columns) : points_(std::move(columns)) {
  if (points_.cols() < 2 || points_.rows() == 0) {
    throw InvalidInput("IterateWindow: need at least 2 non-empty points");
  }
}

IterateWindow IterateWindow::translated(const Vector& shift) const {
  if (shift.size() != dimension()) {
    throw InvalidInput("IterateWindow::translated: shift dimension mismatch");
  }
  Matrix moved = points_;
  moved.colwise() += shift;
  return IterateWindow(std::move(moved));
}

LambdaGrid::LambdaGrid(std::vector<double> relative_values, LambdaScale scale)
    : values_(std::move(relative_values)), scale_(scale) {
  if (values_.empty()) throw InvalidInput("LambdaGrid: grid is empty");
  for (double v : values_) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw InvalidInput("LambdaGrid: values must be positive and finite");
    }
  }
  std::sort(values_.begin(), values_.end(), std::greater<>());
  if (std::adjacent_find(values_.begin(), values_.end()) != values_.end()) {
    throw InvalidInput("LambdaGrid: values must be distinct");
  }
}

LambdaGrid LambdaGrid::geometric(int size) {
  if (size < 1) throw InvalidInput("LambdaGrid::geometric: size must be >= 1");
  std::vector<double> values;
  values.reserve(static_cast<std::size_t>(size));
  for (int i = 0; i < size; ++i) values.push_back(std::pow(10.0, -i));
  return LambdaGrid(std::move(values));
}

double LambdaGrid::absolute(double relative_value, const ResidualMatrix& residuals) const {
  switch (scale_) {
    case LambdaScale::kFrobeniusSquared:
      return relative_value * residual_scale(residuals);
    case LambdaScale::kLegacyInverse: {
      const Matrix gram = residuals.transpose() * residuals;
      const double spectral = Eigen::SelfAdjointEigenSolver<Matrix>(gram, Eigen::EigenvaluesOnly)
                                  .eigenvalues()
                                  .maxCoeff();
      return std::max(spectral, 0.0) / relative_value;
    }
  }
  return 0.0;
}

ResidualMatrix compute_residuals(const IterateWindow& window) {
  const Matrix& x = window.columns();
  const Eigen::Index m = x.cols() - 1;
  return x.rightCols(m) - x.leftCols(m);
}

double residual_scale(const ResidualMatrix& residuals) {
  return residuals.squaredNorm();
}

namespace {

// Neumaier summation; the weights can reach 1e6 in magnitude, where a naive
// sum loses the 1e-12 normalization.
double compensated_sum(const Vector& v) {
  double sum = 0.0;
  double carry = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const double t = sum + v[i];
    if (std::abs(sum) >= std::abs(v[i])) {
      carry += (sum - t) + v[i];
    } else {
      carry += (v[i] - t) + sum;
    }
    sum = t;
  }
  return sum + carry;
}

}  // namespace

CoefficientVector solve_coefficients(const ResidualMatrix& residuals, double lambda) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw InvalidInput("solve_coefficients: lambda must be finite and >= 0");
  }
  const Eigen::Index n = residuals.cols();
  if (n == 0) throw InvalidInput("solve_coefficients: no residual columns");

  Matrix system = residuals.transpose() * residuals;
  system.diagonal().array() += lambda;

  double used = lambda;
  Eigen::LLT<Matrix> llt(system);
  if (llt.info() != Eigen::Success) {
    const double jitter = 1e-12 * system.trace() / static_cast<double>(n);
    if (jitter > 0.0) {
      system.diagonal().array() += jitter;
      used += jitter;
      llt.compute(system);
    }
    if (jitter <= 0.0 || llt.info() != Eigen::Success) {
      throw SingularSystem("solve_coefficients: R^T R + lambda I is not positive definite");
    }
  }
  const Vector z = llt.solve(Vector::Ones(n));
  const double total = compensated_sum(z);
  if (!std::isfinite(total) || !z.allFinite() ||
      std::abs(total) <= std::numeric_limits<double>::epsilon() * z.cwiseAbs().sum()) {
    throw DegenerateNormalization("solve_coefficients: 1^T z vanished");
  }

  CoefficientVector out{z / total, used};
  // Push the rounding left over by the division into the smallest entry,
  // where adding it is nearly exact.
  const double defect = 1.0 - compensated_sum(out.weights);
  if (defect != 0.0) {
    Eigen::Index smallest = 0;
    out.weights.cwiseAbs().minCoeff(&smallest);
    out.weights[smallest] += defect;
  }
  return out;
}

Vector extrapolate(const IterateWindow& window, const CoefficientVector& coeffs) {
  const Eigen::Index n = window.size() - 1;
  if (coeffs.weights.size() != n) {
    throw InvalidInput("extrapolate: expected " + std::to_string(n) + " weights, got " +
                       std::to_string(coeffs.weights.size()));
  }
  return window.columns().leftCols(n) * coeffs.weights;
}

Vector rna(const IterateWindow& window, double lambda) {
  const ResidualMatrix residuals = compute_residuals(window);
  if (residuals.isZero(0.0)) return window.point(0);
  return extrapolate(window, solve_coefficients(residuals, lambda));
}

GridSearchResult grid_search_lambda(const IterateWindow& window, const LambdaGrid& grid,
                                    const ObjectiveFn& objective) {
  const ResidualMatrix residuals = compute_residuals(window);
  const bool converged = residuals.isZero(0.0);

  GridSearchResult best;
  best.candidate_objectives.reserve(grid.size() + 1);
  bool have_best = false;

  for (double relative : grid.relative_values()) {
    const double lambda = grid.absolute(relative, residuals);
    Vector candidate;
    if (converged) {
      candidate = window.point(0);
    } else {
      try {
        candidate = extrapolate(window, solve_coefficients(residuals, lambda));
      } catch (const SingularSystem&) {
        best.candidate_objectives.push_back(std::numeric_limits<double>::quiet_NaN());
        continue;
      } catch (const DegenerateNormalization&) {
        best.candidate_objectives.push_back(std::numeric_limits<double>::quiet_NaN());
        continue;
      }
    }
    const double value = objective(candidate);
    best.candidate_objectives.push_back(value);
    if (std::isfinite(value) && (!have_best || value < best.objective)) {
      best.point = std::move(candidate);
      best.lambda = lambda;
      best.objective = value;
      have_best = true;
    }
  }

  const Vector last = window.last();
  const double safeguard = objective(last);
  best.candidate_objectives.push_back(safeguard);
  if (std::isfinite(safeguard) && (!have_best || safeguard < best.objective)) {
    best.point = last;
    best.lambda = 0.0;
    best.objective = safeguard;
    best.safeguard_chosen = true;
    have_best = true;
  }
  if (!have_best) {
    throw AllCandidatesInvalid("grid_search_lambda: objective is non-finite on every candidate");
  }
  return best;
}

RestartTrace restart_loop(SnapshotSource& source, const RestartOptions& options,
                          const ObjectiveFn& objective,
                          const std::function<void(const LoopSample&)>& observer) {
  if (options.k < 1) throw InvalidInput("restart_loop: k must be >= 1");
  if (options.budget <= 0) throw InvalidInput("restart_loop: budget must be positive");

  const std::int64_t evaluation =
      options.evaluation_queries >= 0 ? options.evaluation_queries : source.pass_queries();
  RestartTrace trace;
  std::int64_t charged = 0;  // grid-search passes
  const auto total = [&] { return source.queries() + charged; };

  std::vector<Vector> window;
  window.reserve(static_cast<std::size_t>(options.k) + 2);
  window.push_back(source.current());

  while (total() < options.budget) {
    if (!source.advance()) {
      trace.status = RunStatus::kDiverged;
      break;
    }
    window.push_back(source.current());
    if (observer) observer(LoopSample{total(), &window.back(), false});

    if (static_cast<int>(window.size()) < options.k + 2) continue;
    if (total() + evaluation > options.budget) break;

    GridSearchResult result =
        grid_search_lambda(IterateWindow(std::span<const Vector>(window)), options.grid, objective);
    charged += evaluation;

    RestartRecord record{total(), result.lambda, result.objective, result.safeguard_chosen,
                         std::move(result.point)};
    source.restart(record.point);
    if (observer) observer(LoopSample{record.queries, &record.point, true});
    trace.restarts.push_back(std::move(record));

    window.clear();
    window.push_back(source.current());
  }
  trace.queries = total();
  return trace;
}

}  // namespace rna
