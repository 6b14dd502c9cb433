#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>

#include <Eigen/Sparse>

#include "rna/common.hpp"
#include "rna/random.hpp"

namespace rna {

/// Smooth, strongly convex objective with an exact first-order oracle.
class Problem {
 public:
  virtual ~Problem() = default;

  virtual Eigen::Index dimension() const = 0;
  virtual double value(const Vector& x) const = 0;
  virtual Vector gradient(const Vector& x) const = 0;
  /// L: Lipschitz constant of the gradient.
  virtual double smoothness() const = 0;
  /// mu: strong-convexity constant.
  virtual double strong_convexity() const = 0;
  /// Data queries one exact gradient costs (N for a finite sum).
  virtual std::int64_t samples() const { return 1; }

  double condition() const { return strong_convexity() / smoothness(); }
};

enum class SpectrumKind { kUniform, kDecay };

struct SpectrumSpec {
  SpectrumKind kind = SpectrumKind::kUniform;
  /// Smallest eigenvalue for kUniform; ignored by kDecay (which uses 1/d).
  double kappa = 1e-2;
};

/// F(x) = 1/2 ||A x - b||^2 with A^T A = Q diag(eigenvalues) Q^T and b = A x*,
/// so F(x*) = 0.
class QuadraticProblem final : public Problem {
 public:
  QuadraticProblem(Vector eigenvalues, Matrix basis, Vector minimizer, Vector start);

  Eigen::Index dimension() const override { return minimizer_.size(); }
  double value(const Vector& x) const override;
  Vector gradient(const Vector& x) const override;
  double smoothness() const override { return eigenvalues_.maxCoeff(); }
  double strong_convexity() const override { return eigenvalues_.minCoeff(); }

  const Matrix& gram() const { return gram_; }
  const Matrix& design() const { return design_; }
  const Vector& target() const { return target_; }
  const Vector& eigenvalues() const { return eigenvalues_; }
  const Matrix& basis() const { return basis_; }
  const Vector& minimizer() const { return minimizer_; }
  const Vector& start() const { return start_; }
  /// Gradient step 1/L.
  double step() const { return 1.0 / smoothness(); }

 private:
  Vector eigenvalues_;
  Matrix basis_;
  Matrix gram_;
  Matrix design_;
  Vector target_;
  Vector minimizer_;
  Vector start_;
};

/// Eigenvalues of A^T A: kUniform draws i.i.d. on [kappa, 1] then pins the
/// extremes to kappa and 1; kDecay uses 1, 1/2, ..., 1/d. The basis is a random
/// orthogonal matrix, x* ~ N(0, I) and ||x0 - x*|| = radius.
QuadraticProblem make_synthetic_quadratic(int d, const SpectrumSpec& spectrum, double radius,
                                          Stream& rng);

Vector exact_gradient(const Problem& problem, const Vector& x);

enum class NoiseFamily { kGaussian, kUniform };

/// Additive gradient noise with mean nu * u (u a fixed unit vector) and
/// covariance (sigma^2 / d) I.
struct NoiseModel {
  double nu = 0.0;
  double sigma = 0.0;
  NoiseFamily family = NoiseFamily::kGaussian;

  Vector mean(Eigen::Index d) const;
  Vector sample(Eigen::Index d, Stream& rng) const;
};

/// grad F(x) + one noise draw.
Vector noisy_gradient(const Problem& problem, const Vector& x, const NoiseModel& noise,
                      Stream& rng);

using SparseRows = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// N sparse rows of dimension d with one label each.
struct Dataset {
  SparseRows rows;
  Vector labels;

  Eigen::Index samples() const { return rows.rows(); }
  Eigen::Index dimension() const { return rows.cols(); }
};

/// Parses `label idx:val idx:val ...` lines with 1-based indices. Blank lines
/// are skipped; d is the largest index seen.
Dataset parse_libsvm(std::istream& in);
Dataset load_libsvm(const std::filesystem::path& path);
void write_libsvm(const Dataset& data, std::ostream& out);

/// Rows with power-law column scales j^-decay, normalized to unit norm, and
/// +/-1 labels. The default conditions the Gram matrix well below 1/N.
Dataset make_synthetic_dataset(int samples, int dimension, Stream& rng, double decay = 2.0);

enum class Loss { kQuadratic, kLogistic };

/// F(x) = (1/N) sum_i l(a_i^T x, y_i) + (mu/2) ||x||^2 with l either
/// 1/2 (z - y)^2 or log(1 + exp(-y z)).
class FiniteSumProblem final : public Problem {
 public:
  FiniteSumProblem(Dataset data, Loss loss, double mu);

  Eigen::Index dimension() const override { return data_.dimension(); }
  double value(const Vector& x) const override;
  Vector gradient(const Vector& x) const override;
  /// Component smoothness (max ||a_i||^2, quartered for logistic) plus mu.
  double smoothness() const override { return loss_smoothness_ + mu_; }
  double strong_convexity() const override { return mu_; }
  std::int64_t samples() const override { return data_.samples(); }

  Loss loss() const { return loss_; }
  double mu() const { return mu_; }
  double loss_smoothness() const { return loss_smoothness_; }
  const Dataset& data() const { return data_; }

  /// a_i^T x
  double margin(Eigen::Index i, const Vector& x) const;
  /// dl/dz at z for sample i; grad f_i(x) = derivative(i, a_i^T x) a_i.
  double derivative(Eigen::Index i, double z) const;
  double component_loss(Eigen::Index i, double z) const;
  /// x += scale * a_i
  void add_row(Eigen::Index i, double scale, Vector& x) const;
  /// (1/N) sum_i s_i a_i
  Vector average_rows(const Vector& per_sample) const;
  /// Derivatives at every sample: one full data pass.
  Vector derivatives(const Vector& x) const;

 private:
  Dataset data_;
  Loss loss_;
  double mu_;
  double loss_smoothness_;
};

/// grad f_i(x) + mu x.
Vector component_gradient(const FiniteSumProblem& problem, Eigen::Index i, const Vector& x);

enum class Regime { kWell, kModerate, kBad };

/// 100/N, 1/N and 1/(100N).
double regime_kappa(Regime regime, Eigen::Index samples);

/// Chooses mu so that mu / L equals the regime's kappa.
FiniteSumProblem condition_setup(Dataset data, Loss loss, Regime regime);

/// High-accuracy minimizer: a direct solve for quadratic losses, damped Newton
/// for logistic ones, polished by gradient steps until ||grad F|| <= 1e-12 L or
/// no further progress.
Vector reference_minimizer(const FiniteSumProblem& problem);

}  // namespace rna
