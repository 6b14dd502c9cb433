#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "rna/extrapolation.hpp"
#include "rna/oracles.hpp"
#include "rna/random.hpp"

namespace rna {

/// x_{t+1} = x* + G (x_t - x*), with G symmetric and 0 <= G <= (1 - kappa) I.
struct LinearizedModel {
  Matrix g;
  Vector fixed_point;
  double kappa = 0.0;

  /// Throws InvalidInput unless G is square, symmetric within 1e-12 and has its
  /// spectrum in [0, 1 - kappa] (up to 1e-12).
  void validate() const;

  /// Gradient step on a quadratic: G = I - h A^T A, kappa = h mu. h = 0 means 1/L.
  static LinearizedModel gradient_map(const QuadraticProblem& problem, double step = 0.0);
};

/// count points x_0, ..., x_{count-1}.
std::vector<Vector> linearized_iterates(const LinearizedModel& model, const Vector& x0,
                                        int count);

/// x~_0 = x0 and x~_{t+1} = x* + G (x~_t - x*) + noise[t]; noise.size() + 1 points.
std::vector<Vector> noisy_iterates(const LinearizedModel& model, const Vector& x0,
                                   std::span<const Vector> noise);

/// Largest singular value, from a dense eigensolver on the smaller Gram matrix.
double spectral_norm(const Matrix& m);

/// P = R^T R - R~^T R~.
Matrix perturbation_matrix(const ResidualMatrix& r, const ResidualMatrix& r_tilde);

/// Columns x~_i - x_i, one per point; satisfies E_{t+1} = G E_t + eps_{t+1} and
/// R~_t = R_t + E_{t+1} - E_t.
Matrix noise_matrix(std::span<const Vector> linear, std::span<const Vector> perturbed);

/// ||P|| / lambda * ||c||
double stability_bound(const Matrix& p, double lambda, const Vector& c);

struct StabilityCheck {
  Vector c;
  Vector c_tilde;
  double perturbation_norm = 0.0;
  /// ||c~ - c||
  double lhs = 0.0;
  double rhs = 0.0;

  bool holds() const { return lhs <= rhs; }
};

/// Coefficients of both windows at the same lambda, compared against the bound.
StabilityCheck check_stability(const IterateWindow& linear, const IterateWindow& perturbed,
                               double lambda);

/// sqrt((||R~||^2 + lambda) / ((k+1) lambda)), spectral norm.
double nonlinearity_bound(const ResidualMatrix& r_tilde, double lambda);

struct ChebyshevResult {
  /// max_j p(x_j)^2 + alpha ||c||^2 at the returned polynomial.
  double value = 0.0;
  /// Monomial coefficients c_0..c_k of p; they sum to 1.
  Vector coefficients;
  /// Dual certificate: value - lower_bound bounds the suboptimality.
  double lower_bound = 0.0;
};

/// min over degree-k p with p(1) = 1 of max_{x in [0, 1-kappa]} p(x)^2 + alpha ||p||^2,
/// the max taken over `grid` equispaced points.
ChebyshevResult chebyshev_S(int k, double kappa, double alpha, int grid = 2000);

/// (1/kappa) sqrt(S r0^2 - lambda ||c||^2) with lambda = lambda_bar r0^2. Throws
/// InvalidRegime on a negative radicand.
double acceleration_bound(double kappa, int k, double lambda_bar, double r0, double c_norm);
/// Same, with S already evaluated.
double acceleration_bound_from_s(double s_value, double kappa, double lambda_bar, double r0,
                                 double c_norm);

/// Multipliers for the unspecified O(.) factors.
struct BoundConstants {
  double stability = 1.0;
  double nonlinearity = 1.0;
};

/// r0 sqrt(S) sqrt(1/kappa^2 + C_s r0^2 ||P||^2 / lambda^3)
///   + C_n ||E|| / sqrt(k+1) sqrt(1 + ||R~||^2 / lambda)
double theorem_bound(double kappa, int k, double lambda, double r0, double p_norm,
                     double e_norm, double r_tilde_norm, const BoundConstants& constants = {});

/// sqrt(S) sqrt(1/kappa^2 + C_s tau^2 (1+tau)^2 / lambda_bar^3)
///   + C_n sqrt(tau^2 + tau^2 (1 + tau^2) / lambda_bar)
/// Infinite when lambda_bar = 0 < tau.
double stochastic_bound(double kappa, int k, double lambda_bar, double tau,
                        const BoundConstants& constants = {});

/// (1/kappa) sqrt(a - lambda x^2) + b x on [0, sqrt(a/lambda)].
double sqrt_fun(double a, double b, double lambda, double kappa, double x);

struct SqrtMax {
  double x_opt = 0.0;
  double f_max = 0.0;
  /// True when the stationary point leaves the domain (b < 0) and the maximum
  /// sits at x = 0.
  bool boundary = false;
};

SqrtMax sqrt_fun_max(double a, double b, double lambda, double kappa);

struct JensenReport {
  /// Mean spectral norm of the draws.
  double lhs = 0.0;
  /// sum_i sqrt(mean ||eps_i||^2) over columns.
  double rhs = 0.0;
};

/// Each draw is a matrix of noise columns [eps_0, ..., eps_k].
JensenReport jensen_noise_bound(std::span<const Matrix> draws);

struct ScalingPoint {
  double sigma = 0.0;
  double mean_r_tilde = 0.0;
  double mean_noise = 0.0;
  double mean_perturbation = 0.0;
};

struct ScalingReport {
  std::vector<ScalingPoint> points;
  /// ||R|| of the noiseless window.
  double r_norm = 0.0;
  /// Log-log slope of E||E|| against nu + sigma.
  double noise_slope = 0.0;
  /// Log-log slope of E||P|| against nu + sigma over points with
  /// nu + sigma <= 0.1 ||x0 - x*||; NaN with fewer than two such points.
  double perturbation_slope = 0.0;
  bool noise_linear = false;
  bool perturbation_linear = false;
};

/// Monte-Carlo estimates of E||R~||, E||E|| and E||P|| for each sigma in the
/// sweep, on windows of k+2 points started at x0. Trial t of sweep point s
/// draws from Stream::derive(seed, s, t).
ScalingReport verify_prop51_scalings(const LinearizedModel& model, const Vector& x0,
                                     const NoiseModel& noise, int k, int trials,
                                     std::span<const double> sigmas, std::uint64_t seed = 0);

}  // namespace rna
