#include "rna/theory.hpp"

#include <cmath>
#include <limits>

namespace rna {

void LinearizedModel::validate() const {
  const Eigen::Index d = g.rows();
  if (d == 0 || g.cols() != d || fixed_point.size() != d) {
    throw InvalidInput("LinearizedModel: G must be d x d with a d-dimensional fixed point");
  }
  if (!(kappa > 0.0 && kappa < 1.0)) throw InvalidInput("LinearizedModel: kappa must lie in (0, 1)");
  if ((g - g.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
    throw InvalidInput("LinearizedModel: G is not symmetric");
  }
  const Vector eig = Eigen::SelfAdjointEigenSolver<Matrix>(g, Eigen::EigenvaluesOnly).eigenvalues();
  if (eig.minCoeff() < -1e-12 || eig.maxCoeff() > 1.0 - kappa + 1e-12) {
    throw InvalidInput("LinearizedModel: spectrum of G leaves [0, 1 - kappa]");
  }
}

LinearizedModel LinearizedModel::gradient_map(const QuadraticProblem& problem, double step) {
  const double h = step > 0.0 ? step : problem.step();
  const Eigen::Index d = problem.dimension();
  LinearizedModel model;
  model.g = Matrix::Identity(d, d) - h * problem.gram();
  model.g = 0.5 * (model.g + model.g.transpose()).eval();
  model.fixed_point = problem.minimizer();
  model.kappa = h * problem.strong_convexity();
  return model;
}

std::vector<Vector> linearized_iterates(const LinearizedModel& model, const Vector& x0,
                                        int count) {
  if (count < 0) throw InvalidInput("linearized_iterates: count must be >= 0");
  if (x0.size() != model.fixed_point.size()) {
    throw InvalidInput("linearized_iterates: x0 dimension mismatch");
  }
  std::vector<Vector> out;
  out.reserve(static_cast<std::size_t>(count));
  Vector x = x0;
  for (int t = 0; t < count; ++t) {
    out.push_back(x);
    x = model.fixed_point + model.g * (x - model.fixed_point);
  }
  return out;
}

std::vector<Vector> noisy_iterates(const LinearizedModel& model, const Vector& x0,
                                   std::span<const Vector> noise) {
  if (x0.size() != model.fixed_point.size()) {
    throw InvalidInput("noisy_iterates: x0 dimension mismatch");
  }
  std::vector<Vector> out;
  out.reserve(noise.size() + 1);
  out.push_back(x0);
  for (const Vector& eps : noise) {
    if (eps.size() != x0.size()) throw InvalidInput("noisy_iterates: noise dimension mismatch");
    out.push_back(model.fixed_point + model.g * (out.back() - model.fixed_point) + eps);
  }
  return out;
}

double spectral_norm(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  const Matrix gram = m.rows() >= m.cols() ? Matrix(m.transpose() * m) : Matrix(m * m.transpose());
  const double top =
      Eigen::SelfAdjointEigenSolver<Matrix>(gram, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff();
  return std::sqrt(std::max(top, 0.0));
}

Matrix perturbation_matrix(const ResidualMatrix& r, const ResidualMatrix& r_tilde) {
  if (r.rows() != r_tilde.rows() || r.cols() != r_tilde.cols()) {
    throw InvalidInput("perturbation_matrix: R and R~ differ in shape");
  }
  return r.transpose() * r - r_tilde.transpose() * r_tilde;
}

Matrix noise_matrix(std::span<const Vector> linear, std::span<const Vector> perturbed) {
  if (linear.size() != perturbed.size() || linear.empty()) {
    throw InvalidInput("noise_matrix: sequences must be non-empty and of equal length");
  }
  const Eigen::Index d = linear.front().size();
  Matrix out(d, static_cast<Eigen::Index>(linear.size()));
  for (std::size_t i = 0; i < linear.size(); ++i) {
    if (linear[i].size() != d || perturbed[i].size() != d) {
      throw InvalidInput("noise_matrix: dimension mismatch at point " + std::to_string(i));
    }
    out.col(static_cast<Eigen::Index>(i)) = perturbed[i] - linear[i];
  }
  return out;
}

double stability_bound(const Matrix& p, double lambda, const Vector& c) {
  if (!(lambda > 0.0)) throw InvalidInput("stability_bound: lambda must be positive");
  return spectral_norm(p) / lambda * c.norm();
}

StabilityCheck check_stability(const IterateWindow& linear, const IterateWindow& perturbed,
                               double lambda) {
  const ResidualMatrix r = compute_residuals(linear);
  const ResidualMatrix r_tilde = compute_residuals(perturbed);
  const Matrix p = perturbation_matrix(r, r_tilde);
  StabilityCheck out;
  out.c = solve_coefficients(r, lambda).weights;
  out.c_tilde = solve_coefficients(r_tilde, lambda).weights;
  out.perturbation_norm = spectral_norm(p);
  out.lhs = (out.c_tilde - out.c).norm();
  out.rhs = out.perturbation_norm / lambda * out.c.norm();
  return out;
}

double nonlinearity_bound(const ResidualMatrix& r_tilde, double lambda) {
  if (!(lambda > 0.0)) throw InvalidInput("nonlinearity_bound: lambda must be positive");
  const double norm = spectral_norm(r_tilde);
  const auto k1 = static_cast<double>(r_tilde.cols());
  return std::sqrt((norm * norm + lambda) / (k1 * lambda));
}

double acceleration_bound_from_s(double s_value, double kappa, double lambda_bar, double r0,
                                 double c_norm) {
  const double lambda = lambda_bar * r0 * r0;
  const double radicand = s_value * r0 * r0 - lambda * c_norm * c_norm;
  if (radicand < 0.0) {
    throw InvalidRegime("acceleration_bound: S r0^2 - lambda ||c||^2 is negative");
  }
  return std::sqrt(radicand) / kappa;
}

double acceleration_bound(double kappa, int k, double lambda_bar, double r0, double c_norm) {
  return acceleration_bound_from_s(chebyshev_S(k, kappa, lambda_bar).value, kappa, lambda_bar,
                                   r0, c_norm);
}

double theorem_bound(double kappa, int k, double lambda, double r0, double p_norm,
                     double e_norm, double r_tilde_norm, const BoundConstants& constants) {
  if (!(lambda > 0.0) || !(r0 > 0.0)) {
    throw InvalidInput("theorem_bound: lambda and r0 must be positive");
  }
  const double s = chebyshev_S(k, kappa, lambda / (r0 * r0)).value;
  const double acceleration =
      r0 * std::sqrt(s) *
      std::sqrt(1.0 / (kappa * kappa) +
                constants.stability * r0 * r0 * p_norm * p_norm / (lambda * lambda * lambda));
  const double nonlinearity = constants.nonlinearity * e_norm / std::sqrt(k + 1.0) *
                              std::sqrt(1.0 + r_tilde_norm * r_tilde_norm / lambda);
  return acceleration + nonlinearity;
}

double stochastic_bound(double kappa, int k, double lambda_bar, double tau,
                        const BoundConstants& constants) {
  if (!(tau >= 0.0) || !(lambda_bar >= 0.0)) {
    throw InvalidInput("stochastic_bound: tau and lambda_bar must be >= 0");
  }
  const double s = chebyshev_S(k, kappa, lambda_bar).value;
  if (tau == 0.0) return std::sqrt(s) / kappa;
  if (lambda_bar == 0.0) return std::numeric_limits<double>::infinity();
  const double t2 = tau * tau;
  const double stability = constants.stability * t2 * (1.0 + tau) * (1.0 + tau) /
                           (lambda_bar * lambda_bar * lambda_bar);
  return std::sqrt(s) * std::sqrt(1.0 / (kappa * kappa) + stability) +
         constants.nonlinearity * std::sqrt(t2 + t2 * (1.0 + t2) / lambda_bar);
}

double sqrt_fun(double a, double b, double lambda, double kappa, double x) {
  if (!(a > 0.0) || !(lambda > 0.0) || !(kappa > 0.0) || !(x >= 0.0) ||
      lambda * x * x > a * (1.0 + 1e-12)) {
    throw InvalidInput("sqrt_fun: x outside [0, sqrt(a/lambda)]");
  }
  return std::sqrt(std::max(a - lambda * x * x, 0.0)) / kappa + b * x;
}

SqrtMax sqrt_fun_max(double a, double b, double lambda, double kappa) {
  if (!(a > 0.0) || !(lambda > 0.0) || !(kappa > 0.0 && kappa <= 1.0) || !std::isfinite(b)) {
    throw InvalidInput("sqrt_fun_max: need a > 0, lambda > 0, kappa in (0, 1]");
  }
  if (b < 0.0) {
    // f is decreasing on the domain.
    return {0.0, std::sqrt(a) / kappa, true};
  }
  SqrtMax out;
  out.x_opt = b * std::sqrt(a) / std::sqrt(lambda * lambda / (kappa * kappa) + lambda * b * b);
  out.f_max = std::sqrt(a) * std::sqrt(1.0 / (kappa * kappa) + b * b / lambda);
  return out;
}

JensenReport jensen_noise_bound(std::span<const Matrix> draws) {
  if (draws.empty()) throw InvalidInput("jensen_noise_bound: no draws");
  const Eigen::Index rows = draws.front().rows();
  const Eigen::Index cols = draws.front().cols();
  Vector second_moment = Vector::Zero(cols);
  double norm_sum = 0.0;
  for (const Matrix& draw : draws) {
    if (draw.rows() != rows || draw.cols() != cols) {
      throw InvalidInput("jensen_noise_bound: draws differ in shape");
    }
    norm_sum += spectral_norm(draw);
    second_moment += draw.colwise().squaredNorm().transpose();
  }
  const auto n = static_cast<double>(draws.size());
  return {norm_sum / n, (second_moment / n).cwiseSqrt().sum()};
}

namespace {

// Least-squares slope of log y against log x.
double log_log_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= static_cast<double>(x.size());
  my /= static_cast<double>(x.size());
  double sxy = 0.0;
  double sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  return sxx > 0.0 ? sxy / sxx : std::numeric_limits<double>::quiet_NaN();
}

}  // namespace

ScalingReport verify_prop51_scalings(const LinearizedModel& model, const Vector& x0,
                                     const NoiseModel& noise, int k, int trials,
                                     std::span<const double> sigmas, std::uint64_t seed) {
  model.validate();
  if (k < 0 || trials < 1) throw InvalidInput("verify_prop51_scalings: need k >= 0, trials >= 1");
  const Eigen::Index d = x0.size();
  const std::vector<Vector> linear = linearized_iterates(model, x0, k + 2);
  const ResidualMatrix r = compute_residuals(IterateWindow(std::span<const Vector>(linear)));
  const double r0 = (x0 - model.fixed_point).norm();

  ScalingReport report;
  report.r_norm = spectral_norm(r);
  std::vector<double> level;
  std::vector<double> noise_means;
  std::vector<double> small_level;
  std::vector<double> small_perturbation;

  for (std::size_t s = 0; s < sigmas.size(); ++s) {
    NoiseModel draw_model = noise;
    draw_model.sigma = sigmas[s];
    ScalingPoint point;
    point.sigma = sigmas[s];
    for (int trial = 0; trial < trials; ++trial) {
      Stream rng = Stream::derive(seed, s, static_cast<std::uint64_t>(trial));
      std::vector<Vector> eps;
      eps.reserve(static_cast<std::size_t>(k) + 1);
      for (int i = 0; i <= k; ++i) eps.push_back(draw_model.sample(d, rng));
      const std::vector<Vector> perturbed = noisy_iterates(model, x0, eps);
      const ResidualMatrix r_tilde =
          compute_residuals(IterateWindow(std::span<const Vector>(perturbed)));
      const Matrix e = noise_matrix(std::span<const Vector>(linear).first(k + 1),
                                    std::span<const Vector>(perturbed).first(k + 1));
      point.mean_r_tilde += spectral_norm(r_tilde);
      point.mean_noise += spectral_norm(e);
      point.mean_perturbation += spectral_norm(perturbation_matrix(r, r_tilde));
    }
    point.mean_r_tilde /= trials;
    point.mean_noise /= trials;
    point.mean_perturbation /= trials;
    report.points.push_back(point);

    const double magnitude = noise.nu + sigmas[s];
    if (magnitude > 0.0 && point.mean_noise > 0.0) {
      level.push_back(magnitude);
      noise_means.push_back(point.mean_noise);
      if (magnitude <= 0.1 * r0 && point.mean_perturbation > 0.0) {
        small_level.push_back(magnitude);
        small_perturbation.push_back(point.mean_perturbation);
      }
    }
  }
  report.noise_slope = log_log_slope(level, noise_means);
  report.perturbation_slope = log_log_slope(small_level, small_perturbation);
  report.noise_linear = std::abs(report.noise_slope - 1.0) <= 0.15;
  report.perturbation_linear = std::abs(report.perturbation_slope - 1.0) <= 0.15;
  return report;
}

}  // namespace rna
