// Acceptance suite: one PASS/FAIL line per criterion. Exits non-zero if any
// criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "chebyshev_oracle_values.hpp"
#include "rna/extrapolation.hpp"
#include "rna/harness.hpp"
#include "rna/optimizers.hpp"
#include "rna/oracles.hpp"
#include "rna/theory.hpp"

namespace {

using namespace rna;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(const char* format, auto... args) {
  char buffer[512];
  std::snprintf(buffer, sizeof(buffer), format, args...);
  return buffer;
}

double log_uniform(Stream& rng, double lo, double hi) {
  return std::exp(rng.uniform(std::log(lo), std::log(hi)));
}

long double exact_sum(const Vector& v) {
  long double s = 0.0L;
  for (Eigen::Index i = 0; i < v.size(); ++i) s += static_cast<long double>(v[i]);
  return s;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Points on the dyadic lattice 2^-20 Z inside [-2^10, 2^10], where adding two
// points is exact.
double lattice(Stream& rng) {
  return std::ldexp(std::round(rng.uniform(-1.0, 1.0) * std::ldexp(1.0, 30)), -20);
}

Outcome coefficient_identity() {
  const auto start = Clock::now();
  Stream rng(101);
  double worst_sum = 0.0;
  double worst_shift = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int d = 1 + static_cast<int>(rng.index(50));
    const int k = 1 + static_cast<int>(rng.index(15));
    Matrix points(d, k + 2);
    for (Eigen::Index i = 0; i < points.size(); ++i) points.data()[i] = lattice(rng);
    Vector shift(d);
    for (int i = 0; i < d; ++i) shift[i] = lattice(rng);
    const IterateWindow window(points);
    const ResidualMatrix r = compute_residuals(window);
    const double lambda = log_uniform(rng, 1e-12, 1e6) * residual_scale(r);

    const CoefficientVector c = solve_coefficients(r, lambda);
    worst_sum = std::max(worst_sum, static_cast<double>(std::abs(exact_sum(c.weights) - 1.0L)));

    const Vector moved = rna::rna(window.translated(shift), lambda);
    const Vector expected = rna::rna(window, lambda) + shift;
    worst_shift = std::max(worst_shift, (moved - expected).norm());
  }
  const double elapsed = seconds_since(start);
  return {worst_sum <= 1e-12 && worst_shift <= 1e-10 && elapsed < 10.0,
          fmt("max |sum c - 1| = %.2e, max translation error = %.2e, %.2f s", worst_sum,
              worst_shift, elapsed)};
}

Outcome averaging_limit() {
  Stream rng(202);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int d = 1 + static_cast<int>(rng.index(50));
    const int k = 1 + static_cast<int>(rng.index(15));
    Matrix points(d, k + 2);
    for (int j = 0; j < k + 2; ++j) points.col(j) = rng.normal_vector(d);
    const ResidualMatrix r = compute_residuals(IterateWindow(points));
    const Vector c = solve_coefficients(r, 1e12 * residual_scale(r)).weights;
    worst = std::max(worst, (c.array() - 1.0 / (k + 1)).abs().maxCoeff());
  }
  return {worst <= 1e-6, fmt("max |c_i - 1/(k+1)| = %.2e", worst)};
}

Outcome quadratic_exactness() {
  const auto start = Clock::now();
  Stream rng(303);
  const QuadraticProblem problem =
      make_synthetic_quadratic(10, {SpectrumKind::kUniform, 0.8}, 1.0, rng);
  OptimizerState state(problem.start());
  std::vector<Vector> points{state.x};
  for (int i = 0; i < 11; ++i) {
    gd_step(state, problem);
    points.push_back(state.x);
  }
  const IterateWindow window{std::span<const Vector>(points)};
  const double lambda = 1e-12 * residual_scale(compute_residuals(window));
  const double error = (rna::rna(window, lambda) - problem.minimizer()).norm() /
                       (problem.start() - problem.minimizer()).norm();
  const double elapsed = seconds_since(start);
  return {error <= 1e-6 && elapsed < 1.0,
          fmt("relative error %.2e (uniform spectrum kappa = 0.8), %.3f s", error, elapsed)};
}

Outcome nonlinearity() {
  Stream rng(404);
  int violations = 0;
  double tightest = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int d = 1 + static_cast<int>(rng.index(30));
    const int k = static_cast<int>(rng.index(12));
    Matrix r(d, k + 1);
    for (int j = 0; j <= k; ++j) r.col(j) = log_uniform(rng, 1e-3, 1e3) * rng.normal_vector(d);
    const double lambda = log_uniform(rng, 1e-8, 1e4) * residual_scale(r);
    const double lhs = solve_coefficients(r, lambda).weights.norm();
    const double rhs = nonlinearity_bound(r, lambda);
    if (lhs > rhs) ++violations;
    tightest = std::max(tightest, lhs / rhs);
  }
  return {violations == 0,
          fmt("%d violations / 1000, max lhs/rhs = %.4f", violations, tightest)};
}

Outcome stability() {
  Stream rng(505);
  int violations = 0;
  double tightest = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int d = 2 + static_cast<int>(rng.index(20));
    const int k = 1 + static_cast<int>(rng.index(10));
    const double kappa = log_uniform(rng, 1e-3, 0.5);
    Matrix gaussian(d, d);
    for (int j = 0; j < d; ++j) gaussian.col(j) = rng.normal_vector(d);
    const Matrix q = Eigen::HouseholderQR<Matrix>(gaussian).householderQ() * Matrix::Identity(d, d);
    Vector spectrum(d);
    for (int i = 0; i < d; ++i) spectrum[i] = rng.uniform(0.0, 1.0 - kappa);
    LinearizedModel model{q * spectrum.asDiagonal() * q.transpose(), rng.normal_vector(d), kappa};
    model.g = 0.5 * (model.g + model.g.transpose()).eval();

    const Vector x0 = model.fixed_point + rng.normal_vector(d);
    const std::vector<Vector> linear = linearized_iterates(model, x0, k + 2);
    const double sigma = log_uniform(rng, 1e-6, 1.0);
    std::vector<Vector> eps;
    for (int i = 0; i <= k; ++i) eps.push_back(sigma * rng.normal_vector(d) / std::sqrt(d));
    const std::vector<Vector> perturbed = noisy_iterates(model, x0, eps);
    const IterateWindow a{std::span<const Vector>(linear)};
    const IterateWindow b{std::span<const Vector>(perturbed)};
    const double p = spectral_norm(perturbation_matrix(compute_residuals(a), compute_residuals(b)));
    const StabilityCheck check = check_stability(a, b, p * log_uniform(rng, 1.0, 100.0));
    if (!check.holds()) ++violations;
    tightest = std::max(tightest, check.lhs / check.rhs);
  }
  return {violations == 0,
          fmt("%d violations / 1000, max lhs/rhs = %.4f", violations, tightest)};
}

Outcome appendix_max() {
  Stream rng(606);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const double a = log_uniform(rng, 0.1, 10.0);
    const double b = rng.uniform(0.01, 5.0);
    const double lambda = log_uniform(rng, 0.1, 10.0);
    const double kappa = rng.uniform(0.05, 1.0);
    const SqrtMax m = sqrt_fun_max(a, b, lambda, kappa);
    const double end = std::sqrt(a / lambda);
    double grid_max = -std::numeric_limits<double>::infinity();
    constexpr int kPoints = 100000;
    for (int i = 0; i < kPoints; ++i) {
      const double x = end * i / (kPoints - 1);
      grid_max = std::max(grid_max, sqrt_fun(a, b, lambda, kappa, x));
    }
    worst = std::max(worst, std::abs(m.f_max - grid_max));
  }
  return {worst <= 1e-6, fmt("max |formula - grid| = %.2e over 100 draws", worst)};
}

Outcome chebyshev() {
  const auto start = Clock::now();
  bool exact = true;
  for (double alpha : {0.0, 0.3, 1.0, 17.5}) {
    exact = exact && chebyshev_S(0, 0.1, alpha).value == 1.0 + alpha;
  }
  bool monotone = true;
  for (double kappa : {0.3, 0.1, 0.01}) {
    for (int k : {1, 3, 5}) {
      double previous = 0.0;
      for (int i = 0; i < 20; ++i) {
        const double alpha = i == 0 ? 0.0 : std::pow(10.0, -6.0 + 8.0 * (i - 1) / 18.0);
        const double value = chebyshev_S(k, kappa, alpha).value;
        monotone = monotone && value >= previous;
        previous = value;
      }
    }
  }
  double worst = 0.0;
  for (const auto& row : test_oracle::kChebyshevOracle) {
    worst = std::max(worst, std::abs(chebyshev_S(row.k, row.kappa, row.alpha).value - row.value));
  }
  const double elapsed = seconds_since(start);
  return {exact && monotone && worst <= 1e-3 && elapsed < 60.0,
          fmt("S(0,a) exact: %s, monotone in alpha: %s, max oracle gap %.2e, %.2f s",
              exact ? "yes" : "no", monotone ? "yes" : "no", worst, elapsed)};
}

Outcome prop51() {
  Stream rng(808);
  const int d = 20;
  const int k = 10;
  const QuadraticProblem problem = make_synthetic_quadratic(d, {SpectrumKind::kUniform, 0.1}, 1.0, rng);
  const LinearizedModel model = LinearizedModel::gradient_map(problem);
  const NoiseModel noise{0.0, 0.0, NoiseFamily::kGaussian};
  const std::vector<double> sigmas{1e-2, 2e-2};
  const ScalingReport doubling =
      verify_prop51_scalings(model, problem.start(), noise, k, 1000, sigmas, 1);
  const double ratio = doubling.points[1].mean_noise / doubling.points[0].mean_noise;

  const std::vector<double> vanishing{1e-2, 1e-4, 1e-6, 1e-8, 0.0};
  const ScalingReport limit =
      verify_prop51_scalings(model, problem.start(), noise, k, 1000, vanishing, 2);
  bool decreasing = true;
  for (std::size_t i = 1; i < limit.points.size(); ++i) {
    decreasing = decreasing && limit.points[i].mean_noise < limit.points[i - 1].mean_noise;
  }
  const double tail = limit.points.back().mean_noise;
  return {std::abs(ratio - 2.0) <= 0.2 && decreasing && tail == 0.0,
          fmt("E||E||(2s)/E||E||(s) = %.4f, E||E|| at sigma 1e-8 = %.2e, at 0 = %.1e", ratio,
              limit.points[3].mean_noise, tail)};
}

Outcome sgd_replication() {
  const auto start = Clock::now();
  ExperimentConfig config;
  config.problem.kind = ProblemKind::kQuadratic;
  config.problem.d = 100;
  config.problem.spectrum = {SpectrumKind::kUniform, 1e-2};
  config.problem.radius = 1e4;
  config.problem.noise = {0.0, 10.0, NoiseFamily::kGaussian};
  config.k = 10;
  config.lambda = LambdaStrategy::kFixed;
  config.lambda_value = 1e-6;
  config.budget_queries = 10000;
  config.seeds.clear();
  for (std::uint64_t s = 0; s < 20; ++s) config.seeds.push_back(s);

  // Gap of the last record at or before each checkpoint.
  const auto gaps_at = [&](const MethodSpec& method, std::int64_t checkpoint) {
    std::vector<double> out;
    for (const std::uint64_t seed : config.seeds) {
      const ProblemInstance instance = build_problem(config.problem, config.experiment_seed, seed);
      double gap = std::numeric_limits<double>::quiet_NaN();
      run_cell(config, instance, method, seed, [&](const TraceRecord& r) {
        if (r.data_queries <= checkpoint) gap = r.objective_gap;
      });
      out.push_back(gap);
    }
    return median(out);
  };
  const MethodSpec sgd{Method::kSgd, false};
  const MethodSpec rna_sgd{Method::kSgd, true};
  const double sgd500 = gaps_at(sgd, 500);
  const double rna500 = gaps_at(rna_sgd, 500);
  const double rna2k = gaps_at(rna_sgd, 2000);
  const double rna10k = gaps_at(rna_sgd, 10000);
  const bool accelerated = rna500 <= 0.1 * sgd500;
  const bool floor = rna10k >= rna2k / 10.0 && rna10k <= 10.0 * rna2k;
  const double elapsed = seconds_since(start);
  return {accelerated && floor && elapsed < 120.0,
          fmt("median gap @500: rna-sgd %.3g vs sgd %.3g (ratio %.3f, need <= 0.1); "
              "rna-sgd @2e3 %.3g, @1e4 %.3g (floor %s), %.1f s",
              rna500, sgd500, rna500 / sgd500, rna2k, rna10k, floor ? "yes" : "no", elapsed)};
}

Outcome finite_sum_replication() {
  const auto start = Clock::now();
  ExperimentConfig config;
  config.problem.kind = ProblemKind::kFiniteSum;
  config.problem.samples = 1000;
  config.problem.dimension = 200;
  config.problem.loss = Loss::kQuadratic;
  config.problem.regime = Regime::kModerate;
  config.k = 10;
  config.lambda = LambdaStrategy::kGrid;
  config.budget_epochs = 300;
  config.seeds = {0, 1, 2, 3, 4};

  std::vector<ProblemInstance> instances;
  for (const std::uint64_t seed : config.seeds) {
    instances.push_back(build_problem(config.problem, config.experiment_seed, seed));
  }
  const auto epochs_to = [&](const MethodSpec& method) {
    std::vector<double> out;
    for (std::size_t i = 0; i < config.seeds.size(); ++i) {
      double reached = std::numeric_limits<double>::infinity();
      run_cell(config, instances[i], method, config.seeds[i], [&](const TraceRecord& r) {
        if (r.objective_gap <= 1e-8 && r.epoch < reached) reached = r.epoch;
      });
      out.push_back(reached);
    }
    return median(out);
  };
  const double saga = epochs_to({Method::kSaga, false});
  const double acc_saga = epochs_to({Method::kSaga, true});
  const double svrg = epochs_to({Method::kSvrg, false});
  const double acc_svrg = epochs_to({Method::kSvrg, true});
  const double katyusha = epochs_to({Method::kKatyusha, false});
  const double acc_katyusha = epochs_to({Method::kKatyusha, true});
  const bool saga_ok = acc_saga <= 2.0 / 3.0 * saga;
  const bool svrg_ok = acc_svrg <= 2.0 / 3.0 * svrg;
  const double elapsed = seconds_since(start);
  return {saga_ok && svrg_ok && elapsed < 180.0,
          fmt("median epochs to 1e-8: saga %.0f -> rna %.0f (%.2f), svrg %.0f -> rna %.0f (%.2f), "
              "need <= 0.67; katyusha %.0f -> rna %.0f (recorded only), %.1f s",
              saga, acc_saga, acc_saga / saga, svrg, acc_svrg, acc_svrg / svrg, katyusha,
              acc_katyusha, elapsed)};
}

Outcome restart_rate() {
  Stream rng(1111);
  Dataset data = make_synthetic_dataset(500, 50, rng);
  const double kappa = 1e-2;
  const FiniteSumProblem probe(data, Loss::kLogistic, 0.0);
  const FiniteSumProblem problem(std::move(data), Loss::kLogistic,
                                 kappa * probe.loss_smoothness() / (1.0 - kappa));
  const Vector x_star = reference_minimizer(problem);

  const int k = 10;
  const double root = std::sqrt(kappa);
  const double bound = std::pow((1.0 - root) / (1.0 + root), k) / kappa;
  Optimizer gd(Method::kGd, problem, Vector::Zero(problem.dimension()), {}, Stream(1));
  RestartOptions options{k, LambdaGrid::geometric(k), 5 * (k + 2) * problem.samples(), -1};
  std::vector<double> errors{(gd.current() - x_star).norm()};
  const ObjectiveFn objective = [&](const Vector& x) { return problem.value(x); };
  const RestartTrace trace = restart_loop(gd, options, objective);
  double worst = 0.0;
  for (const RestartRecord& record : trace.restarts) {
    const double error = (record.point - x_star).norm();
    worst = std::max(worst, error / errors.back());
    errors.push_back(error);
  }
  const bool five = trace.restarts.size() == 5;
  return {five && worst <= bound,
          fmt("%zu restarts, worst ratio %.3e <= bound %.3f", trace.restarts.size(), worst, bound)};
}

Outcome snapshot_accounting() {
  bool closed_forms = true;
  bool measured = true;
  std::string first_failure;
  for (const std::int64_t n : {100, 1000}) {
    Stream rng(1212);
    const FiniteSumProblem problem(make_synthetic_dataset(static_cast<int>(n), 5, rng),
                                   Loss::kQuadratic, 0.1);
    for (const int k : {1, 5, 10}) {
      const std::pair<Method, std::int64_t> expected[] = {
          {Method::kSgd, k * n},
          {Method::kSaga, (k + 1) * n},
          {Method::kSvrg, 2 * k * n},
          {Method::kKatyusha, 3 * k * n},
      };
      for (const auto& [method, cost] : expected) {
        closed_forms = closed_forms && snapshot_schedule(method, n).cost(k) == cost;
        OptimizerConfig oc;
        oc.component_sampling = method == Method::kSgd;
        Optimizer optimizer(method, problem, Vector::Zero(5), oc, Stream(7));
        optimizer.restart(Vector::Ones(5));
        const std::int64_t before = optimizer.queries();
        for (int s = 0; s < k; ++s) optimizer.advance();
        if (optimizer.queries() - before != cost) {
          measured = false;
          first_failure = fmt(" (%s k=%d N=%lld)", to_string(method), k,
                              static_cast<long long>(n));
        }
      }
    }
  }
  return {closed_forms && measured,
          fmt("closed forms %s, measured optimizer queries %s%s", closed_forms ? "match" : "differ",
              measured ? "match" : "differ", first_failure.c_str())};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"coefficient identity", coefficient_identity},
      {"averaging limit", averaging_limit},
      {"quadratic exactness", quadratic_exactness},
      {"nonlinearity bound", nonlinearity},
      {"stability bound", stability},
      {"appendix maximization", appendix_max},
      {"regularized chebyshev", chebyshev},
      {"noise scaling", prop51},
      {"sgd replication", sgd_replication},
      {"finite-sum replication", finite_sum_replication},
      {"deterministic restart rate", restart_rate},
      {"snapshot accounting", snapshot_accounting},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome outcome;
    try {
      outcome = criteria[i].second();
    } catch (const std::exception& e) {
      outcome = {false, std::string("exception: ") + e.what()};
    }
    failures += outcome.pass ? 0 : 1;
    std::printf("criterion %2zu %-28s %s  %s\n", i + 1, criteria[i].first,
                outcome.pass ? "PASS" : "FAIL", outcome.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria failed\n", failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
