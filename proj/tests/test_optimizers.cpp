#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include "rna/optimizers.hpp"

namespace {

using namespace rna;

Dataset parse(const std::string& text) {
  std::istringstream in(text);
  return parse_libsvm(in);
}

FiniteSumProblem quadratic_sum(int n, int d, double mu, std::uint64_t seed) {
  Stream rng(seed);
  return FiniteSumProblem(make_synthetic_dataset(n, d, rng, 1.0), Loss::kQuadratic, mu);
}

FiniteSumProblem quadratic_sum_with_kappa(int n, int d, double kappa, std::uint64_t seed,
                                          double decay = 1.0) {
  Stream rng(seed);
  Dataset data = make_synthetic_dataset(n, d, rng, decay);
  const FiniteSumProblem probe(data, Loss::kQuadratic, 0.0);
  return FiniteSumProblem(std::move(data), Loss::kQuadratic,
                          kappa * probe.loss_smoothness() / (1.0 - kappa));
}

double gap(const FiniteSumProblem& p, const Vector& x, double optimum) {
  return p.value(x) - optimum;
}

TEST(Methods, NamesRoundTrip) {
  for (const Method m : {Method::kGd, Method::kSgd, Method::kAvgSgd, Method::kAccSgd, Method::kSaga,
                         Method::kSvrg, Method::kKatyusha}) {
    EXPECT_EQ(parse_method(to_string(m)), m);
  }
  EXPECT_THROW(parse_method("adam"), InvalidInput);
}

TEST(Schedule, PaperCosts) {
  EXPECT_EQ(snapshot_schedule(Method::kSgd, 100).cost(10), 1000);
  EXPECT_EQ(snapshot_schedule(Method::kSaga, 100).cost(10), 1100);
  EXPECT_EQ(snapshot_schedule(Method::kSvrg, 100).cost(10), 2000);
  EXPECT_EQ(snapshot_schedule(Method::kKatyusha, 100).cost(10), 3000);
  EXPECT_THROW(snapshot_schedule(Method::kSgd, 0), InvalidInput);
}

TEST(Gd, FixedPointStaysPut) {
  Stream rng(1);
  const QuadraticProblem p = make_synthetic_quadratic(5, {}, 1.0, rng);
  OptimizerState state(p.minimizer());
  ASSERT_TRUE(gd_step(state, p));
  EXPECT_LE((state.x - p.minimizer()).norm(), 1e-14);
  EXPECT_EQ(state.queries, 1);
}

TEST(Gd, ScalarQuadraticSolvedInOneStep) {
  const FiniteSumProblem p(parse("0 1:2\n"), Loss::kQuadratic, 0.0);  // F = 2 x^2, L = 4
  OptimizerState state(Vector::Constant(1, 3.0));
  gd_step(state, p);
  EXPECT_EQ(state.x[0], 0.0);
}

TEST(Gd, ContractionRate) {
  Stream rng(2);
  const QuadraticProblem p = make_synthetic_quadratic(20, {SpectrumKind::kUniform, 0.05}, 1.0, rng);
  OptimizerState state(p.start());
  const double r0 = (p.start() - p.minimizer()).norm();
  double previous_value = p.value(state.x);
  for (int t = 1; t <= 100; ++t) {
    gd_step(state, p);
    EXPECT_LE((state.x - p.minimizer()).norm(), std::pow(0.95, t) * r0 * (1.0 + 1e-12));
    EXPECT_LE(p.value(state.x), previous_value);
    previous_value = p.value(state.x);
  }
}

TEST(Gd, DivergenceIsSignalled) {
  const FiniteSumProblem p(parse("0 1:1\n"), Loss::kQuadratic, 0.0);
  OptimizerState state(Vector::Constant(1, 1.0));
  bool ok = true;
  for (int i = 0; i < 200 && ok; ++i) ok = gd_step(state, p, 5.0);
  EXPECT_FALSE(ok);
  EXPECT_EQ(state.status, RunStatus::kDiverged);
}

TEST(Sgd, ZeroNoiseEqualsGd) {
  Stream rng(3);
  const QuadraticProblem p = make_synthetic_quadratic(6, {}, 1.0, rng);
  OptimizerState a(p.start());
  OptimizerState b(p.start(), Stream(5));
  for (int i = 0; i < 10; ++i) {
    gd_step(a, p);
    sgd_step(b, p, NoiseModel{});
  }
  EXPECT_EQ(a.x, b.x);
  EXPECT_EQ(a.queries, b.queries);
}

TEST(Sgd, SamplingDirectionIsUnbiased) {
  const FiniteSumProblem p = quadratic_sum(20, 4, 0.1, 4);
  Stream rng(5);
  const Vector x = rng.normal_vector(4);
  const double step = 1e-3;
  const int draws = 200000;
  Vector mean = Vector::Zero(4);
  OptimizerState state(x, Stream(6));
  for (int i = 0; i < draws; ++i) {
    state.x = x;
    sgd_step(state, p, step);
    mean += (x - state.x) / step / draws;
  }
  EXPECT_EQ(state.queries, draws);
  // Component gradients are O(1); the Monte-Carlo error is ~ 1/sqrt(draws).
  EXPECT_LE((mean - p.gradient(x)).norm(), 0.02);
}

TEST(Sgd, StallsAtPositiveNoiseFloor) {
  Stream rng(7);
  const QuadraticProblem p = make_synthetic_quadratic(20, {SpectrumKind::kUniform, 0.1}, 1.0, rng);
  std::vector<double> gaps;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    OptimizerState state(p.start(), Stream(seed));
    for (int i = 0; i < 10000; ++i) sgd_step(state, p, NoiseModel{0.0, 1.0, NoiseFamily::kGaussian});
    gaps.push_back(p.value(state.x));
  }
  std::nth_element(gaps.begin(), gaps.begin() + 10, gaps.end());
  EXPECT_GT(gaps[10], 0.0);
  EXPECT_GT(gaps[10], 1e-3);
}

TEST(AveragedSgd, SimpleTraces) {
  const std::vector<Vector> constant(4, Vector::Constant(3, 2.5));
  EXPECT_EQ(averaged_sgd(constant), Vector::Constant(3, 2.5));
  const std::vector<Vector> pair{Vector::Constant(2, 0.0), Vector::Constant(2, 4.0)};
  EXPECT_EQ(averaged_sgd(pair), Vector::Constant(2, 2.0));
  EXPECT_THROW(averaged_sgd({}), InvalidInput);
}

TEST(AveragedSgd, RunningMeanMatchesBatchMean) {
  Stream rng(8);
  std::vector<Vector> trace;
  RunningMean running;
  for (int i = 0; i < 500; ++i) {
    trace.push_back(rng.normal_vector(5) * 100.0);
    running.add(trace.back());
  }
  EXPECT_EQ(running.count(), 500);
  EXPECT_LE((running.value() - averaged_sgd(trace)).norm(), 1e-12);
}

TEST(AccSgd, ZeroMomentumIsSgd) {
  Stream rng(9);
  const QuadraticProblem p = make_synthetic_quadratic(6, {}, 1.0, rng);
  const NoiseModel noise{0.0, 0.5, NoiseFamily::kGaussian};
  OptimizerState a(p.start(), Stream(10));
  OptimizerState b(p.start(), Stream(10));
  const AccSgdParams params{0.7, 0.0, 0.0, false};
  for (int i = 0; i < 20; ++i) {
    sgd_step(a, p, noise, 0.7);
    acc_sgd_step(b, p, noise, params);
  }
  EXPECT_LE((a.x - b.x).norm(), 1e-12);
}

TEST(AccSgd, FixedPoint) {
  Stream rng(11);
  const QuadraticProblem p = make_synthetic_quadratic(6, {}, 1.0, rng);
  OptimizerState state(p.minimizer());
  acc_sgd_step(state, p, NoiseModel{}, AccSgdParams::nesterov(p));
  EXPECT_LE((state.x - p.minimizer()).norm(), 1e-14);
}

TEST(AccSgd, NesterovRateEnvelope) {
  Stream rng(12);
  const double kappa = 1e-2;
  const QuadraticProblem p = make_synthetic_quadratic(50, {SpectrumKind::kUniform, kappa}, 1.0, rng);
  OptimizerState state(p.start());
  const AccSgdParams params = AccSgdParams::nesterov(p);
  const double r0 = (p.start() - p.minimizer()).norm();
  for (int t = 1; t <= 1000; ++t) {
    acc_sgd_step(state, p, NoiseModel{}, params);
    EXPECT_LE((state.x - p.minimizer()).norm(), 10.0 * std::pow(1.0 - std::sqrt(kappa), t) * r0 + 1e-14 * r0)
        << "t = " << t;
  }
}

TEST(Saga, SingleSampleIsGd) {
  const FiniteSumProblem p(parse("0.5 1:1 2:0.5\n"), Loss::kQuadratic, 0.1);
  OptimizerState saga(Vector::Constant(2, 1.0), Stream(13));
  OptimizerState gd(Vector::Constant(2, 1.0));
  saga_init(saga, p);
  const double step = 1.0 / (3.0 * p.smoothness());
  for (int i = 0; i < 10; ++i) {
    saga_step(saga, p);
    gd_step(gd, p, step);
  }
  EXPECT_LE((saga.x - gd.x).norm(), 1e-14);
}

TEST(Saga, FreshTableGivesExactGradientDirection) {
  const FiniteSumProblem p = quadratic_sum(15, 4, 0.1, 14);
  OptimizerState state(Vector::Constant(4, 0.3), Stream(15));
  saga_init(state, p);
  EXPECT_EQ(state.queries, 15);
  const Vector x = state.x;
  const double step = 0.01;
  saga_step(state, p, step);
  // The sampled component's table entry equals its current derivative, so the
  // correction cancels and the step follows grad F exactly.
  EXPECT_LE(((x - state.x) / step - p.gradient(x)).norm(), 1e-12);
  EXPECT_EQ(state.queries, 16);
}

TEST(Saga, TableInvariantAfterFullEpoch) {
  const FiniteSumProblem p = quadratic_sum(20, 5, 0.1, 16);
  OptimizerState state(Vector::Zero(5), Stream(17));
  saga_init(state, p);
  for (int i = 0; i < 2000; ++i) saga_step(state, p);
  Vector mean = Vector::Zero(5);
  for (int i = 0; i < 20; ++i) mean += state.table[i] * Vector(p.data().rows.row(i).transpose()) / 20.0;
  EXPECT_LE((mean - state.table_mean).norm(), 1e-12);
}

TEST(Saga, ConvergesOnSmallQuadratic) {
  const FiniteSumProblem p = quadratic_sum(50, 10, 0.05, 18);
  const double optimum = p.value(reference_minimizer(p));
  OptimizerState state(Vector::Zero(10), Stream(19));
  saga_init(state, p);
  for (int i = 0; i < 200 * 50; ++i) saga_step(state, p);
  EXPECT_LE(gap(p, state.x, optimum), 1e-10);
}

TEST(Saga, RequiresInit) {
  const FiniteSumProblem p = quadratic_sum(5, 2, 0.1, 20);
  OptimizerState state(Vector::Zero(2));
  EXPECT_THROW(saga_step(state, p), InvalidInput);
}

TEST(Svrg, AtAnchorDirectionIsFullGradient) {
  const FiniteSumProblem p = quadratic_sum(12, 3, 0.1, 21);
  OptimizerState state(Vector::Constant(3, 0.5), Stream(22));
  const Vector x = state.x;
  const double step = 0.05;
  svrg_round(state, p, 1, step);
  EXPECT_LE(((x - state.x) / step - p.gradient(x)).norm(), 1e-12);
  EXPECT_EQ(state.queries, 12 + 1);
}

TEST(Svrg, SingleSampleIsGd) {
  const FiniteSumProblem p(parse("1 1:1 2:0.5\n"), Loss::kLogistic, 0.1);
  OptimizerState svrg(Vector::Zero(2), Stream(23));
  OptimizerState gd(Vector::Zero(2));
  const double step = 0.3;
  for (int i = 0; i < 5; ++i) {
    svrg_round(svrg, p, 1, step);
    gd_step(gd, p, step);
  }
  EXPECT_LE((svrg.x - gd.x).norm(), 1e-14);
}

TEST(Svrg, ConvergesOnSmallQuadratic) {
  const FiniteSumProblem p = quadratic_sum(50, 10, 0.05, 24);
  const double optimum = p.value(reference_minimizer(p));
  OptimizerState state(Vector::Zero(10), Stream(25));
  for (int round = 0; round < 100; ++round) svrg_round(state, p);
  EXPECT_LE(gap(p, state.x, optimum), 1e-10);
}

TEST(Katyusha, ZeroMomentumIsSvrg) {
  const FiniteSumProblem p = quadratic_sum(30, 6, 0.05, 26);
  OptimizerState a(Vector::Zero(6), Stream(27));
  OptimizerState b(Vector::Zero(6), Stream(27));
  KatyushaParams params;
  params.tau1 = 0.0;
  params.tau2 = 0.0;
  params.step = 1.0 / (4.0 * p.smoothness());
  params.inner_length = 30;
  params.weighted_anchor = false;
  for (int round = 0; round < 5; ++round) {
    svrg_round(a, p);
    katyusha_round(b, p, params);
  }
  EXPECT_LE((a.x - b.x).norm(), 1e-12);
  EXPECT_EQ(a.queries, b.queries);
}

TEST(Katyusha, FixedPoint) {
  const FiniteSumProblem p = quadratic_sum(20, 4, 0.1, 28);
  const Vector x_star = reference_minimizer(p);
  OptimizerState state(x_star, Stream(29));
  katyusha_round(state, p, KatyushaParams::defaults(p));
  EXPECT_LE((state.x - x_star).norm(), 1e-10);
}

TEST(Katyusha, FasterThanSvrgWhenBadlyConditioned) {
  const int n = 50;
  // Column decay 2 keeps the data Gram matrix from supplying curvature above the regularizer.
  const FiniteSumProblem p = quadratic_sum_with_kappa(n, 10, 1.0 / (100.0 * n), 30, 2.0);
  const double optimum = p.value(reference_minimizer(p));
  const auto epochs_to = [&](auto&& round) {
    OptimizerState state(Vector::Zero(10), Stream(31));
    while (state.queries < 5000 * n) {
      round(state);
      if (gap(p, state.x, optimum) <= 1e-10) break;
    }
    return static_cast<double>(state.queries) / n;
  };
  const double svrg = epochs_to([&](OptimizerState& s) { svrg_round(s, p); });
  const KatyushaParams params = KatyushaParams::defaults(p);
  const double katyusha = epochs_to([&](OptimizerState& s) { katyusha_round(s, p, params); });
  EXPECT_LT(katyusha, 5000.0);
  EXPECT_LT(katyusha, svrg);
}

TEST(Optimizer, QueryAccountingMatchesSchedule) {
  const FiniteSumProblem p = quadratic_sum(37, 4, 0.1, 32);
  for (const Method m : {Method::kGd, Method::kSgd, Method::kAvgSgd, Method::kSaga, Method::kSvrg,
                         Method::kKatyusha}) {
    OptimizerConfig config;
    config.component_sampling = m == Method::kSgd || m == Method::kAvgSgd;
    Optimizer optimizer(m, p, Vector::Zero(4), config, Stream(33));
    for (const int k : {1, 3, 7}) {
      optimizer.restart(Vector::Ones(4));
      const std::int64_t before = optimizer.queries();
      for (int s = 0; s < k; ++s) ASSERT_TRUE(optimizer.advance());
      EXPECT_EQ(optimizer.queries() - before, optimizer.schedule().cost(k)) << to_string(m);
    }
  }
}

TEST(Optimizer, DeterministicGivenSeed) {
  const FiniteSumProblem p = quadratic_sum(25, 4, 0.1, 34);
  for (const Method m : {Method::kSgd, Method::kSaga, Method::kSvrg, Method::kKatyusha}) {
    OptimizerConfig config;
    config.component_sampling = true;
    Optimizer a(m, p, Vector::Zero(4), config, Stream(35));
    Optimizer b(m, p, Vector::Zero(4), config, Stream(35));
    for (int s = 0; s < 5; ++s) {
      a.advance();
      b.advance();
    }
    EXPECT_EQ(a.current(), b.current()) << to_string(m);
  }
}

TEST(Optimizer, AveragedSgdReportsMeanSinceRestart) {
  Stream rng(36);
  const QuadraticProblem p = make_synthetic_quadratic(5, {}, 1.0, rng);
  OptimizerConfig config;
  config.noise = {0.0, 0.1, NoiseFamily::kGaussian};
  config.steps_per_snapshot = 4;
  Optimizer avg(Method::kAvgSgd, p, p.start(), config, Stream(37));
  OptimizerState plain(p.start(), Stream(37));
  // The mean starts at the restart point.
  std::vector<Vector> trace{p.start()};
  for (int s = 0; s < 3; ++s) {
    avg.advance();
    for (int i = 0; i < 4; ++i) {
      sgd_step(plain, p, config.noise);
      trace.push_back(plain.x);
    }
  }
  EXPECT_LE((avg.current() - averaged_sgd(trace)).norm(), 1e-12);
}

TEST(Optimizer, RejectsMismatchedProblems) {
  Stream rng(38);
  const QuadraticProblem p = make_synthetic_quadratic(5, {}, 1.0, rng);
  EXPECT_THROW(Optimizer(Method::kSaga, p, p.start(), {}, Stream(1)), InvalidInput);
  EXPECT_THROW(Optimizer(Method::kGd, p, Vector::Zero(3), {}, Stream(1)), InvalidInput);
}

}  // namespace
