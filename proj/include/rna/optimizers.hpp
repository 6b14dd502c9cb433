#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "rna/extrapolation.hpp"
#include "rna/oracles.hpp"
#include "rna/random.hpp"

namespace rna {

enum class Method { kGd, kSgd, kAvgSgd, kAccSgd, kSaga, kSvrg, kKatyusha };

const char* to_string(Method method);
/// "gd", "sgd", "avg-sgd", "acc-sgd", "saga", "svrg", "katyusha".
Method parse_method(std::string_view name);

/// Query cost of collecting snapshots: setup_queries once after each restart,
/// then queries_per_snapshot for each snapshot.
struct SnapshotSchedule {
  Method method = Method::kSgd;
  std::int64_t setup_queries = 0;
  std::int64_t queries_per_snapshot = 0;

  /// Queries for k snapshots after a restart: kN, (k+1)N, 2kN, 3kN.
  std::int64_t cost(int k) const { return setup_queries + k * queries_per_snapshot; }
};

/// Default schedules for a finite sum with N samples. SGD-type methods take a
/// snapshot every N sampled steps, GD every full step, SAGA every N steps after
/// an N-query table init, SVRG and Katyusha once per outer round.
SnapshotSchedule snapshot_schedule(Method method, std::int64_t samples);

/// Everything a method carries between steps. Fields unused by a method stay
/// empty.
struct OptimizerState {
  explicit OptimizerState(Vector x0, Stream rng = Stream());

  Vector x;
  Vector previous;            // acc-sgd: x_{t-1}
  Vector z;                   // katyusha mirror sequence
  Vector anchor;              // svrg / katyusha
  Vector anchor_derivatives;  // per-sample loss derivatives at the anchor
  Vector anchor_gradient;     // loss part of grad F at the anchor
  Vector table;               // saga: one derivative per sample
  Vector table_mean;          // saga: (1/N) sum_i table_i a_i
  std::int64_t queries = 0;
  Stream rng;
  RunStatus status = RunStatus::kOk;
};

/// x <- x - step grad F(x); step 0 means 1/L. Costs one full pass.
bool gd_step(OptimizerState& state, const Problem& problem, double step = 0.0);

/// Additive-noise oracle: x <- x - step (grad F(x) + eps). Costs one full pass
/// (a single query for synthetic problems).
bool sgd_step(OptimizerState& state, const Problem& problem, const NoiseModel& noise,
              double step = 0.0);
/// Sampling oracle: x <- x - step (grad f_i(x) + mu x), i uniform. One query.
bool sgd_step(OptimizerState& state, const FiniteSumProblem& problem, double step = 0.0);

/// Arithmetic mean of a stored trace.
Vector averaged_sgd(std::span<const Vector> trace);

/// Running mean, updated one iterate at a time.
class RunningMean {
 public:
  void reset() { count_ = 0; }
  void add(const Vector& x);
  const Vector& value() const { return mean_; }
  std::int64_t count() const { return count_; }

 private:
  Vector mean_;
  std::int64_t count_ = 0;
};

/// x+ = x + momentum (x - x_prev) - step grad(x + shift (x - x_prev)).
struct AccSgdParams {
  double step = 0.0;
  double momentum = 0.0;
  double shift = 0.0;
  /// Report the running mean of the iterates instead of the last one.
  bool averaging = false;

  /// Constant momentum (1 - sqrt k)/(1 + sqrt k), step 1/L.
  static AccSgdParams nesterov(const Problem& problem);
};

bool acc_sgd_step(OptimizerState& state, const Problem& problem, const NoiseModel& noise,
                  const AccSgdParams& params);

/// Fills the SAGA table at the current point. N queries.
void saga_init(OptimizerState& state, const FiniteSumProblem& problem);
/// One SAGA step with step size 1/(3L) by default. One query.
bool saga_step(OptimizerState& state, const FiniteSumProblem& problem, double step = 0.0);

/// Anchor at the current point (N queries), then inner_length variance-reduced
/// steps (one query each). inner_length 0 means N; step 0 means 1/(4L).
bool svrg_round(OptimizerState& state, const FiniteSumProblem& problem,
                std::int64_t inner_length = 0, double step = 0.0);

struct KatyushaParams {
  double tau1 = 0.5;
  double tau2 = 0.5;
  /// Mirror step; 1/(3 tau1 L) by default.
  double alpha = 0.0;
  /// Gradient step for y; 1/(3L) by default.
  double step = 0.0;
  /// Inner iterations; 2N by default, two gradient calls each.
  std::int64_t inner_length = 0;
  /// New anchor = (1 + alpha mu)^j-weighted mean of the y iterates. When false
  /// the last y becomes the anchor.
  bool weighted_anchor = true;

  /// tau2 = 1/2, tau1 = min(sqrt(N kappa)/2, 1/2).
  static KatyushaParams defaults(const FiniteSumProblem& problem);
};

/// One outer round. The state's x is the anchor on exit. Costs N queries for
/// the anchor gradient plus one per inner step (anchor derivatives are stored).
bool katyusha_round(OptimizerState& state, const FiniteSumProblem& problem,
                    const KatyushaParams& params);

struct OptimizerConfig {
  /// 0 selects the method default.
  double step = 0.0;
  /// Oracle noise for the additive SGD family.
  NoiseModel noise;
  /// SGD family on a finite sum samples components instead of adding noise.
  bool component_sampling = false;
  /// Steps between snapshots for the SGD family and GD; 0 means N in sampling
  /// mode and 1 otherwise.
  std::int64_t steps_per_snapshot = 0;
  std::optional<AccSgdParams> acc;
  std::optional<KatyushaParams> katyusha;
};

/// A method wrapped as a restartable snapshot source.
class Optimizer : public SnapshotSource {
 public:
  Optimizer(Method method, const Problem& problem, const Vector& x0, OptimizerConfig config,
            Stream rng);

  void restart(const Vector& x) override;
  bool advance() override;
  const Vector& current() const override;
  std::int64_t queries() const override { return state_.queries; }
  std::int64_t pass_queries() const override { return problem_.samples(); }

  Method method() const { return method_; }
  SnapshotSchedule schedule() const;
  const OptimizerState& state() const { return state_; }
  RunStatus status() const { return state_.status; }

 private:
  bool step_once();
  const FiniteSumProblem& finite_sum() const;

  Method method_;
  const Problem& problem_;
  const FiniteSumProblem* finite_sum_;
  OptimizerConfig config_;
  OptimizerState state_;
  RunningMean mean_;
  bool needs_setup_ = false;
};

}  // namespace rna
