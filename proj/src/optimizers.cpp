#include "rna/optimizers.hpp"

#include <array>
#include <cmath>
#include <utility>

namespace rna {

namespace {

constexpr std::array<std::pair<Method, const char*>, 7> kMethodNames{{
    {Method::kGd, "gd"},
    {Method::kSgd, "sgd"},
    {Method::kAvgSgd, "avg-sgd"},
    {Method::kAccSgd, "acc-sgd"},
    {Method::kSaga, "saga"},
    {Method::kSvrg, "svrg"},
    {Method::kKatyusha, "katyusha"},
}};

bool finish(OptimizerState& state) {
  if (is_diverged(state.x)) {
    state.status = RunStatus::kDiverged;
    return false;
  }
  return true;
}

}  // namespace

const char* to_string(Method method) {
  for (const auto& [m, name] : kMethodNames) {
    if (m == method) return name;
  }
  return "?";
}

Method parse_method(std::string_view name) {
  for (const auto& [m, text] : kMethodNames) {
    if (name == text) return m;
  }
  throw InvalidInput("unknown method '" + std::string(name) + "'");
}

SnapshotSchedule snapshot_schedule(Method method, std::int64_t samples) {
  if (samples < 1) throw InvalidInput("snapshot_schedule: N must be positive");
  switch (method) {
    case Method::kSaga:
      return {method, samples, samples};
    case Method::kSvrg:
      return {method, 0, 2 * samples};
    case Method::kKatyusha:
      return {method, 0, 3 * samples};
    default:
      return {method, 0, samples};
  }
}

OptimizerState::OptimizerState(Vector x0, Stream rng_in)
    : x(std::move(x0)), previous(x), rng(rng_in) {}

bool gd_step(OptimizerState& state, const Problem& problem, double step) {
  const double h = step > 0.0 ? step : 1.0 / problem.smoothness();
  state.x -= h * problem.gradient(state.x);
  state.queries += problem.samples();
  return finish(state);
}

bool sgd_step(OptimizerState& state, const Problem& problem, const NoiseModel& noise,
              double step) {
  const double h = step > 0.0 ? step : 1.0 / problem.smoothness();
  state.x -= h * noisy_gradient(problem, state.x, noise, state.rng);
  state.queries += problem.samples();
  return finish(state);
}

bool sgd_step(OptimizerState& state, const FiniteSumProblem& problem, double step) {
  const double h = step > 0.0 ? step : 1.0 / problem.smoothness();
  const auto i = static_cast<Eigen::Index>(state.rng.index(problem.data().samples()));
  const double g = problem.derivative(i, problem.margin(i, state.x));
  state.x *= 1.0 - h * problem.mu();
  problem.add_row(i, -h * g, state.x);
  state.queries += 1;
  return finish(state);
}

Vector averaged_sgd(std::span<const Vector> trace) {
  if (trace.empty()) throw InvalidInput("averaged_sgd: empty trace");
  RunningMean mean;
  for (const Vector& x : trace) mean.add(x);
  return mean.value();
}

void RunningMean::add(const Vector& x) {
  ++count_;
  if (count_ == 1) {
    mean_ = x;
    return;
  }
  mean_ += (x - mean_) / static_cast<double>(count_);
}

AccSgdParams AccSgdParams::nesterov(const Problem& problem) {
  const double root = std::sqrt(problem.condition());
  const double beta = (1.0 - root) / (1.0 + root);
  return AccSgdParams{1.0 / problem.smoothness(), beta, beta, false};
}

bool acc_sgd_step(OptimizerState& state, const Problem& problem, const NoiseModel& noise,
                  const AccSgdParams& params) {
  const double h = params.step > 0.0 ? params.step : 1.0 / problem.smoothness();
  if (state.previous.size() != state.x.size()) state.previous = state.x;
  const Vector velocity = state.x - state.previous;
  const Vector probe = state.x + params.shift * velocity;
  Vector next = state.x + params.momentum * velocity -
                h * noisy_gradient(problem, probe, noise, state.rng);
  state.previous = std::move(state.x);
  state.x = std::move(next);
  state.queries += problem.samples();
  return finish(state);
}

void saga_init(OptimizerState& state, const FiniteSumProblem& problem) {
  state.table = problem.derivatives(state.x);
  state.table_mean = problem.average_rows(state.table);
  state.queries += problem.samples();
}

bool saga_step(OptimizerState& state, const FiniteSumProblem& problem, double step) {
  const Eigen::Index n = problem.data().samples();
  if (state.table.size() != n) throw InvalidInput("saga_step: table not initialized");
  const double h = step > 0.0 ? step : 1.0 / (3.0 * problem.smoothness());
  const auto i = static_cast<Eigen::Index>(state.rng.index(n));
  const double fresh = problem.derivative(i, problem.margin(i, state.x));
  const double change = fresh - state.table[i];

  // direction = (fresh - old) a_i + table_mean + mu x
  Vector direction = state.table_mean + problem.mu() * state.x;
  problem.add_row(i, change, direction);
  state.x -= h * direction;

  problem.add_row(i, change / static_cast<double>(n), state.table_mean);
  state.table[i] = fresh;
  state.queries += 1;
  return finish(state);
}

namespace {

void set_anchor(OptimizerState& state, const FiniteSumProblem& problem, const Vector& at) {
  state.anchor = at;
  state.anchor_derivatives = problem.derivatives(at);
  state.anchor_gradient = problem.average_rows(state.anchor_derivatives);
  state.queries += problem.samples();
}

// grad f_i(x) - grad f_i(anchor) + grad F(anchor), ridge included exactly.
Vector variance_reduced(OptimizerState& state, const FiniteSumProblem& problem,
                        const Vector& x) {
  const auto i = static_cast<Eigen::Index>(state.rng.index(problem.data().samples()));
  const double fresh = problem.derivative(i, problem.margin(i, x));
  Vector g = state.anchor_gradient + problem.mu() * x;
  problem.add_row(i, fresh - state.anchor_derivatives[i], g);
  state.queries += 1;
  return g;
}

}  // namespace

bool svrg_round(OptimizerState& state, const FiniteSumProblem& problem,
                std::int64_t inner_length, double step) {
  const std::int64_t m = inner_length > 0 ? inner_length : problem.samples();
  const double h = step > 0.0 ? step : 1.0 / (4.0 * problem.smoothness());
  set_anchor(state, problem, state.x);
  for (std::int64_t j = 0; j < m; ++j) {
    state.x -= h * variance_reduced(state, problem, state.x);
    if (!finish(state)) return false;
  }
  return true;
}

KatyushaParams KatyushaParams::defaults(const FiniteSumProblem& problem) {
  KatyushaParams p;
  p.tau2 = 0.5;
  p.tau1 = std::min(std::sqrt(static_cast<double>(problem.samples()) * problem.condition()) / 2.0,
                    0.5);
  p.alpha = 1.0 / (3.0 * p.tau1 * problem.smoothness());
  p.step = 1.0 / (3.0 * problem.smoothness());
  p.inner_length = 2 * problem.samples();
  return p;
}

bool katyusha_round(OptimizerState& state, const FiniteSumProblem& problem,
                    const KatyushaParams& params) {
  const std::int64_t m = params.inner_length > 0 ? params.inner_length : 2 * problem.samples();
  const double step = params.step > 0.0 ? params.step : 1.0 / (3.0 * problem.smoothness());
  const double alpha = params.alpha > 0.0 ? params.alpha
                       : params.tau1 > 0.0 ? 1.0 / (3.0 * params.tau1 * problem.smoothness())
                                           : 0.0;
  if (state.z.size() != state.x.size()) state.z = state.x;

  // state.x plays y; the anchor is the round's starting point.
  set_anchor(state, problem, state.x);
  const double growth = 1.0 + alpha * problem.mu();
  double weight = 1.0;
  double weight_sum = 0.0;
  Vector weighted = Vector::Zero(state.x.size());

  for (std::int64_t j = 0; j < m; ++j) {
    const Vector point = params.tau1 * state.z + params.tau2 * state.anchor +
                         (1.0 - params.tau1 - params.tau2) * state.x;
    const Vector g = variance_reduced(state, problem, point);
    if (params.tau1 > 0.0) state.z -= alpha * g;
    state.x = point - step * g;
    if (!finish(state)) return false;
    if (params.weighted_anchor) {
      weighted += weight * state.x;
      weight_sum += weight;
      weight *= growth;
    }
  }
  if (params.weighted_anchor) state.x = weighted / weight_sum;
  return finish(state);
}

Optimizer::Optimizer(Method method, const Problem& problem, const Vector& x0,
                     OptimizerConfig config, Stream rng)
    : method_(method),
      problem_(problem),
      finite_sum_(dynamic_cast<const FiniteSumProblem*>(&problem)),
      config_(std::move(config)),
      state_(x0, rng) {
  if (x0.size() != problem.dimension()) {
    throw InvalidInput("Optimizer: x0 has dimension " + std::to_string(x0.size()) +
                       ", problem has " + std::to_string(problem.dimension()));
  }
  const bool needs_finite_sum = method == Method::kSaga || method == Method::kSvrg ||
                                method == Method::kKatyusha || config_.component_sampling;
  if (needs_finite_sum && finite_sum_ == nullptr) {
    throw InvalidInput(std::string(to_string(method)) + " needs a finite-sum problem");
  }
  if (config_.component_sampling && method == Method::kAccSgd) {
    throw InvalidInput("acc-sgd supports the additive-noise oracle only");
  }
  if (config_.steps_per_snapshot < 0) {
    throw InvalidInput("Optimizer: steps_per_snapshot must be >= 0");
  }
  if (config_.steps_per_snapshot == 0) {
    config_.steps_per_snapshot = config_.component_sampling ? problem.samples() : 1;
  }
  if (method == Method::kAccSgd && !config_.acc) config_.acc = AccSgdParams::nesterov(problem);
  if (method == Method::kKatyusha && !config_.katyusha) {
    config_.katyusha = KatyushaParams::defaults(*finite_sum_);
  }
  restart(x0);
}

const FiniteSumProblem& Optimizer::finite_sum() const { return *finite_sum_; }

void Optimizer::restart(const Vector& x) {
  state_.x = x;
  state_.previous = x;
  state_.z = x;
  state_.status = RunStatus::kOk;
  mean_.reset();
  mean_.add(x);
  needs_setup_ = method_ == Method::kSaga;
}

const Vector& Optimizer::current() const {
  const bool averaged = method_ == Method::kAvgSgd ||
                        (method_ == Method::kAccSgd && config_.acc->averaging);
  return averaged ? mean_.value() : state_.x;
}

bool Optimizer::step_once() {
  switch (method_) {
    case Method::kGd:
      return gd_step(state_, problem_, config_.step);
    case Method::kSgd:
    case Method::kAvgSgd:
      return config_.component_sampling ? sgd_step(state_, finite_sum(), config_.step)
                                        : sgd_step(state_, problem_, config_.noise, config_.step);
    case Method::kAccSgd:
      return acc_sgd_step(state_, problem_, config_.noise, *config_.acc);
    case Method::kSaga:
      return saga_step(state_, finite_sum(), config_.step);
    case Method::kSvrg:
      return svrg_round(state_, finite_sum(), 0, config_.step);
    case Method::kKatyusha:
      return katyusha_round(state_, finite_sum(), *config_.katyusha);
  }
  return false;
}

bool Optimizer::advance() {
  if (state_.status == RunStatus::kDiverged) return false;
  if (needs_setup_) {
    saga_init(state_, finite_sum());
    needs_setup_ = false;
  }
  const bool multi_step =
      method_ == Method::kSgd || method_ == Method::kAvgSgd || method_ == Method::kAccSgd ||
      method_ == Method::kSaga;
  // SAGA takes N sampled steps per snapshot; GD, SVRG and Katyusha one update.
  const std::int64_t steps = method_ == Method::kSaga ? problem_.samples()
                             : multi_step            ? config_.steps_per_snapshot
                                                     : 1;
  for (std::int64_t s = 0; s < steps; ++s) {
    if (!step_once()) return false;
    const bool averaged = method_ == Method::kAvgSgd ||
                          (method_ == Method::kAccSgd && config_.acc->averaging);
    if (averaged) mean_.add(state_.x);
  }
  return true;
}

SnapshotSchedule Optimizer::schedule() const {
  switch (method_) {
    case Method::kSaga:
    case Method::kSvrg:
    case Method::kKatyusha:
    case Method::kGd:
      return snapshot_schedule(method_, problem_.samples());
    default: {
      const std::int64_t per_step = config_.component_sampling ? 1 : problem_.samples();
      return {method_, 0, config_.steps_per_snapshot * per_step};
    }
  }
}

}  // namespace rna
