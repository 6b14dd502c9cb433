#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "rna/extrapolation.hpp"
#include "rna/optimizers.hpp"
#include "rna/oracles.hpp"

namespace rna {

enum class ProblemKind {
  /// Synthetic quadratic with the additive-noise oracle.
  kQuadratic,
  /// Synthetic dataset wrapped as a finite sum.
  kFiniteSum,
  /// libsvm file wrapped as a finite sum.
  kDataset,
};

struct ProblemConfig {
  ProblemKind kind = ProblemKind::kQuadratic;
  // quadratic
  int d = 500;
  SpectrumSpec spectrum;
  double radius = 1e4;
  NoiseModel noise;
  // finite sums
  int samples = 1000;
  int dimension = 200;
  double decay = 2.0;
  std::filesystem::path path;
  Loss loss = Loss::kQuadratic;
  Regime regime = Regime::kModerate;
};

enum class LambdaStrategy {
  /// Geometric grid of grid_size relative values.
  kGrid,
  /// One relative value times ||R~||_F^2.
  kFixed,
  /// lambda = ||R~^T R~|| / lambda_value.
  kLegacy,
};

struct MethodSpec {
  Method method = Method::kSgd;
  bool rna = false;

  /// "saga" or "rna-saga".
  std::string label() const;
};

MethodSpec parse_method_spec(std::string_view text);

struct ExperimentConfig {
  ProblemConfig problem;
  std::vector<MethodSpec> methods;
  int k = 10;
  LambdaStrategy lambda = LambdaStrategy::kGrid;
  double lambda_value = 1e-6;
  /// 0 means k.
  int grid_size = 0;
  /// Exactly one of the two budgets is positive after validation.
  double budget_epochs = 0.0;
  std::int64_t budget_queries = 0;
  std::vector<std::uint64_t> seeds{0};
  std::uint64_t experiment_seed = 0;
  std::filesystem::path output;
  /// Queries charged per grid search; negative means one data pass.
  std::int64_t evaluation_queries = -1;
  /// Optimizer knobs shared by every method.
  double step = 0.0;
  std::int64_t steps_per_snapshot = 0;
  std::optional<AccSgdParams> acc;

  /// Throws InvalidInput on an inconsistent configuration.
  void validate() const;
  LambdaGrid grid() const;
  std::int64_t budget(std::int64_t samples) const;
};

/// INI text with [problem] and [run] sections; unknown keys are rejected.
ExperimentConfig parse_config(std::istream& in);
ExperimentConfig load_config(const std::filesystem::path& path);

struct TraceRecord {
  std::string method;
  std::uint64_t seed = 0;
  double epoch = 0.0;
  std::int64_t data_queries = 0;
  double wall_time_s = 0.0;
  double objective_gap = 0.0;
  RunStatus status = RunStatus::kOk;
};

inline constexpr const char* kTraceHeader =
    "method,seed,epoch,data_queries,wall_time_s,objective_gap,status";

void write_record(std::ostream& out, const TraceRecord& record);
/// Parses a trace written by run_experiment; the header must match exactly.
std::vector<TraceRecord> read_trace(std::istream& in);

/// A problem built for one seed, with its starting point and optimal value.
struct ProblemInstance {
  std::shared_ptr<const Problem> problem;
  Vector x0;
  double optimum = 0.0;
};

ProblemInstance build_problem(const ProblemConfig& config, std::uint64_t experiment_seed,
                              std::uint64_t seed);

using RecordSink = std::function<void(const TraceRecord&)>;

/// Runs one (method, seed) cell and emits a record at the start point and at
/// every snapshot and restart.
RunStatus run_cell(const ExperimentConfig& config, const ProblemInstance& instance,
                   const MethodSpec& method, std::uint64_t seed, const RecordSink& sink);

/// Every cell in order (methods outer, seeds inner); the header, then one line
/// per record, flushed as written.
void run_experiment(const ExperimentConfig& config, std::ostream& out);

inline constexpr double kSummaryThresholds[] = {1e-2, 1e-4, 1e-6, 1e-8};

struct ThresholdSummary {
  double threshold = 0.0;
  int seeds = 0;
  int reached = 0;
  /// Medians over seeds; empty unless more than half the seeds crossed.
  std::optional<double> median_epoch;
  std::optional<double> median_queries;
};

struct MethodSummary {
  std::string method;
  std::vector<ThresholdSummary> thresholds;
};

/// First crossing of each gap threshold per (method, seed), then medians.
std::vector<MethodSummary> summarize(const std::vector<TraceRecord>& records);
void write_summary(std::ostream& out, const std::vector<MethodSummary>& summary);

struct VerifyConfig {
  int trials = 100;
  int d = 20;
  int k = 5;
  double kappa = 0.1;
  double sigma = 1e-3;
  double nu = 0.0;
  double radius = 1.0;
  /// lambda = lambda_factor * max(||P||, floor), floor = 1e-12 ||R||_F^2.
  double lambda_factor = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
};

/// [verify] section of an INI file.
VerifyConfig parse_verify_config(std::istream& in);

struct VerificationRow {
  std::string quantity;
  int trial = 0;
  double lhs = 0.0;
  double rhs = 0.0;
  double margin() const { return rhs - lhs; }
};

inline constexpr const char* kVerifyHeader = "quantity,trial,lhs,rhs,margin";

/// Five rows per trial: stability, nonlinearity, acceleration, perturbation,
/// noise_matrix.
std::vector<VerificationRow> verify_bounds(const VerifyConfig& config);
void write_verification(std::ostream& out, const std::vector<VerificationRow>& rows);

}  // namespace rna
