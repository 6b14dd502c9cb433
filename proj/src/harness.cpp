#include "rna/harness.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "rna/theory.hpp"

namespace rna {

namespace {

namespace pt = boost::property_tree;

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::stringstream stream(text);
  std::string item;
  while (std::getline(stream, item, sep)) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <typename T>
T get(const pt::ptree& section, const std::string& key, T fallback) {
  const auto node = section.get_child_optional(key);
  if (!node) return fallback;
  const std::string raw = trim(node->data());
  T value{};
  if constexpr (std::is_same_v<T, std::string>) {
    return raw;
  } else if constexpr (std::is_same_v<T, bool>) {
    if (raw == "true" || raw == "1" || raw == "yes") return true;
    if (raw == "false" || raw == "0" || raw == "no") return false;
    throw InvalidInput("key '" + key + "': expected a boolean, got '" + raw + "'");
  } else {
    const auto [ptr, ec] = std::from_chars(raw.data(), raw.data() + raw.size(), value);
    if (ec != std::errc() || ptr != raw.data() + raw.size()) {
      throw InvalidInput("key '" + key + "': cannot parse '" + raw + "'");
    }
    return value;
  }
}

void reject_unknown(const pt::ptree& section, const std::string& name,
                    const std::set<std::string>& allowed) {
  for (const auto& [key, child] : section) {
    if (!allowed.contains(key)) {
      throw InvalidInput("unknown key '" + key + "' in [" + name + "]");
    }
    if (!child.empty()) throw InvalidInput("nested value under '" + key + "'");
  }
}

pt::ptree read_ini(std::istream& in) {
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ParseError(e.message(), e.line());
  }
  return tree;
}

const pt::ptree& section_or_empty(const pt::ptree& tree, const std::string& name) {
  static const pt::ptree empty;
  const auto child = tree.get_child_optional(name);
  return child ? *child : empty;
}

ProblemKind parse_kind(const std::string& s) {
  if (s == "quadratic") return ProblemKind::kQuadratic;
  if (s == "finite-sum") return ProblemKind::kFiniteSum;
  if (s == "dataset") return ProblemKind::kDataset;
  throw InvalidInput("problem kind must be quadratic, finite-sum or dataset, got '" + s + "'");
}

Loss parse_loss(const std::string& s) {
  if (s == "quadratic") return Loss::kQuadratic;
  if (s == "logistic") return Loss::kLogistic;
  throw InvalidInput("loss must be quadratic or logistic, got '" + s + "'");
}

Regime parse_regime(const std::string& s) {
  if (s == "well") return Regime::kWell;
  if (s == "moderate") return Regime::kModerate;
  if (s == "bad") return Regime::kBad;
  throw InvalidInput("regime must be well, moderate or bad, got '" + s + "'");
}

LambdaStrategy parse_lambda(const std::string& s) {
  if (s == "grid") return LambdaStrategy::kGrid;
  if (s == "fixed") return LambdaStrategy::kFixed;
  if (s == "legacy") return LambdaStrategy::kLegacy;
  throw InvalidInput("lambda must be grid, fixed or legacy, got '" + s + "'");
}

// FNV-1a; a stable stream id per method label.
std::uint64_t label_hash(const std::string& label) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : label) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string format_double(double v) {
  char buffer[32];
  const auto [ptr, ec] = std::to_chars(buffer, buffer + sizeof(buffer), v);
  return std::string(buffer, ptr);
}

}  // namespace

std::string MethodSpec::label() const {
  return rna ? std::string("rna-") + to_string(method) : std::string(to_string(method));
}

MethodSpec parse_method_spec(std::string_view text) {
  constexpr std::string_view kPrefix = "rna-";
  MethodSpec spec;
  if (text.starts_with(kPrefix)) {
    spec.rna = true;
    text.remove_prefix(kPrefix.size());
  }
  spec.method = parse_method(text);
  return spec;
}

void ExperimentConfig::validate() const {
  if (methods.empty()) throw InvalidInput("config: at least one method is required");
  if (k < 1) throw InvalidInput("config: k must be >= 1");
  if (grid_size < 0) throw InvalidInput("config: grid_size must be >= 0");
  if (!(lambda_value > 0.0)) throw InvalidInput("config: lambda_value must be positive");
  if ((budget_epochs > 0.0) == (budget_queries > 0)) {
    throw InvalidInput("config: set exactly one positive budget (budget_epochs or budget_queries)");
  }
  if (budget_epochs < 0.0 || budget_queries < 0) throw InvalidInput("config: negative budget");
  if (seeds.empty()) throw InvalidInput("config: at least one seed is required");
  if (steps_per_snapshot < 0) throw InvalidInput("config: steps_per_snapshot must be >= 0");
  const ProblemConfig& p = problem;
  switch (p.kind) {
    case ProblemKind::kQuadratic:
      if (p.d < 2) throw InvalidInput("config: d must be >= 2");
      if (p.spectrum.kind == SpectrumKind::kUniform &&
          !(p.spectrum.kappa > 0.0 && p.spectrum.kappa < 1.0)) {
        throw InvalidInput("config: kappa must lie in (0, 1)");
      }
      if (!(p.radius >= 0.0)) throw InvalidInput("config: radius must be >= 0");
      break;
    case ProblemKind::kFiniteSum:
      if (p.samples < 1 || p.dimension < 1) {
        throw InvalidInput("config: samples and dimension must be positive");
      }
      break;
    case ProblemKind::kDataset:
      if (p.path.empty()) throw InvalidInput("config: dataset kind needs a path");
      break;
  }
  if (!(p.noise.nu >= 0.0) || !(p.noise.sigma >= 0.0)) {
    throw InvalidInput("config: nu and sigma must be >= 0");
  }
  for (const MethodSpec& m : methods) {
    const bool needs_sum =
        m.method == Method::kSaga || m.method == Method::kSvrg || m.method == Method::kKatyusha;
    if (needs_sum && p.kind == ProblemKind::kQuadratic) {
      throw InvalidInput(std::string("config: ") + to_string(m.method) +
                         " needs a finite-sum problem");
    }
  }
}

LambdaGrid ExperimentConfig::grid() const {
  switch (lambda) {
    case LambdaStrategy::kGrid:
      return LambdaGrid::geometric(grid_size > 0 ? grid_size : k);
    case LambdaStrategy::kFixed:
      return LambdaGrid::single(lambda_value);
    case LambdaStrategy::kLegacy:
      return LambdaGrid::single(lambda_value, LambdaScale::kLegacyInverse);
  }
  return LambdaGrid::geometric(k);
}

std::int64_t ExperimentConfig::budget(std::int64_t samples) const {
  if (budget_queries > 0) return budget_queries;
  return static_cast<std::int64_t>(std::llround(budget_epochs * static_cast<double>(samples)));
}

ExperimentConfig parse_config(std::istream& in) {
  const pt::ptree tree = read_ini(in);
  for (const auto& [name, child] : tree) {
    if (name != "problem" && name != "run" && name != "verify") {
      throw InvalidInput("unknown section [" + name + "]");
    }
  }
  const pt::ptree& problem = section_or_empty(tree, "problem");
  const pt::ptree& run = section_or_empty(tree, "run");
  reject_unknown(problem, "problem",
                 {"kind", "d", "spectrum", "kappa", "radius", "nu", "sigma", "noise", "samples",
                  "dimension", "decay", "path", "loss", "regime"});
  reject_unknown(run, "run",
                 {"methods", "k", "lambda", "lambda_value", "grid_size", "budget_epochs",
                  "budget_queries", "seeds", "seed_count", "experiment_seed", "output",
                  "evaluation_queries", "step", "steps_per_snapshot", "acc_step", "acc_momentum",
                  "acc_shift", "acc_averaging"});

  ExperimentConfig c;
  ProblemConfig& p = c.problem;
  p.kind = parse_kind(get<std::string>(problem, "kind", "quadratic"));
  p.d = get<int>(problem, "d", p.d);
  const std::string spectrum = get<std::string>(problem, "spectrum", "uniform");
  if (spectrum == "uniform") {
    p.spectrum.kind = SpectrumKind::kUniform;
  } else if (spectrum == "decay") {
    p.spectrum.kind = SpectrumKind::kDecay;
  } else {
    throw InvalidInput("spectrum must be uniform or decay, got '" + spectrum + "'");
  }
  p.spectrum.kappa = get<double>(problem, "kappa", p.spectrum.kappa);
  p.radius = get<double>(problem, "radius", p.radius);
  p.noise.nu = get<double>(problem, "nu", 0.0);
  p.noise.sigma = get<double>(problem, "sigma", 0.0);
  const std::string family = get<std::string>(problem, "noise", "gaussian");
  if (family == "gaussian") {
    p.noise.family = NoiseFamily::kGaussian;
  } else if (family == "uniform") {
    p.noise.family = NoiseFamily::kUniform;
  } else {
    throw InvalidInput("noise must be gaussian or uniform, got '" + family + "'");
  }
  p.samples = get<int>(problem, "samples", p.samples);
  p.dimension = get<int>(problem, "dimension", p.dimension);
  p.decay = get<double>(problem, "decay", p.decay);
  p.path = get<std::string>(problem, "path", "");
  p.loss = parse_loss(get<std::string>(problem, "loss", "quadratic"));
  p.regime = parse_regime(get<std::string>(problem, "regime", "moderate"));

  for (const std::string& m : split(get<std::string>(run, "methods", ""), ',')) {
    c.methods.push_back(parse_method_spec(m));
  }
  c.k = get<int>(run, "k", c.k);
  c.lambda = parse_lambda(get<std::string>(run, "lambda", "grid"));
  c.lambda_value = get<double>(run, "lambda_value", c.lambda_value);
  c.grid_size = get<int>(run, "grid_size", 0);
  c.budget_epochs = get<double>(run, "budget_epochs", 0.0);
  c.budget_queries = get<std::int64_t>(run, "budget_queries", 0);
  if (run.get_child_optional("seeds") && run.get_child_optional("seed_count")) {
    throw InvalidInput("config: give either seeds or seed_count, not both");
  }
  if (run.get_child_optional("seed_count")) {
    const int count = get<int>(run, "seed_count", 1);
    if (count < 1) throw InvalidInput("config: seed_count must be >= 1");
    c.seeds.clear();
    for (int i = 0; i < count; ++i) c.seeds.push_back(static_cast<std::uint64_t>(i));
  } else if (run.get_child_optional("seeds")) {
    c.seeds.clear();
    for (const std::string& s : split(get<std::string>(run, "seeds", ""), ',')) {
      std::uint64_t v = 0;
      const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      if (ec != std::errc() || ptr != s.data() + s.size()) {
        throw InvalidInput("config: bad seed '" + s + "'");
      }
      c.seeds.push_back(v);
    }
  }
  c.experiment_seed = get<std::uint64_t>(run, "experiment_seed", 0);
  c.output = get<std::string>(run, "output", "");
  c.evaluation_queries = get<std::int64_t>(run, "evaluation_queries", -1);
  c.step = get<double>(run, "step", 0.0);
  c.steps_per_snapshot = get<std::int64_t>(run, "steps_per_snapshot", 0);
  if (run.get_child_optional("acc_step") || run.get_child_optional("acc_momentum") ||
      run.get_child_optional("acc_shift") || run.get_child_optional("acc_averaging")) {
    AccSgdParams acc;
    acc.step = get<double>(run, "acc_step", 0.0);
    acc.momentum = get<double>(run, "acc_momentum", 0.0);
    acc.shift = get<double>(run, "acc_shift", acc.momentum);
    acc.averaging = get<bool>(run, "acc_averaging", false);
    c.acc = acc;
  }
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open config " + path.string());
  ExperimentConfig config = parse_config(in);
  if (!config.problem.path.empty() && config.problem.path.is_relative()) {
    config.problem.path = path.parent_path() / config.problem.path;
  }
  return config;
}

void write_record(std::ostream& out, const TraceRecord& r) {
  out << r.method << ',' << r.seed << ',' << format_double(r.epoch) << ',' << r.data_queries
      << ',' << format_double(r.wall_time_s) << ',' << format_double(r.objective_gap) << ','
      << to_string(r.status) << '\n';
}

std::vector<TraceRecord> read_trace(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || trim(line) != kTraceHeader) {
    throw ParseError("trace header must be '" + std::string(kTraceHeader) + "'", 1);
  }
  std::vector<TraceRecord> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream stream(line);
    std::string field;
    while (std::getline(stream, field, ',')) fields.push_back(field);
    if (fields.size() != 7) throw ParseError("expected 7 fields", line_no);
    TraceRecord r;
    r.method = fields[0];
    const auto number = [&](const std::string& s, auto& value) {
      const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
      if (ec != std::errc() || ptr != s.data() + s.size()) {
        throw ParseError("bad number '" + s + "'", line_no);
      }
    };
    number(fields[1], r.seed);
    number(fields[2], r.epoch);
    number(fields[3], r.data_queries);
    number(fields[4], r.wall_time_s);
    number(fields[5], r.objective_gap);
    if (fields[6] == "ok") {
      r.status = RunStatus::kOk;
    } else if (fields[6] == "diverged") {
      r.status = RunStatus::kDiverged;
    } else {
      throw ParseError("bad status '" + fields[6] + "'", line_no);
    }
    out.push_back(std::move(r));
  }
  return out;
}

ProblemInstance build_problem(const ProblemConfig& config, std::uint64_t experiment_seed,
                              std::uint64_t seed) {
  Stream rng = Stream::derive(experiment_seed, 0, seed);
  ProblemInstance out;
  if (config.kind == ProblemKind::kQuadratic) {
    auto quadratic = std::make_shared<QuadraticProblem>(
        make_synthetic_quadratic(config.d, config.spectrum, config.radius, rng));
    out.x0 = quadratic->start();
    out.optimum = 0.0;
    out.problem = std::move(quadratic);
    return out;
  }
  Dataset data = config.kind == ProblemKind::kFiniteSum
                     ? make_synthetic_dataset(config.samples, config.dimension, rng, config.decay)
                     : load_libsvm(config.path);
  auto sum = std::make_shared<FiniteSumProblem>(
      condition_setup(std::move(data), config.loss, config.regime));
  out.x0 = Vector::Zero(sum->dimension());
  out.optimum = sum->value(reference_minimizer(*sum));
  out.problem = std::move(sum);
  return out;
}

RunStatus run_cell(const ExperimentConfig& config, const ProblemInstance& instance,
                   const MethodSpec& method, std::uint64_t seed, const RecordSink& sink) {
  using Clock = std::chrono::steady_clock;
  const Problem& problem = *instance.problem;
  const auto samples = static_cast<double>(problem.samples());
  const std::string label = method.label();

  OptimizerConfig oc;
  oc.step = config.step;
  oc.steps_per_snapshot = config.steps_per_snapshot;
  oc.acc = config.acc;
  const bool sgd_family = method.method == Method::kSgd || method.method == Method::kAvgSgd;
  if (config.problem.kind == ProblemKind::kQuadratic || method.method == Method::kAccSgd) {
    oc.noise = config.problem.noise;
  }
  oc.component_sampling = config.problem.kind != ProblemKind::kQuadratic && sgd_family;
  Optimizer optimizer(method.method, problem, instance.x0, oc,
                      Stream::derive(config.experiment_seed, label_hash(label), seed));

  double elapsed = 0.0;
  const auto emit = [&](std::int64_t queries, const Vector& x, RunStatus status) {
    sink(TraceRecord{label, seed, static_cast<double>(queries) / samples, queries, elapsed,
                     problem.value(x) - instance.optimum, status});
  };
  emit(0, instance.x0, RunStatus::kOk);

  const std::int64_t budget = config.budget(problem.samples());
  if (!method.rna) {
    while (optimizer.queries() < budget) {
      const auto start = Clock::now();
      const bool ok = optimizer.advance();
      elapsed += std::chrono::duration<double>(Clock::now() - start).count();
      emit(optimizer.queries(), optimizer.current(), ok ? RunStatus::kOk : RunStatus::kDiverged);
      if (!ok) return RunStatus::kDiverged;
    }
    return RunStatus::kOk;
  }

  RestartOptions options{config.k, config.grid(), budget, config.evaluation_queries};
  const ObjectiveFn objective = [&problem](const Vector& x) { return problem.value(x); };
  double observer_time = 0.0;
  const auto loop_start = Clock::now();
  const auto observe = [&](const LoopSample& sample) {
    const auto start = Clock::now();
    elapsed = std::chrono::duration<double>(start - loop_start).count() - observer_time;
    emit(sample.queries, *sample.point, RunStatus::kOk);
    observer_time += std::chrono::duration<double>(Clock::now() - start).count();
  };
  const RestartTrace trace = restart_loop(optimizer, options, objective, observe);
  if (trace.status == RunStatus::kDiverged) {
    elapsed = std::chrono::duration<double>(Clock::now() - loop_start).count() - observer_time;
    emit(optimizer.queries(), optimizer.current(), RunStatus::kDiverged);
  }
  return trace.status;
}

void run_experiment(const ExperimentConfig& config, std::ostream& out) {
  config.validate();
  out << kTraceHeader << '\n' << std::flush;
  const auto sink = [&out](const TraceRecord& r) {
    write_record(out, r);
    out.flush();
  };
  // A dataset problem does not depend on the seed; build it (and x*) once.
  std::optional<ProblemInstance> shared;
  if (config.problem.kind == ProblemKind::kDataset) {
    shared = build_problem(config.problem, config.experiment_seed, 0);
  }
  std::map<std::uint64_t, ProblemInstance> per_seed;
  for (const std::uint64_t seed : config.seeds) {
    if (!shared) per_seed.emplace(seed, build_problem(config.problem, config.experiment_seed, seed));
  }
  for (const MethodSpec& method : config.methods) {
    for (const std::uint64_t seed : config.seeds) {
      run_cell(config, shared ? *shared : per_seed.at(seed), method, seed, sink);
    }
  }
}

std::vector<MethodSummary> summarize(const std::vector<TraceRecord>& records) {
  std::vector<std::string> order;
  std::map<std::string, std::map<std::uint64_t, std::vector<const TraceRecord*>>> groups;
  for (const TraceRecord& r : records) {
    if (!groups.contains(r.method)) order.push_back(r.method);
    groups[r.method][r.seed].push_back(&r);
  }

  constexpr double kInf = std::numeric_limits<double>::infinity();
  const auto median = [](std::vector<double> v) -> std::optional<double> {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    const double m = n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
    if (!std::isfinite(m)) return std::nullopt;
    return m;
  };

  std::vector<MethodSummary> out;
  for (const std::string& method : order) {
    MethodSummary summary{method, {}};
    const auto& seeds = groups[method];
    for (const double threshold : kSummaryThresholds) {
      ThresholdSummary t;
      t.threshold = threshold;
      t.seeds = static_cast<int>(seeds.size());
      std::vector<double> epochs;
      std::vector<double> queries;
      for (const auto& [seed, trace] : seeds) {
        double epoch = kInf;
        double query = kInf;
        // Records are scanned in file order; the first crossing counts.
        for (const TraceRecord* r : trace) {
          if (r->status == RunStatus::kOk && r->objective_gap <= threshold) {
            epoch = r->epoch;
            query = static_cast<double>(r->data_queries);
            ++t.reached;
            break;
          }
        }
        epochs.push_back(epoch);
        queries.push_back(query);
      }
      t.median_epoch = median(epochs);
      t.median_queries = median(queries);
      summary.thresholds.push_back(t);
    }
    out.push_back(std::move(summary));
  }
  return out;
}

void write_summary(std::ostream& out, const std::vector<MethodSummary>& summary) {
  out << "method,threshold,seeds,reached,median_epoch,median_queries\n";
  for (const MethodSummary& m : summary) {
    for (const ThresholdSummary& t : m.thresholds) {
      out << m.method << ',' << format_double(t.threshold) << ',' << t.seeds << ',' << t.reached
          << ',' << (t.median_epoch ? format_double(*t.median_epoch) : "") << ','
          << (t.median_queries ? format_double(*t.median_queries) : "") << '\n';
    }
  }
}

void VerifyConfig::validate() const {
  if (trials < 1) throw InvalidInput("verify: trials must be >= 1");
  if (d < 1) throw InvalidInput("verify: d must be >= 1");
  if (k < 0) throw InvalidInput("verify: k must be >= 0");
  if (!(kappa > 0.0 && kappa < 1.0)) throw InvalidInput("verify: kappa must lie in (0, 1)");
  if (!(sigma >= 0.0) || !(nu >= 0.0)) throw InvalidInput("verify: sigma and nu must be >= 0");
  if (!(radius > 0.0)) throw InvalidInput("verify: radius must be positive");
  if (!(lambda_factor >= 1.0)) throw InvalidInput("verify: lambda_factor must be >= 1");
}

VerifyConfig parse_verify_config(std::istream& in) {
  const pt::ptree tree = read_ini(in);
  const pt::ptree& verify = section_or_empty(tree, "verify");
  reject_unknown(verify, "verify",
                 {"trials", "d", "k", "kappa", "sigma", "nu", "radius", "lambda_factor", "seed"});
  VerifyConfig c;
  c.trials = get<int>(verify, "trials", c.trials);
  c.d = get<int>(verify, "d", c.d);
  c.k = get<int>(verify, "k", c.k);
  c.kappa = get<double>(verify, "kappa", c.kappa);
  c.sigma = get<double>(verify, "sigma", c.sigma);
  c.nu = get<double>(verify, "nu", c.nu);
  c.radius = get<double>(verify, "radius", c.radius);
  c.lambda_factor = get<double>(verify, "lambda_factor", c.lambda_factor);
  c.seed = get<std::uint64_t>(verify, "seed", c.seed);
  c.validate();
  return c;
}

std::vector<VerificationRow> verify_bounds(const VerifyConfig& config) {
  config.validate();
  std::vector<VerificationRow> rows;
  rows.reserve(static_cast<std::size_t>(config.trials) * 5);
  const NoiseModel noise{config.nu, config.sigma, NoiseFamily::kGaussian};

  for (int trial = 0; trial < config.trials; ++trial) {
    Stream rng = Stream::derive(config.seed, 1, static_cast<std::uint64_t>(trial));
    const int d = config.d;

    // Random G with spectrum in [0, 1 - kappa].
    Matrix gaussian(d, d);
    for (int j = 0; j < d; ++j) gaussian.col(j) = rng.normal_vector(d);
    const Matrix q = Eigen::HouseholderQR<Matrix>(gaussian).householderQ() * Matrix::Identity(d, d);
    Vector spectrum(d);
    for (int i = 0; i < d; ++i) spectrum[i] = rng.uniform(0.0, 1.0 - config.kappa);
    LinearizedModel model;
    model.g = q * spectrum.asDiagonal() * q.transpose();
    model.g = 0.5 * (model.g + model.g.transpose()).eval();
    model.fixed_point = rng.normal_vector(d);
    model.kappa = config.kappa;

    Vector direction = rng.normal_vector(d);
    const Vector x0 = model.fixed_point + config.radius * direction / direction.norm();
    const std::vector<Vector> linear = linearized_iterates(model, x0, config.k + 2);
    std::vector<Vector> eps;
    for (int i = 0; i <= config.k; ++i) eps.push_back(noise.sample(d, rng));
    const std::vector<Vector> perturbed = noisy_iterates(model, x0, eps);

    const IterateWindow linear_window{std::span<const Vector>(linear)};
    const IterateWindow perturbed_window{std::span<const Vector>(perturbed)};
    const ResidualMatrix r = compute_residuals(linear_window);
    const ResidualMatrix r_tilde = compute_residuals(perturbed_window);
    const double p_norm = spectral_norm(perturbation_matrix(r, r_tilde));
    const double lambda = config.lambda_factor * std::max(p_norm, 1e-12 * r.squaredNorm());

    const StabilityCheck stability = check_stability(linear_window, perturbed_window, lambda);
    rows.push_back({"stability", trial, stability.lhs, stability.rhs});

    rows.push_back({"nonlinearity", trial, stability.c_tilde.norm(),
                    nonlinearity_bound(r_tilde, lambda)});

    const double r0 = (x0 - model.fixed_point).norm();
    Vector extrapolated = Vector::Zero(d);
    for (int i = 0; i <= config.k; ++i) {
      extrapolated += stability.c[i] * linear[static_cast<std::size_t>(i)];
    }
    rows.push_back({"acceleration", trial, (extrapolated - model.fixed_point).norm(),
                    acceleration_bound(config.kappa, config.k, lambda / (r0 * r0), r0,
                                       stability.c.norm())});

    const double delta = spectral_norm(r_tilde - r);
    const double r_norm = spectral_norm(r);
    rows.push_back({"perturbation", trial, p_norm, 2.0 * delta * r_norm + delta * delta});

    const Matrix e = noise_matrix(std::span<const Vector>(linear).first(config.k + 1),
                                  std::span<const Vector>(perturbed).first(config.k + 1));
    rows.push_back({"noise_matrix", trial, spectral_norm(e), e.colwise().norm().sum()});
  }
  return rows;
}

void write_verification(std::ostream& out, const std::vector<VerificationRow>& rows) {
  out << kVerifyHeader << '\n';
  for (const VerificationRow& row : rows) {
    out << row.quantity << ',' << row.trial << ',' << format_double(row.lhs) << ','
        << format_double(row.rhs) << ',' << format_double(row.margin()) << '\n';
  }
}

}  // namespace rna
