#include "rna/oracles.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace rna {

QuadraticProblem::QuadraticProblem(Vector eigenvalues, Matrix basis, Vector minimizer,
                                   Vector start)
    : eigenvalues_(std::move(eigenvalues)),
      basis_(std::move(basis)),
      minimizer_(std::move(minimizer)),
      start_(std::move(start)) {
  const Eigen::Index d = eigenvalues_.size();
  if (d == 0 || basis_.rows() != d || basis_.cols() != d || minimizer_.size() != d ||
      start_.size() != d) {
    throw InvalidInput("QuadraticProblem: inconsistent dimensions");
  }
  if ((eigenvalues_.array() <= 0.0).any()) {
    throw InvalidInput("QuadraticProblem: eigenvalues must be positive");
  }
  gram_ = basis_ * eigenvalues_.asDiagonal() * basis_.transpose();
  gram_ = 0.5 * (gram_ + gram_.transpose()).eval();
  design_ = basis_ * eigenvalues_.cwiseSqrt().asDiagonal() * basis_.transpose();
  target_ = design_ * minimizer_;
}

double QuadraticProblem::value(const Vector& x) const {
  const Vector e = x - minimizer_;
  return 0.5 * e.dot(gram_ * e);
}

Vector QuadraticProblem::gradient(const Vector& x) const {
  return gram_ * (x - minimizer_);
}

QuadraticProblem make_synthetic_quadratic(int d, const SpectrumSpec& spectrum, double radius,
                                          Stream& rng) {
  if (d < 2) throw InvalidInput("make_synthetic_quadratic: d must be >= 2");
  if (!(radius >= 0.0)) throw InvalidInput("make_synthetic_quadratic: radius must be >= 0");

  Vector eigenvalues(d);
  if (spectrum.kind == SpectrumKind::kUniform) {
    if (!(spectrum.kappa > 0.0 && spectrum.kappa < 1.0)) {
      throw InvalidInput("make_synthetic_quadratic: kappa must lie in (0, 1)");
    }
    for (int i = 0; i < d; ++i) eigenvalues[i] = rng.uniform(spectrum.kappa, 1.0);
    Eigen::Index lo = 0;
    Eigen::Index hi = 0;
    eigenvalues.minCoeff(&lo);
    eigenvalues.maxCoeff(&hi);
    if (lo == hi) hi = (lo + 1) % d;
    eigenvalues[lo] = spectrum.kappa;
    eigenvalues[hi] = 1.0;
  } else {
    for (int i = 0; i < d; ++i) eigenvalues[i] = 1.0 / static_cast<double>(i + 1);
  }

  Matrix gaussian(d, d);
  for (Eigen::Index j = 0; j < d; ++j) gaussian.col(j) = rng.normal_vector(d);
  Eigen::HouseholderQR<Matrix> qr(gaussian);
  Matrix basis = qr.householderQ() * Matrix::Identity(d, d);
  // Sign convention making the factorization (and thus Q) unique.
  const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < d; ++j) {
    if (r(j, j) < 0.0) basis.col(j) *= -1.0;
  }

  Vector minimizer = rng.normal_vector(d);
  Vector direction = rng.normal_vector(d);
  direction /= direction.norm();
  Vector start = minimizer + radius * direction;
  return QuadraticProblem(std::move(eigenvalues), std::move(basis), std::move(minimizer),
                          std::move(start));
}

Vector exact_gradient(const Problem& problem, const Vector& x) {
  return problem.gradient(x);
}

Vector NoiseModel::mean(Eigen::Index d) const {
  return Vector::Constant(d, nu / std::sqrt(static_cast<double>(d)));
}

Vector NoiseModel::sample(Eigen::Index d, Stream& rng) const {
  if (!(nu >= 0.0) || !(sigma >= 0.0)) throw InvalidInput("NoiseModel: nu and sigma must be >= 0");
  Vector out = mean(d);
  if (sigma == 0.0) return out;
  const double scale = sigma / std::sqrt(static_cast<double>(d));
  const double half_width = std::sqrt(3.0);  // unit variance on [-sqrt3, sqrt3]
  for (Eigen::Index i = 0; i < d; ++i) {
    const double unit =
        family == NoiseFamily::kGaussian ? rng.normal() : rng.uniform(-half_width, half_width);
    out[i] += scale * unit;
  }
  return out;
}

Vector noisy_gradient(const Problem& problem, const Vector& x, const NoiseModel& noise,
                      Stream& rng) {
  Vector g = problem.gradient(x);
  if (noise.nu == 0.0 && noise.sigma == 0.0) return g;
  g += noise.sample(problem.dimension(), rng);
  return g;
}

// ---------------------------------------------------------------------------
// libsvm text format

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <typename T>
bool parse_number(std::string_view token, T& out) {
  if (!token.empty() && token.front() == '+') token.remove_prefix(1);
  if (token.empty()) return false;
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), out);
  return ec == std::errc() && ptr == token.data() + token.size();
}

}  // namespace

Dataset parse_libsvm(std::istream& in) {
  std::vector<Eigen::Triplet<double>> entries;
  std::vector<double> labels;
  std::unordered_set<long> seen;
  long max_index = 0;

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view rest = trim(line);
    if (rest.empty()) continue;

    const auto row = static_cast<long>(labels.size());
    std::size_t pos = rest.find_first_of(" \t");
    double label = 0.0;
    if (!parse_number(rest.substr(0, pos), label) || !std::isfinite(label)) {
      throw ParseError("invalid label '" + std::string(rest.substr(0, pos)) + "'", line_no);
    }
    labels.push_back(label);
    seen.clear();

    while (pos != std::string_view::npos) {
      rest = trim(rest.substr(pos));
      if (rest.empty()) break;
      pos = rest.find_first_of(" \t");
      const std::string_view token = rest.substr(0, pos);
      const auto colon = token.find(':');
      long index = 0;
      double value = 0.0;
      if (colon == std::string_view::npos || !parse_number(token.substr(0, colon), index) ||
          !parse_number(token.substr(colon + 1), value)) {
        throw ParseError("malformed feature '" + std::string(token) + "'", line_no);
      }
      if (index < 1) throw ParseError("feature index must be >= 1", line_no);
      if (!std::isfinite(value)) throw ParseError("non-finite feature value", line_no);
      if (!seen.insert(index).second) {
        throw ParseError("duplicate feature index " + std::to_string(index), line_no);
      }
      max_index = std::max(max_index, index);
      entries.emplace_back(row, index - 1, value);
    }
  }
  if (labels.empty()) throw ParseError("dataset has no samples", line_no);

  Dataset data;
  data.rows.resize(static_cast<Eigen::Index>(labels.size()), max_index);
  data.rows.setFromTriplets(entries.begin(), entries.end());
  data.rows.makeCompressed();
  data.labels = Eigen::Map<const Vector>(labels.data(), static_cast<Eigen::Index>(labels.size()));
  return data;
}

Dataset load_libsvm(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("load_libsvm: cannot open " + path.string());
  return parse_libsvm(in);
}

namespace {

void append_shortest(std::string& out, double value) {
  char buffer[32];
  const auto [ptr, ec] = std::to_chars(buffer, buffer + sizeof(buffer), value);
  out.append(buffer, ptr);
}

}  // namespace

void write_libsvm(const Dataset& data, std::ostream& out) {
  std::string line;
  for (Eigen::Index i = 0; i < data.samples(); ++i) {
    line.clear();
    append_shortest(line, data.labels[i]);
    for (SparseRows::InnerIterator it(data.rows, i); it; ++it) {
      line += ' ';
      line += std::to_string(it.col() + 1);
      line += ':';
      append_shortest(line, it.value());
    }
    line += '\n';
    out << line;
  }
}

Dataset make_synthetic_dataset(int samples, int dimension, Stream& rng, double decay) {
  if (samples < 1 || dimension < 1) {
    throw InvalidInput("make_synthetic_dataset: samples and dimension must be positive");
  }
  std::vector<Eigen::Triplet<double>> entries;
  entries.reserve(static_cast<std::size_t>(samples) * static_cast<std::size_t>(dimension));
  Vector labels(samples);
  Vector row(dimension);
  for (int i = 0; i < samples; ++i) {
    for (int j = 0; j < dimension; ++j) row[j] = rng.normal() * std::pow(j + 1.0, -decay);
    row /= row.norm();
    for (int j = 0; j < dimension; ++j) entries.emplace_back(i, j, row[j]);
    labels[i] = rng.uniform() < 0.5 ? -1.0 : 1.0;
  }
  Dataset data;
  data.rows.resize(samples, dimension);
  data.rows.setFromTriplets(entries.begin(), entries.end());
  data.rows.makeCompressed();
  data.labels = std::move(labels);
  return data;
}

// ---------------------------------------------------------------------------
// Finite sums

FiniteSumProblem::FiniteSumProblem(Dataset data, Loss loss, double mu)
    : data_(std::move(data)), loss_(loss), mu_(mu) {
  if (data_.samples() == 0 || data_.dimension() == 0) {
    throw InvalidInput("FiniteSumProblem: empty dataset");
  }
  if (data_.labels.size() != data_.samples()) {
    throw InvalidInput("FiniteSumProblem: one label per row required");
  }
  if (!(mu >= 0.0) || !std::isfinite(mu)) {
    throw InvalidInput("FiniteSumProblem: mu must be finite and >= 0");
  }
  if (loss_ == Loss::kLogistic && ((data_.labels.array() != 1.0) &&
                                   (data_.labels.array() != -1.0)).any()) {
    throw InvalidInput("FiniteSumProblem: logistic loss needs +/-1 labels");
  }
  double max_norm = 0.0;
  for (Eigen::Index i = 0; i < data_.samples(); ++i) {
    max_norm = std::max(max_norm, data_.rows.row(i).squaredNorm());
  }
  loss_smoothness_ = loss_ == Loss::kLogistic ? max_norm / 4.0 : max_norm;
}

double FiniteSumProblem::margin(Eigen::Index i, const Vector& x) const {
  double z = 0.0;
  for (SparseRows::InnerIterator it(data_.rows, i); it; ++it) z += it.value() * x[it.col()];
  return z;
}

double FiniteSumProblem::derivative(Eigen::Index i, double z) const {
  const double y = data_.labels[i];
  if (loss_ == Loss::kQuadratic) return z - y;
  // -y * sigmoid(-y z), evaluated without overflow
  const double t = y * z;
  if (t >= 0.0) {
    const double e = std::exp(-t);
    return -y * e / (1.0 + e);
  }
  return -y / (1.0 + std::exp(t));
}

double FiniteSumProblem::component_loss(Eigen::Index i, double z) const {
  const double y = data_.labels[i];
  if (loss_ == Loss::kQuadratic) return 0.5 * (z - y) * (z - y);
  const double t = y * z;
  return t >= 0.0 ? std::log1p(std::exp(-t)) : -t + std::log1p(std::exp(t));
}

void FiniteSumProblem::add_row(Eigen::Index i, double scale, Vector& x) const {
  for (SparseRows::InnerIterator it(data_.rows, i); it; ++it) x[it.col()] += scale * it.value();
}

Vector FiniteSumProblem::average_rows(const Vector& per_sample) const {
  return (data_.rows.transpose() * per_sample) / static_cast<double>(data_.samples());
}

Vector FiniteSumProblem::derivatives(const Vector& x) const {
  const Vector z = data_.rows * x;
  Vector out(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) out[i] = derivative(i, z[i]);
  return out;
}

double FiniteSumProblem::value(const Vector& x) const {
  const Vector z = data_.rows * x;
  double total = 0.0;
  for (Eigen::Index i = 0; i < z.size(); ++i) total += component_loss(i, z[i]);
  return total / static_cast<double>(data_.samples()) + 0.5 * mu_ * x.squaredNorm();
}

Vector FiniteSumProblem::gradient(const Vector& x) const {
  return average_rows(derivatives(x)) + mu_ * x;
}

Vector component_gradient(const FiniteSumProblem& problem, Eigen::Index i, const Vector& x) {
  if (i < 0 || i >= problem.data().samples()) {
    throw InvalidInput("component_gradient: index " + std::to_string(i) + " out of range [0, " +
                       std::to_string(problem.data().samples()) + ")");
  }
  Vector g = problem.mu() * x;
  problem.add_row(i, problem.derivative(i, problem.margin(i, x)), g);
  return g;
}

double regime_kappa(Regime regime, Eigen::Index samples) {
  if (samples < 1) throw InvalidInput("regime_kappa: need at least one sample");
  const auto n = static_cast<double>(samples);
  switch (regime) {
    case Regime::kWell:
      return 100.0 / n;
    case Regime::kModerate:
      return 1.0 / n;
    case Regime::kBad:
      return 1.0 / (100.0 * n);
  }
  return 0.0;
}

FiniteSumProblem condition_setup(Dataset data, Loss loss, Regime regime) {
  const double kappa = regime_kappa(regime, data.samples());
  if (!(kappa < 1.0)) {
    throw InvalidInput("condition_setup: kappa = " + std::to_string(kappa) +
                       " is not below 1 for N = " + std::to_string(data.samples()));
  }
  // Probe the loss smoothness with mu = 0, then solve mu / (L_f + mu) = kappa.
  const FiniteSumProblem probe(data, loss, 0.0);
  const double mu = kappa * probe.loss_smoothness() / (1.0 - kappa);
  return FiniteSumProblem(std::move(data), loss, mu);
}

Vector reference_minimizer(const FiniteSumProblem& problem) {
  const Eigen::Index d = problem.dimension();
  const auto n = static_cast<double>(problem.samples());
  const SparseRows& a = problem.data().rows;
  const double target = 1e-12 * problem.smoothness();

  const auto hessian = [&](const Vector& x) {
    Vector weights = Vector::Ones(problem.samples());
    if (problem.loss() == Loss::kLogistic) {
      const Vector z = a * x;
      for (Eigen::Index i = 0; i < z.size(); ++i) {
        const double s = 1.0 / (1.0 + std::exp(-z[i]));
        weights[i] = s * (1.0 - s);
      }
    }
    const SparseRows weighted = weights.asDiagonal() * a;
    Matrix h = Matrix(a.transpose() * weighted) / n;
    h.diagonal().array() += problem.mu();
    return h;
  };

  Vector x = Vector::Zero(d);
  Vector g = problem.gradient(x);
  double value = problem.value(x);
  for (int iteration = 0; iteration < 100 && g.norm() > target; ++iteration) {
    const Vector step = hessian(x).ldlt().solve(-g);
    Vector candidate = x + step;
    Vector candidate_gradient = problem.gradient(candidate);
    double candidate_value = problem.value(candidate);
    // Near the optimum value differences drown in rounding, so a full step that
    // halves the gradient is taken without the Armijo test.
    if (!(candidate_gradient.norm() <= 0.5 * g.norm())) {
      double t = 1.0;
      while (!(candidate_value <= value + 1e-4 * t * g.dot(step)) && t > 1e-10) {
        t *= 0.5;
        candidate = x + t * step;
        candidate_value = problem.value(candidate);
      }
      candidate_gradient = problem.gradient(candidate);
      if (candidate_gradient.norm() >= g.norm() && candidate_value >= value) break;
    }
    x = std::move(candidate);
    g = candidate_gradient;
    value = candidate_value;
  }
  return x;
}

}  // namespace rna
