// Regularized Chebyshev problem
//
//   min_{c : 1^T c = 1}  max_j (v_j^T c)^2 + alpha ||c||^2
//
// solved in epigraph form, min s^2 + alpha ||c||^2 s.t. -s <= p(x_j) <= s, by a
// primal-dual interior-point method on a small active set of grid points that
// an exchange loop grows until no grid point is violated. p is represented in
// the shifted Chebyshev basis of [0, 1 - kappa] for conditioning; the penalty
// is still on the monomial coefficients.

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "rna/theory.hpp"

namespace rna {

namespace {

// Row j holds T_0..T_k at the point t_j in [-1, 1].
Matrix chebyshev_rows(const Vector& t, int k) {
  Matrix out(t.size(), k + 1);
  out.col(0).setOnes();
  if (k >= 1) out.col(1) = t;
  for (int i = 2; i <= k; ++i) {
    out.col(i) = 2.0 * t.cwiseProduct(out.col(i - 1)) - out.col(i - 2);
  }
  return out;
}

// Column i: monomial coefficients of T_i(2x/h - 1).
Matrix monomial_transform(int k, double h) {
  Matrix out = Matrix::Zero(k + 1, k + 1);
  out(0, 0) = 1.0;
  if (k >= 1) {
    out(0, 1) = -1.0;
    out(1, 1) = 2.0 / h;
  }
  for (int i = 2; i <= k; ++i) {
    // 2 (2x/h - 1) T_{i-1} - T_{i-2}
    for (int d = 0; d <= k; ++d) {
      double v = -2.0 * out(d, i - 1) - out(d, i - 2);
      if (d > 0) v += (4.0 / h) * out(d - 1, i - 1);
      out(d, i) = v;
    }
  }
  return out;
}

struct QpSolution {
  Vector y;
  double nu = 0.0;
  bool finite = true;
};

// min 1/2 y^T G y  s.t.  e^T y = 1,  A y >= 0, Mehrotra predictor-corrector.
QpSolution solve_qp(const Matrix& g, const Matrix& a, const Vector& e, const Vector& start) {
  const Eigen::Index n = g.rows();
  const Eigen::Index m = a.rows();
  Vector y = start;
  Vector z = a * y;
  Vector lam = Vector::Ones(m);
  double nu = 0.0;
  QpSolution best{y, nu, true};

  const auto max_step = [](const Vector& v, const Vector& dv) {
    double step = 1.0;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      if (dv[i] < 0.0) step = std::min(step, -v[i] / dv[i]);
    }
    return step;
  };

  for (int iteration = 0; iteration < 100; ++iteration) {
    const Vector rd = g * y - a.transpose() * lam - e * nu;
    const double re = e.dot(y) - 1.0;
    const Vector rp = a * y - z;
    const double gap = z.dot(lam);
    const double objective = 0.5 * y.dot(g * y);
    if (gap <= 1e-13 * objective && std::abs(re) <= 1e-14 &&
        rp.cwiseAbs().maxCoeff() <= 1e-12 * std::max(1.0, std::abs(y[n - 1]))) {
      break;
    }
    const double mu = gap / static_cast<double>(m);

    const Vector d = lam.cwiseQuotient(z);
    Matrix kkt = Matrix::Zero(n + 1, n + 1);
    kkt.topLeftCorner(n, n) = g + a.transpose() * d.asDiagonal() * a;
    kkt.block(0, n, n, 1) = -e;
    kkt.block(n, 0, 1, n) = e.transpose();
    // Symmetric Jacobi scaling; the penalty block can reach 1e12 for k = 10.
    Vector scale = Vector::Ones(n + 1);
    for (Eigen::Index i = 0; i < n; ++i) scale[i] = 1.0 / std::sqrt(kkt(i, i));
    const Matrix scaled = scale.asDiagonal() * kkt * scale.asDiagonal();
    const Eigen::PartialPivLU<Matrix> lu(scaled);

    struct Direction {
      Vector dy, dz, dlam;
      double dnu;
    };
    const auto solve = [&](const Vector& complement) {
      Vector rhs(n + 1);
      rhs.head(n) = -rd + a.transpose() * (complement.cwiseQuotient(z) - d.cwiseProduct(rp));
      rhs[n] = -re;
      const Vector sol = scale.cwiseProduct(lu.solve(scale.cwiseProduct(rhs)));
      Direction dir;
      dir.dy = sol.head(n);
      dir.dnu = sol[n];
      dir.dz = a * dir.dy + rp;
      dir.dlam = (complement - lam.cwiseProduct(dir.dz)).cwiseQuotient(z);
      return dir;
    };

    const Vector zl = z.cwiseProduct(lam);
    const Direction affine = solve(-zl);
    const double affine_step = std::min(max_step(z, affine.dz), max_step(lam, affine.dlam));
    const double mu_affine =
        (z + affine_step * affine.dz).dot(lam + affine_step * affine.dlam) /
        static_cast<double>(m);
    const double sigma = std::pow(mu_affine / mu, 3);
    const Direction dir = solve(-zl - affine.dz.cwiseProduct(affine.dlam) +
                                Vector::Constant(m, sigma * mu));
    const double step =
        std::min(1.0, 0.995 * std::min(max_step(z, dir.dz), max_step(lam, dir.dlam)));

    Vector y_next = y + step * dir.dy;
    Vector z_next = z + step * dir.dz;
    Vector lam_next = lam + step * dir.dlam;
    if (!y_next.allFinite() || !z_next.allFinite() || !lam_next.allFinite() ||
        (z_next.array() <= 0.0).any() || (lam_next.array() <= 0.0).any()) {
      break;  // keep the last good iterate
    }
    y = std::move(y_next);
    z = std::move(z_next);
    lam = std::move(lam_next);
    nu += step * dir.dnu;
    best = {y, nu, true};
  }
  return best;
}

}  // namespace

ChebyshevResult chebyshev_S(int k, double kappa, double alpha, int grid) {
  if (k < 0) throw InvalidInput("chebyshev_S: k must be >= 0");
  if (!(kappa > 0.0 && kappa < 1.0)) throw InvalidInput("chebyshev_S: kappa must lie in (0, 1)");
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) {
    throw InvalidInput("chebyshev_S: alpha must be finite and >= 0");
  }
  if (grid < 2) throw InvalidInput("chebyshev_S: grid needs at least 2 points");

  if (k == 0) {
    // p = 1 is the only feasible polynomial.
    return {1.0 + alpha, Vector::Ones(1), 1.0 + alpha};
  }

  const double h = 1.0 - kappa;
  const Vector t = Vector::LinSpaced(grid, -1.0, 1.0);
  const Matrix phi = chebyshev_rows(t, k);
  const Matrix to_monomial = monomial_transform(k, h);
  const Vector at_one = chebyshev_rows(Vector::Constant(1, 2.0 / h - 1.0), k).row(0).transpose();

  const Eigen::Index n = k + 2;  // (b_0..b_k, s)
  Matrix g = Matrix::Zero(n, n);
  g.topLeftCorner(k + 1, k + 1) = 2.0 * alpha * to_monomial.transpose() * to_monomial;
  g(n - 1, n - 1) = 2.0;
  Vector e = Vector::Zero(n);
  e.head(k + 1) = at_one;

  std::vector<Eigen::Index> active;
  const int initial = std::min(grid, 4 * (k + 1));
  for (int i = 0; i < initial; ++i) {
    active.push_back(static_cast<Eigen::Index>(
        std::llround(static_cast<double>(i) * (grid - 1) / std::max(initial - 1, 1))));
  }

  Vector start = Vector::Zero(n);
  start.head(k + 1) = at_one / at_one.squaredNorm();
  QpSolution solution;
  Vector values;
  for (int round = 0; round < 100; ++round) {
    std::sort(active.begin(), active.end());
    active.erase(std::unique(active.begin(), active.end()), active.end());
    const auto rows = static_cast<Eigen::Index>(active.size());
    Matrix a(2 * rows, n);
    for (Eigen::Index r = 0; r < rows; ++r) {
      a.row(r).head(k + 1) = -phi.row(active[static_cast<std::size_t>(r)]);
      a.row(rows + r).head(k + 1) = phi.row(active[static_cast<std::size_t>(r)]);
    }
    a.col(n - 1).setOnes();

    start[n - 1] = 1.5 * (phi * start.head(k + 1)).cwiseAbs().maxCoeff() + 1.0;
    solution = solve_qp(g, a, e, start);
    values = (phi * solution.y.head(k + 1)).cwiseAbs();
    const double s = solution.y[n - 1];
    if (values.maxCoeff() <= s * (1.0 + 1e-9)) break;

    // Add the violated local maxima of |p| and warm-start from this solution.
    for (Eigen::Index j = 0; j < grid; ++j) {
      if (values[j] <= s * (1.0 + 1e-12)) continue;
      const bool left = j == 0 || values[j] >= values[j - 1];
      const bool right = j == grid - 1 || values[j] >= values[j + 1];
      if (left && right) active.push_back(j);
    }
    start = solution.y;
  }

  ChebyshevResult result;
  result.coefficients = to_monomial * solution.y.head(k + 1);
  const double penalty = alpha * result.coefficients.squaredNorm();
  const double peak = values.maxCoeff();
  result.value = peak * peak + penalty;
  result.lower_bound =
      std::min(result.value, solution.nu - 0.5 * solution.y.dot(g * solution.y));
  return result;
}

}  // namespace rna
