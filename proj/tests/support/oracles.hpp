#pragma once

// Independent reference implementations used only by the tests. None of these
// call into the solver or aggregation code they are compared against.

#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace spdmidas::testing {

/// Closed-form shifted Legendre polynomials, orthonormal on [0,1], degree <= 3.
inline double legendre_closed_form(int d, double s) {
  switch (d) {
    case 0: return 1.0;
    case 1: return std::sqrt(3.0) * (2.0 * s - 1.0);
    case 2: return std::sqrt(5.0) * (6.0 * s * s - 6.0 * s + 1.0);
    case 3: return std::sqrt(7.0) * (20.0 * s * s * s - 30.0 * s * s + 12.0 * s - 1.0);
    default: return std::numeric_limits<double>::quiet_NaN();
  }
}

/// n-point Gauss-Legendre nodes and weights on [0,1] by Newton iteration on P_n.
inline void gauss_legendre_01(int n, std::vector<double>& nodes, std::vector<double>& weights) {
  nodes.assign(static_cast<std::size_t>(n), 0.0);
  weights.assign(static_cast<std::size_t>(n), 0.0);
  for (int i = 0; i < n; ++i) {
    double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    nodes[static_cast<std::size_t>(i)] = 0.5 * (x + 1.0);
    weights[static_cast<std::size_t>(i)] = 1.0 / ((1.0 - x * x) * dp * dp);  // 2/(...) * 1/2
  }
}

/// Minimizes a convex 1-d function on [lo, hi] by golden-section search.
inline double golden_min(const std::function<double(double)>& f, double lo, double hi,
                         int iters = 200) {
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double c = b - g * (b - a), d = a + g * (b - a);
  double fc = f(c), fd = f(d);
  for (int i = 0; i < iters; ++i) {
    if (fc < fd) {
      b = d; d = c; fd = fc; c = b - g * (b - a); fc = f(c);
    } else {
      a = c; c = d; fc = fd; d = a + g * (b - a); fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

inline double sg_penalty(const Eigen::VectorXd& x, double alpha) {
  return alpha * x.lpNorm<1>() + (1.0 - alpha) * x.norm();
}

/// Numeric minimizer of 0.5||x - v||^2 + mu * Omega(x) over one group, by exact
/// cyclic coordinate minimization (each 1-d problem solved by golden section)
/// started from v, followed by a zero-solution check.
inline Eigen::VectorXd numeric_prox_sg(const Eigen::VectorXd& v, double mu, double alpha) {
  auto obj = [&](const Eigen::VectorXd& x) {
    return 0.5 * (x - v).squaredNorm() + mu * sg_penalty(x, alpha);
  };
  Eigen::VectorXd x = v;
  for (int sweep = 0; sweep < 400; ++sweep) {
    const Eigen::VectorXd before = x;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      auto f = [&](double xi) {
        Eigen::VectorXd y = x;
        y[i] = xi;
        return obj(y);
      };
      const double span = std::abs(v[i]) + 1.0;
      double xi = golden_min(f, -span, span, 120);
      if (f(0.0) <= f(xi)) xi = 0.0;
      x[i] = xi;
    }
    if ((x - before).norm() < 1e-14) break;
  }
  if (obj(Eigen::VectorXd::Zero(v.size())) <= obj(x)) x.setZero();
  return x;
}

/// Sparse-group LASSO by exact block coordinate descent: unpenalized columns
/// are updated coordinate-wise in closed form, each group is either certified
/// zero by its KKT condition or minimized by inner coordinate descent with
/// exact 1-d solves. Objective: (1/T)||y - Zb||^2 + mu * sum_g Omega(b_g).
struct SgLassoOracle {
  const Eigen::MatrixXd& z;
  const Eigen::VectorXd& y;
  std::vector<std::vector<Eigen::Index>> groups;
  std::vector<Eigen::Index> free_cols;
  double mu;
  double alpha;

  double objective(const Eigen::VectorXd& b) const {
    double pen = 0.0;
    for (const auto& g : groups) {
      Eigen::VectorXd bg(static_cast<Eigen::Index>(g.size()));
      for (std::size_t i = 0; i < g.size(); ++i) bg[static_cast<Eigen::Index>(i)] = b[g[i]];
      pen += sg_penalty(bg, alpha);
    }
    return (y - z * b).squaredNorm() / static_cast<double>(z.rows()) + mu * pen;
  }

  // argmin_x a/2 x^2 - c x + l1 |x| + l2 sqrt(x^2 + r2), r2 > 0.
  static double solve_1d(double a, double c, double l1, double l2, double r2) {
    if (std::abs(c) <= l1) return 0.0;
    const double sgn = c > 0 ? 1.0 : -1.0;
    const double cc = std::abs(c) - l1;
    // h(x) = a x + l2 x / sqrt(x^2 + r2) - cc, increasing on x >= 0.
    double lo = 0.0, hi = cc / a;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      const double h = a * mid + l2 * mid / std::sqrt(mid * mid + r2) - cc;
      if (h > 0) hi = mid; else lo = mid;
    }
    return sgn * 0.5 * (lo + hi);
  }

  Eigen::VectorXd solve(int sweeps = 20000, double tol = 1e-15) const {
    const auto t = static_cast<double>(z.rows());
    Eigen::VectorXd b = Eigen::VectorXd::Zero(z.cols());
    Eigen::VectorXd r = y;
    const Eigen::VectorXd colsq = z.colwise().squaredNorm().transpose() * (2.0 / t);
    for (int sweep = 0; sweep < sweeps; ++sweep) {
      double change = 0.0;
      for (Eigen::Index c : free_cols) {
        const double old = b[c];
        const double nb = old + (2.0 / t) * z.col(c).dot(r) / colsq[c];
        r -= z.col(c) * (nb - old);
        b[c] = nb;
        change = std::max(change, std::abs(nb - old));
      }
      for (const auto& g : groups) {
        // Partial residual with the group removed.
        Eigen::VectorXd rg = r;
        for (Eigen::Index c : g) rg += z.col(c) * b[c];
        Eigen::VectorXd grad0(static_cast<Eigen::Index>(g.size()));
        for (std::size_t i = 0; i < g.size(); ++i) {
          grad0[static_cast<Eigen::Index>(i)] = (2.0 / t) * z.col(g[i]).dot(rg);
        }
        Eigen::VectorXd soft = grad0.unaryExpr([&](double v) {
          return std::copysign(std::max(std::abs(v) - mu * alpha, 0.0), v);
        });
        if (soft.norm() <= mu * (1.0 - alpha)) {
          for (Eigen::Index c : g) {
            change = std::max(change, std::abs(b[c]));
            b[c] = 0.0;
          }
          r = rg;
          continue;
        }
        // Inner coordinate descent on the group (group norm is smooth away from 0).
        if ([&] { for (Eigen::Index c : g) if (b[c] != 0.0) return false; return true; }()) {
          // Start from a nonzero point along the soft-thresholded direction.
          for (std::size_t i = 0; i < g.size(); ++i) {
            b[g[i]] = 1e-8 * soft[static_cast<Eigen::Index>(i)];
          }
        }
        Eigen::VectorXd rr = rg;
        for (Eigen::Index c : g) rr -= z.col(c) * b[c];
        for (int inner = 0; inner < 2000; ++inner) {
          double ic = 0.0;
          for (Eigen::Index c : g) {
            double r2 = 0.0;
            for (Eigen::Index o : g) if (o != c) r2 += b[o] * b[o];
            const double old = b[c];
            const double cval = (2.0 / t) * z.col(c).dot(rr + z.col(c) * old);
            double nb = 0.0;
            if (r2 <= 0.0) {
              const double cc = std::abs(cval) - mu;
              nb = cc > 0 ? std::copysign(cc / colsq[c], cval) : 0.0;
            } else {
              nb = solve_1d(colsq[c], cval, mu * alpha, mu * (1.0 - alpha), r2);
            }
            rr -= z.col(c) * (nb - old);
            b[c] = nb;
            ic = std::max(ic, std::abs(nb - old));
            change = std::max(change, std::abs(nb - old));
          }
          if (ic < tol) break;
        }
        r = rr;
      }
      if (change < tol) break;
    }
    return b;
  }
};

/// Brute-force minimization of f over a rectangular grid.
inline std::pair<Eigen::VectorXd, double> grid_search(
    const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& lo,
    const Eigen::VectorXd& hi, int points) {
  const Eigen::Index dim = lo.size();
  Eigen::VectorXd best_x = lo;
  double best = std::numeric_limits<double>::infinity();
  std::vector<int> idx(static_cast<std::size_t>(dim), 0);
  Eigen::VectorXd x(dim);
  while (true) {
    for (Eigen::Index i = 0; i < dim; ++i) {
      x[i] = lo[i] + (hi[i] - lo[i]) * idx[static_cast<std::size_t>(i)] / (points - 1);
    }
    const double v = f(x);
    if (v < best) {
      best = v;
      best_x = x;
    }
    Eigen::Index i = 0;
    while (i < dim && ++idx[static_cast<std::size_t>(i)] == points) {
      idx[static_cast<std::size_t>(i)] = 0;
      ++i;
    }
    if (i == dim) break;
  }
  return {best_x, best};
}

/// Iteratively refined grid search: grid, then shrink the box around the best point.
inline std::pair<Eigen::VectorXd, double> refined_grid_search(
    const std::function<double(const Eigen::VectorXd&)>& f, Eigen::VectorXd lo,
    Eigen::VectorXd hi, int points, int rounds) {
  std::pair<Eigen::VectorXd, double> best{lo, std::numeric_limits<double>::infinity()};
  for (int r = 0; r < rounds; ++r) {
    auto cand = grid_search(f, lo, hi, points);
    if (cand.second < best.second) best = cand;
    const Eigen::VectorXd width = (hi - lo) * (2.0 / (points - 1));
    lo = best.first - width;
    hi = best.first + width;
  }
  return best;
}

/// Canonical correlations between the column spaces of a and b.
inline Eigen::VectorXd canonical_correlations(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  const Eigen::MatrixXd ac = a.rowwise() - a.colwise().mean();
  const Eigen::MatrixXd bc = b.rowwise() - b.colwise().mean();
  const Eigen::MatrixXd qa = Eigen::HouseholderQR<Eigen::MatrixXd>(ac).householderQ() *
                             Eigen::MatrixXd::Identity(ac.rows(), ac.cols());
  const Eigen::MatrixXd qb = Eigen::HouseholderQR<Eigen::MatrixXd>(bc).householderQ() *
                             Eigen::MatrixXd::Identity(bc.rows(), bc.cols());
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(qa.transpose() * qb);
  return svd.singularValues();
}

}  // namespace spdmidas::testing
