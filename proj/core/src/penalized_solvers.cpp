#include "spdmidas/penalized_solvers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "spdmidas/error.hpp"

namespace spdmidas {

std::string_view to_string(ColumnRole role) {
  switch (role) {
    case ColumnRole::intercept: return "intercept";
    case ColumnRole::ar_lag: return "ar_lag";
    case ColumnRole::predictor: return "predictor";
    case ColumnRole::factor: return "factor";
  }
  return "unknown";
}

std::string_view to_string(PenaltyKind kind) {
  switch (kind) {
    case PenaltyKind::none: return "none";
    case PenaltyKind::l1: return "lasso";
    case PenaltyKind::group: return "group_lasso";
    case PenaltyKind::sparse_group: return "sparse_group";
    case PenaltyKind::ridge: return "ridge";
    case PenaltyKind::lava: return "lava";
  }
  return "unknown";
}

int DesignAssembly::group_count() const {
  int n = 0;
  for (int g : group_of) n = std::max(n, g + 1);
  return n;
}

std::vector<std::vector<Eigen::Index>> DesignAssembly::groups() const {
  std::vector<std::vector<Eigen::Index>> out(static_cast<std::size_t>(group_count()));
  for (std::size_t c = 0; c < group_of.size(); ++c) {
    if (group_of[c] >= 0) {
      out[static_cast<std::size_t>(group_of[c])].push_back(static_cast<Eigen::Index>(c));
    }
  }
  return out;
}

std::vector<Eigen::Index> DesignAssembly::unpenalized() const {
  std::vector<Eigen::Index> out;
  for (std::size_t c = 0; c < group_of.size(); ++c) {
    if (group_of[c] < 0) out.push_back(static_cast<Eigen::Index>(c));
  }
  return out;
}

void DesignAssembly::validate() const {
  if (response.size() != columns.rows()) {
    throw Error(ErrorKind::config, fmt::format("response has {} rows but the design has {}",
                                               response.size(), columns.rows()));
  }
  if (static_cast<Eigen::Index>(group_of.size()) != columns.cols() ||
      column_scales.size() != columns.cols() ||
      (!tags.empty() && static_cast<Eigen::Index>(tags.size()) != columns.cols())) {
    throw Error(ErrorKind::config, "design column metadata does not match the column count");
  }
  for (const auto& g : groups()) {
    if (g.empty()) throw Error(ErrorKind::config, "group ids must be contiguous from 0");
  }
  if (!response.allFinite() || !columns.allFinite()) {
    throw Error(ErrorKind::data, "design contains non-finite values");
  }
}

DesignAssembly DesignAssembly::without_rows(Eigen::Index begin, Eigen::Index end) const {
  DesignAssembly out = *this;
  const Eigen::Index n = rows() - (end - begin);
  out.response.resize(n);
  out.columns.resize(n, cols());
  out.response << response.head(begin), response.tail(rows() - end);
  out.columns << columns.topRows(begin), columns.bottomRows(rows() - end);
  return out;
}

DesignAssembly DesignAssembly::only_rows(Eigen::Index begin, Eigen::Index end) const {
  DesignAssembly out = *this;
  out.response = response.segment(begin, end - begin);
  out.columns = columns.middleRows(begin, end - begin);
  return out;
}

DesignAssembly make_design(Eigen::VectorXd response, Eigen::MatrixXd columns,
                           std::vector<int> group_of) {
  DesignAssembly d;
  d.response = std::move(response);
  d.column_scales = Eigen::VectorXd::Ones(columns.cols());
  d.columns = std::move(columns);
  d.group_of = std::move(group_of);
  d.validate();
  return d;
}

double PenaltySpec::effective_alpha() const {
  switch (kind) {
    case PenaltyKind::l1: return 1.0;
    case PenaltyKind::group: return 0.0;
    default: return alpha;
  }
}

void PenaltySpec::validate() const {
  const bool needs_alpha = kind == PenaltyKind::sparse_group || kind == PenaltyKind::lava;
  if (needs_alpha && !(alpha >= 0.0 && alpha <= 1.0)) {
    throw Error(ErrorKind::config, fmt::format("alpha {} outside [0,1]", alpha));
  }
  if (mu < 0.0 || mu1 < 0.0 || mu2 < 0.0) {
    throw Error(ErrorKind::config, "penalty levels must be non-negative");
  }
}

Eigen::VectorXd prox_l1(const Eigen::Ref<const Eigen::VectorXd>& v, double threshold) {
  return v.unaryExpr([threshold](double x) {
    const double a = std::abs(x) - threshold;
    return a > 0.0 ? std::copysign(a, x) : 0.0;
  });
}

Eigen::VectorXd prox_group(const Eigen::Ref<const Eigen::VectorXd>& v, double threshold) {
  const double norm = v.norm();
  if (norm <= threshold || norm == 0.0) return Eigen::VectorXd::Zero(v.size());
  return v * (1.0 - threshold / norm);
}

Eigen::VectorXd prox_sparse_group(const Eigen::Ref<const Eigen::VectorXd>& v, double mu,
                                  double alpha) {
  return prox_group(prox_l1(v, alpha * mu), (1.0 - alpha) * mu);
}

namespace {

struct GroupPenalty {
  const std::vector<std::vector<Eigen::Index>>& groups;
  double alpha;

  double value(const Eigen::VectorXd& coef) const {
    double total = 0.0;
    for (const auto& g : groups) {
      double l1 = 0.0, l2 = 0.0;
      for (Eigen::Index c : g) {
        l1 += std::abs(coef[c]);
        l2 += coef[c] * coef[c];
      }
      total += alpha * l1 + (1.0 - alpha) * std::sqrt(l2);
    }
    return total;
  }

  void prox_in_place(Eigen::VectorXd& x, double threshold) const {
    Eigen::VectorXd buf;
    for (const auto& g : groups) {
      buf.resize(static_cast<Eigen::Index>(g.size()));
      for (std::size_t i = 0; i < g.size(); ++i) buf[static_cast<Eigen::Index>(i)] = x[g[i]];
      buf = prox_sparse_group(buf, threshold, alpha);
      for (std::size_t i = 0; i < g.size(); ++i) x[g[i]] = buf[static_cast<Eigen::Index>(i)];
    }
  }
};

double top_eigenvalue_gram(const Eigen::MatrixXd& z) {
  if (z.cols() == 0 || z.rows() == 0) return 0.0;
  if (z.cols() <= 64 || z.rows() <= 64) {
    const Eigen::MatrixXd g = z.cols() <= z.rows() ? Eigen::MatrixXd(z.transpose() * z)
                                                   : Eigen::MatrixXd(z * z.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g, Eigen::EigenvaluesOnly);
    return es.eigenvalues().maxCoeff();
  }
  // Power iteration from a deterministic start; slightly inflated afterwards.
  Eigen::VectorXd v = Eigen::VectorXd::Ones(z.cols()).normalized();
  double lambda = 0.0;
  for (int it = 0; it < 100; ++it) {
    Eigen::VectorXd w = z.transpose() * (z * v);
    const double next = w.norm();
    if (next == 0.0) return 0.0;
    v = w / next;
    if (std::abs(next - lambda) <= 1e-10 * next) {
      lambda = next;
      break;
    }
    lambda = next;
  }
  return lambda * 1.01;
}

Eigen::MatrixXd select_columns(const Eigen::MatrixXd& z, const std::vector<Eigen::Index>& idx) {
  Eigen::MatrixXd out(z.rows(), static_cast<Eigen::Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) out.col(static_cast<Eigen::Index>(i)) = z.col(idx[i]);
  return out;
}

}  // namespace

double sparse_group_norm(const DesignAssembly& design, const Eigen::VectorXd& coef, double alpha) {
  const auto groups = design.groups();
  return GroupPenalty{groups, alpha}.value(coef);
}

double least_squares_loss(const DesignAssembly& design, const Eigen::VectorXd& coef) {
  const auto t = static_cast<double>(design.rows());
  return (design.response - design.columns * coef).squaredNorm() / t;
}

double penalized_objective(const DesignAssembly& design, const PenaltySpec& penalty,
                           const Eigen::VectorXd& coef) {
  const double loss = least_squares_loss(design, coef);
  switch (penalty.kind) {
    case PenaltyKind::none: return loss;
    case PenaltyKind::l1:
    case PenaltyKind::group:
    case PenaltyKind::sparse_group:
      return loss + penalty.mu * sparse_group_norm(design, coef, penalty.effective_alpha());
    case PenaltyKind::ridge: {
      double sq = 0.0;
      for (Eigen::Index c = 0; c < design.cols(); ++c) {
        if (design.penalized(c)) sq += coef[c] * coef[c];
      }
      return loss + penalty.mu * sq;
    }
    case PenaltyKind::lava:
      throw Error(ErrorKind::config, "use lava_objective for sparse-plus-dense penalties");
  }
  return loss;
}

double lava_objective(const DesignAssembly& design, double mu1, double mu2, double alpha,
                      const Eigen::VectorXd& unpenalized_and_sparse,
                      const Eigen::VectorXd& dense) {
  const Eigen::VectorXd total = unpenalized_and_sparse + dense;
  return least_squares_loss(design, total) +
         mu1 * sparse_group_norm(design, unpenalized_and_sparse, alpha) +
         mu2 * dense.squaredNorm();
}

double kkt_residual(const DesignAssembly& design, const PenaltySpec& penalty,
                    const Eigen::VectorXd& coef) {
  const auto t = static_cast<double>(design.rows());
  const Eigen::VectorXd grad =
      -(2.0 / t) * design.columns.transpose() * (design.response - design.columns * coef);
  const double alpha = penalty.effective_alpha();
  const double mu = penalty.mu;
  double sq = 0.0;
  for (Eigen::Index c : design.unpenalized()) sq += grad[c] * grad[c];
  for (const auto& g : design.groups()) {
    double norm = 0.0;
    for (Eigen::Index c : g) norm += coef[c] * coef[c];
    norm = std::sqrt(norm);
    if (norm == 0.0) {
      double soft = 0.0;
      for (Eigen::Index c : g) {
        const double a = std::max(std::abs(grad[c]) - mu * alpha, 0.0);
        soft += a * a;
      }
      const double excess = std::max(std::sqrt(soft) - mu * (1.0 - alpha), 0.0);
      sq += excess * excess;
      continue;
    }
    for (Eigen::Index c : g) {
      double r = 0.0;
      if (coef[c] != 0.0) {
        r = grad[c] + mu * ((1.0 - alpha) * coef[c] / norm + alpha * std::copysign(1.0, coef[c]));
      } else {
        r = std::max(std::abs(grad[c]) - mu * alpha, 0.0);
      }
      sq += r * r;
    }
  }
  return std::sqrt(sq);
}

double mu_max(const DesignAssembly& design, double alpha) {
  const auto t = static_cast<double>(design.rows());
  Eigen::VectorXd resid = design.response;
  const auto unpen = design.unpenalized();
  if (!unpen.empty()) {
    const Eigen::MatrixXd zu = select_columns(design.columns, unpen);
    const Eigen::VectorXd b = zu.colPivHouseholderQr().solve(design.response);
    resid -= zu * b;
  }
  const Eigen::VectorXd g = (2.0 / t) * design.columns.transpose() * resid;
  double best = 0.0;
  for (const auto& grp : design.groups()) {
    Eigen::VectorXd gg(static_cast<Eigen::Index>(grp.size()));
    for (std::size_t i = 0; i < grp.size(); ++i) gg[static_cast<Eigen::Index>(i)] = g[grp[i]];
    double level = 0.0;
    if (alpha >= 1.0) {
      level = gg.cwiseAbs().maxCoeff();
    } else if (alpha <= 0.0) {
      level = gg.norm();
    } else {
      double lo = 0.0, hi = gg.cwiseAbs().maxCoeff() / alpha;
      for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (prox_l1(gg, mid * alpha).norm() <= mid * (1.0 - alpha)) {
          hi = mid;
        } else {
          lo = mid;
        }
      }
      level = hi;
    }
    best = std::max(best, level);
  }
  return best;
}

Solution fit_proximal(const DesignAssembly& design, const PenaltySpec& penalty,
                      const SolverOptions& opts, const Eigen::VectorXd* warm_start) {
  design.validate();
  penalty.validate();
  if (penalty.kind != PenaltyKind::l1 && penalty.kind != PenaltyKind::group &&
      penalty.kind != PenaltyKind::sparse_group) {
    throw Error(ErrorKind::config, "fit_proximal handles l1, group and sparse-group penalties");
  }
  const auto& z = design.columns;
  const auto& y = design.response;
  const auto t = static_cast<double>(design.rows());
  const auto group_list = design.groups();
  const GroupPenalty pen{group_list, penalty.effective_alpha()};
  const double mu = penalty.mu;

  Solution sol;
  Eigen::VectorXd x = warm_start ? *warm_start : Eigen::VectorXd::Zero(design.cols());
  if (x.size() != design.cols()) throw Error(ErrorKind::config, "warm start has the wrong size");

  double lipschitz = 2.0 * top_eigenvalue_gram(z) / t;
  if (lipschitz <= 0.0) lipschitz = 1.0;
  const double grad_scale = opts.gradient_tolerance * (1.0 + y.norm() / std::sqrt(t));

  Eigen::VectorXd resid_x = y - z * x;
  double fx = resid_x.squaredNorm() / t + mu * pen.value(x);
  sol.objective_trace.push_back(fx);

  Eigen::VectorXd yk = x;
  Eigen::VectorXd resid_y = resid_x;
  double momentum = 1.0;
  bool from_x = true;
  int quiet = 0;
  for (int it = 1; it <= opts.max_iterations; ++it) {
    sol.iterations = it;
    const Eigen::VectorXd grad = -(2.0 / t) * (z.transpose() * resid_y);
    const double fy_loss = resid_y.squaredNorm() / t;
    Eigen::VectorXd cand, resid_c;
    double fc_loss = 0.0;
    while (true) {
      cand = yk - grad / lipschitz;
      pen.prox_in_place(cand, mu / lipschitz);
      resid_c = y - z * cand;
      fc_loss = resid_c.squaredNorm() / t;
      const Eigen::VectorXd step = cand - yk;
      const double bound = fy_loss + grad.dot(step) + 0.5 * lipschitz * step.squaredNorm();
      if (fc_loss <= bound + 1e-12 * std::max(1.0, std::abs(bound)) || lipschitz > 1e300) break;
      lipschitz *= 2.0;
    }
    const double fc = fc_loss + mu * pen.value(cand);
    const double map_norm = lipschitz * (cand - yk).norm();
    const double next_momentum = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * momentum * momentum));

    Eigen::VectorXd x_new = x;
    Eigen::VectorXd resid_new = resid_x;
    double f_new = fx;
    // A plain proximal step from x never increases the objective in exact
    // arithmetic; near the optimum its gain is below rounding, so accept it.
    const bool accept = fc <= fx || (from_x && fc <= fx + 1e-14 * std::max(1.0, std::abs(fx)));
    if (accept) {
      x_new = cand;
      resid_new = resid_c;
      f_new = fc;
    }
    const bool restart = !accept || (yk - cand).dot(cand - x) > 0.0;
    from_x = restart;
    if (restart) {
      yk = x_new;
      resid_y = resid_new;
      momentum = 1.0;
    } else {
      const double a = momentum / next_momentum;
      const double b = (momentum - 1.0) / next_momentum;
      yk = x_new + a * (cand - x_new) + b * (x_new - x);
      resid_y = y - z * yk;
      momentum = next_momentum;
    }
    const double rel_change = std::abs(fx - f_new) / std::max(1.0, std::abs(f_new));
    x = std::move(x_new);
    resid_x = std::move(resid_new);
    fx = f_new;
    sol.objective_trace.push_back(fx);

    // Both the objective and the proximal gradient map must have settled.
    if (rel_change < opts.tolerance && map_norm <= grad_scale) {
      if (++quiet >= 2) {
        sol.converged = true;
        break;
      }
    } else {
      quiet = 0;
    }
  }
  sol.coefficients = std::move(x);
  return sol;
}

Solution ridge_fit(const DesignAssembly& design, double mu) {
  design.validate();
  if (mu < 0.0) throw Error(ErrorKind::config, "ridge penalty must be non-negative");
  const auto t = static_cast<double>(design.rows());
  Eigen::MatrixXd a = design.columns.transpose() * design.columns / t;
  for (Eigen::Index c = 0; c < design.cols(); ++c) {
    if (design.penalized(c)) a(c, c) += mu;
  }
  const Eigen::VectorXd b = design.columns.transpose() * design.response / t;
  // With mu > 0 the system is singular only through the unpenalized block.
  const auto free_cols = design.unpenalized();
  Eigen::MatrixXd must_be_full(design.rows(), 0);
  if (mu > 0.0) {
    must_be_full.resize(design.rows(), static_cast<Eigen::Index>(free_cols.size()));
    for (std::size_t i = 0; i < free_cols.size(); ++i) {
      must_be_full.col(static_cast<Eigen::Index>(i)) = design.columns.col(free_cols[i]);
    }
  } else {
    must_be_full = design.columns;
  }
  if (must_be_full.cols() > 0) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(must_be_full);
    qr.setThreshold(1e-10);
    if (qr.rank() < must_be_full.cols()) {
      throw Error(ErrorKind::rank_deficiency,
                  fmt::format("ridge system is singular (mu = {})", mu));
    }
  }
  Eigen::LDLT<Eigen::MatrixXd> ldlt(a);
  if (ldlt.info() != Eigen::Success) {
    throw Error(ErrorKind::rank_deficiency, fmt::format("ridge factorization failed (mu = {})", mu));
  }
  Solution sol;
  sol.coefficients = ldlt.solve(b);
  sol.objective_trace.push_back(penalized_objective(design, PenaltySpec::ridge(mu), sol.coefficients));
  sol.iterations = 1;
  sol.converged = true;
  return sol;
}

Solution ols_fit(const DesignAssembly& design) {
  design.validate();
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design.columns);
  qr.setThreshold(1e-10);
  if (qr.rank() < design.cols()) {
    std::vector<Eigen::Index> dependent;
    for (Eigen::Index i = qr.rank(); i < design.cols(); ++i) {
      dependent.push_back(qr.colsPermutation().indices()[i]);
    }
    std::sort(dependent.begin(), dependent.end());
    throw Error(ErrorKind::rank_deficiency,
                fmt::format("design is rank deficient; dependent columns {}", dependent));
  }
  Solution sol;
  sol.coefficients = qr.solve(design.response);
  sol.objective_trace.push_back(least_squares_loss(design, sol.coefficients));
  sol.iterations = 1;
  sol.converged = true;
  return sol;
}

Solution lava_fit(const DesignAssembly& design, double mu1, double mu2, double alpha,
                  const SolverOptions& opts, const std::vector<bool>* dense_mask) {
  design.validate();
  if (!(mu1 > 0.0) || !(mu2 > 0.0)) {
    throw Error(ErrorKind::config, "sparse-plus-dense fit needs mu1 > 0 and mu2 > 0");
  }
  PenaltySpec::lava(mu1, mu2, alpha).validate();
  const Eigen::Index p = design.cols();

  // Ridge block: unpenalized columns plus dense-eligible penalized columns.
  std::vector<Eigen::Index> ridge_cols;
  std::vector<int> ridge_groups;
  for (Eigen::Index c = 0; c < p; ++c) {
    const bool dense = design.penalized(c) &&
                       (!dense_mask || (*dense_mask)[static_cast<std::size_t>(c)]);
    if (!design.penalized(c) || dense) {
      ridge_cols.push_back(c);
      ridge_groups.push_back(design.penalized(c) ? 0 : -1);
    }
  }
  // Sparse block: penalized columns only, groups renumbered.
  std::vector<Eigen::Index> sparse_cols;
  std::vector<int> sparse_groups;
  for (Eigen::Index c = 0; c < p; ++c) {
    if (design.penalized(c)) {
      sparse_cols.push_back(c);
      sparse_groups.push_back(design.group_of[static_cast<std::size_t>(c)]);
    }
  }
  DesignAssembly ridge_design;
  ridge_design.columns = select_columns(design.columns, ridge_cols);
  ridge_design.group_of = ridge_groups;
  ridge_design.column_scales = Eigen::VectorXd::Ones(ridge_design.columns.cols());
  DesignAssembly sparse_design;
  sparse_design.columns = select_columns(design.columns, sparse_cols);
  sparse_design.group_of = sparse_groups;
  sparse_design.column_scales = Eigen::VectorXd::Ones(sparse_design.columns.cols());

  Eigen::VectorXd sparse = Eigen::VectorXd::Zero(p);  // unpenalized + zeta
  Eigen::VectorXd dense = Eigen::VectorXd::Zero(p);   // eta
  Eigen::VectorXd zeta_local = Eigen::VectorXd::Zero(sparse_design.columns.cols());

  Solution sol;
  auto objective = [&] { return lava_objective(design, mu1, mu2, alpha, sparse, dense); };
  double prev = objective();
  sol.objective_trace.push_back(prev);
  const PenaltySpec sg = PenaltySpec::sparse_group(mu1, alpha);
  SolverOptions inner = opts;

  for (int outer = 1; outer <= opts.max_outer_iterations; ++outer) {
    sol.iterations = outer;
    // (i) ridge over (unpenalized, eta) given zeta.
    Eigen::VectorXd zeta_full = Eigen::VectorXd::Zero(p);
    for (std::size_t i = 0; i < sparse_cols.size(); ++i) {
      zeta_full[sparse_cols[i]] = zeta_local[static_cast<Eigen::Index>(i)];
    }
    ridge_design.response = design.response - design.columns * zeta_full;
    const Eigen::VectorXd rc = ridge_fit(ridge_design, mu2).coefficients;
    dense.setZero();
    sparse = zeta_full;
    for (std::size_t i = 0; i < ridge_cols.size(); ++i) {
      const Eigen::Index c = ridge_cols[i];
      if (design.penalized(c)) {
        dense[c] = rc[static_cast<Eigen::Index>(i)];
      } else {
        sparse[c] = rc[static_cast<Eigen::Index>(i)];
      }
    }
    const double after_ridge = objective();
    sol.objective_trace.push_back(after_ridge);

    // (ii) sparse-group over zeta given (unpenalized, eta).
    Eigen::VectorXd fixed = dense;
    for (Eigen::Index c : design.unpenalized()) fixed[c] = sparse[c];
    sparse_design.response = design.response - design.columns * fixed;
    const Solution inner_sol = fit_proximal(sparse_design, sg, inner, &zeta_local);
    zeta_local = inner_sol.coefficients;
    for (std::size_t i = 0; i < sparse_cols.size(); ++i) {
      sparse[sparse_cols[i]] = zeta_local[static_cast<Eigen::Index>(i)];
    }
    const double now = objective();
    sol.objective_trace.push_back(now);
    if ((prev - now) / std::max(1.0, std::abs(now)) < opts.tolerance) {
      sol.converged = true;
      break;
    }
    prev = now;
  }
  sol.sparse_part = sparse;
  for (Eigen::Index c : design.unpenalized()) sol.sparse_part[c] = 0.0;
  sol.dense_part = dense;
  sol.coefficients = sparse + dense;
  return sol;
}

}  // namespace spdmidas
