#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace spdmidas {

enum class ColumnRole { intercept, ar_lag, predictor, factor };

std::string_view to_string(ColumnRole role);

struct ColumnTag {
  ColumnRole role = ColumnRole::predictor;
  std::string panel;
  int series = 0;  // series k, factor r or AR lag j
  int d = 0;       // basis index
};

/// Regression problem in the solvers' native form: minimize
/// (1/T) * ||response - columns * c||^2 + penalty(c restricted to penalized columns).
/// Penalized columns are partitioned into groups; unpenalized columns have
/// group -1.
struct DesignAssembly {
  Eigen::VectorXd response;
  Eigen::MatrixXd columns;
  std::vector<ColumnTag> tags;
  std::vector<int> group_of;
  /// Columns were divided by these scales; divide coefficients by them to
  /// report on the original scale.
  Eigen::VectorXd column_scales;

  Eigen::Index rows() const { return columns.rows(); }
  Eigen::Index cols() const { return columns.cols(); }
  bool penalized(Eigen::Index c) const { return group_of[static_cast<std::size_t>(c)] >= 0; }
  int group_count() const;
  /// Column indices of each group, in column order.
  std::vector<std::vector<Eigen::Index>> groups() const;
  std::vector<Eigen::Index> unpenalized() const;

  /// Throws Error{config} on inconsistent sizes or non-contiguous group ids.
  void validate() const;

  /// Rows [begin, end) removed (for blocked cross-validation) or kept.
  DesignAssembly without_rows(Eigen::Index begin, Eigen::Index end) const;
  DesignAssembly only_rows(Eigen::Index begin, Eigen::Index end) const;
};

/// Builds an assembly with unit scales and the given group map.
DesignAssembly make_design(Eigen::VectorXd response, Eigen::MatrixXd columns,
                           std::vector<int> group_of);

enum class PenaltyKind { none, l1, group, sparse_group, ridge, lava };

std::string_view to_string(PenaltyKind kind);

struct PenaltySpec {
  PenaltyKind kind = PenaltyKind::none;
  double alpha = 0.5;
  double mu = 0.0;
  double mu1 = 0.0;
  double mu2 = 0.0;

  static PenaltySpec lasso(double mu) { return {PenaltyKind::l1, 1.0, mu, 0.0, 0.0}; }
  static PenaltySpec group_lasso(double mu) { return {PenaltyKind::group, 0.0, mu, 0.0, 0.0}; }
  static PenaltySpec sparse_group(double mu, double alpha) {
    return {PenaltyKind::sparse_group, alpha, mu, 0.0, 0.0};
  }
  static PenaltySpec ridge(double mu) { return {PenaltyKind::ridge, 0.0, mu, 0.0, 0.0}; }
  static PenaltySpec lava(double mu1, double mu2, double alpha) {
    return {PenaltyKind::lava, alpha, 0.0, mu1, mu2};
  }

  /// Mixing weight actually applied by the sparse-group prox (1 for l1, 0 for group).
  double effective_alpha() const;
  void validate() const;
};

struct SolverOptions {
  /// Relative objective change that ends the iteration.
  double tolerance = 1e-8;
  /// Required norm of the proximal gradient map, relative to 1 + ||y|| / sqrt(T).
  double gradient_tolerance = 1e-6;
  int max_iterations = 10000;
  /// Outer alternations for the sparse-plus-dense solver.
  int max_outer_iterations = 500;
};

struct Solution {
  Eigen::VectorXd coefficients;
  /// sparse + dense parts; empty unless produced by lava_fit.
  Eigen::VectorXd sparse_part;
  Eigen::VectorXd dense_part;
  std::vector<double> objective_trace;
  int iterations = 0;
  bool converged = false;

  double objective() const { return objective_trace.empty() ? 0.0 : objective_trace.back(); }
};

// Proximal operators ------------------------------------------------------

Eigen::VectorXd prox_l1(const Eigen::Ref<const Eigen::VectorXd>& v, double threshold);
Eigen::VectorXd prox_group(const Eigen::Ref<const Eigen::VectorXd>& v, double threshold);
/// Exact prox of mu * (alpha |x|_1 + (1 - alpha) ||x||_2) on one group.
Eigen::VectorXd prox_sparse_group(const Eigen::Ref<const Eigen::VectorXd>& v, double mu,
                                  double alpha);

/// alpha |b|_1 + (1 - alpha) sum_g ||b_g||_2 over the penalized columns.
double sparse_group_norm(const DesignAssembly& design, const Eigen::VectorXd& coef, double alpha);
double least_squares_loss(const DesignAssembly& design, const Eigen::VectorXd& coef);
/// Loss plus penalty for kinds none / l1 / group / sparse_group / ridge.
double penalized_objective(const DesignAssembly& design, const PenaltySpec& penalty,
                           const Eigen::VectorXd& coef);
/// Loss plus mu1 * Omega(sparse) + mu2 * ||dense||^2.
double lava_objective(const DesignAssembly& design, double mu1, double mu2, double alpha,
                      const Eigen::VectorXd& unpenalized_and_sparse,
                      const Eigen::VectorXd& dense);

/// Distance of zero from the subdifferential of the sparse-group objective at coef.
double kkt_residual(const DesignAssembly& design, const PenaltySpec& penalty,
                    const Eigen::VectorXd& coef);

/// Smallest mu at which every penalized coefficient is zero, for mixing alpha.
/// Unpenalized columns are refit by least squares before the gradient is taken.
double mu_max(const DesignAssembly& design, double alpha);

// Estimators ----------------------------------------------------------------

/// Monotone FISTA with gradient-based restart and backtracking for kinds l1,
/// group and sparse_group. Non-convergence is reported through Solution::converged.
Solution fit_proximal(const DesignAssembly& design, const PenaltySpec& penalty,
                      const SolverOptions& opts = {},
                      const Eigen::VectorXd* warm_start = nullptr);

/// Closed-form ridge: (Z'Z/T + mu M) c = Z'y / T, M the penalize mask.
/// Throws Error{rank_deficiency} when the system is singular.
Solution ridge_fit(const DesignAssembly& design, double mu);

/// Least squares on all columns. Throws Error{rank_deficiency} listing the
/// dependent columns.
Solution ols_fit(const DesignAssembly& design);

/// Sparse-plus-dense fit by block alternation between a closed-form ridge step
/// (unpenalized columns and dense part) and a sparse-group step (sparse part).
/// `dense_mask` restricts the dense part to a subset of penalized columns; the
/// default is every penalized column.
Solution lava_fit(const DesignAssembly& design, double mu1, double mu2, double alpha,
                  const SolverOptions& opts = {},
                  const std::vector<bool>* dense_mask = nullptr);

}  // namespace spdmidas
