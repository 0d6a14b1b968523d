#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "spdmidas/error.hpp"
#include "spdmidas/midas_basis.hpp"
#include "spdmidas/panel_data.hpp"

namespace spdmidas {

/// Column-standardized matrix (mean 0, sample sd 1 with the n-1 convention).
struct StandardizedMatrix {
  Eigen::MatrixXd matrix;
  Eigen::VectorXd column_means;
  Eigen::VectorXd column_sds;

  /// Standardizes new rows with the stored statistics.
  Eigen::MatrixXd apply(const Eigen::MatrixXd& rows) const;
};

/// Throws Error{degenerate_column} naming the column (or `names[c]`) when a
/// column is constant, Error{data} for fewer than two rows or missing entries.
StandardizedMatrix standardize(const Eigen::MatrixXd& matrix,
                               std::span<const std::string> names = {});

struct CompletionConfig {
  int max_rank = 6;
  /// Fixed regularization level; unset selects it by the geometric lambda path.
  std::optional<double> lambda;
  double tolerance = 1e-6;
  int max_iterations = 500;
  double lambda_decay = 0.7;
  /// Path floor as a fraction of lambda0.
  double lambda_floor = 1e-4;

  void validate() const;
};

struct SoftImputeResult {
  Eigen::MatrixXd completed;
  double lambda = 0.0;
  int rank = 0;
  int iterations = 0;
  bool converged = false;
  /// 0.5 * ||P_obs(M - Z)||^2 + lambda * ||Z||_* after each iteration.
  std::vector<double> objective_trace;
};

/// Raised when soft-impute exhausts its iteration budget; carries the last iterate.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& message, SoftImputeResult last)
      : Error(ErrorKind::convergence, message), last_(std::move(last)) {}
  const SoftImputeResult& last_iterate() const { return last_; }

 private:
  SoftImputeResult last_;
};

/// Largest singular value of the zero-filled matrix: the smallest lambda at
/// which soft-impute returns the zero solution.
double lambda_zero(const Eigen::MatrixXd& with_missing);

/// Soft-impute at a fixed lambda: fill missing entries from the current fit,
/// soft-threshold the SVD by lambda, keep at most max_rank components, repeat
/// until the relative Frobenius change is below the tolerance. Observed entries
/// of `completed` equal the input; missing ones come from the low-rank fit.
SoftImputeResult soft_impute(const Eigen::MatrixXd& with_missing, double lambda,
                             const CompletionConfig& config,
                             const Eigen::MatrixXd* warm_start = nullptr);

/// Standardizes observed entries per column, walks lambda = lambda0 * decay^i
/// down until the fitted rank reaches max_rank - 1 (or the floor), and maps the
/// fit back to the original scale.
SoftImputeResult complete_matrix(const Eigen::MatrixXd& with_missing,
                                 const CompletionConfig& config);

/// Completes a panel over the slots between its first and last observation
/// (series in columns, high-frequency slots in rows). Slots outside that span are left as is.
HighFrequencyPanel complete_panel(const HighFrequencyPanel& panel, const CompletionConfig& config);

struct FactorModelFit {
  std::string panel_id;
  Eigen::MatrixXd loadings;       // K x R, loadings' * loadings / K = I
  Eigen::MatrixXd factor_scores;  // rows x R
  Eigen::VectorXd eigenvalues;    // descending, min(K, rows) entries
  Eigen::VectorXd column_means;
  Eigen::VectorXd column_sds;

  int rank() const { return static_cast<int>(loadings.cols()); }
  /// Factor scores for raw (unstandardized) rows.
  Eigen::MatrixXd project(const Eigen::MatrixXd& raw_rows) const;
  Eigen::MatrixXd reconstruction() const { return factor_scores * loadings.transpose(); }
};

/// Eigenvalues of the column covariance X'X / rows, descending, min(K, rows) entries.
Eigen::VectorXd covariance_eigenvalues(const StandardizedMatrix& std_matrix);

/// Principal components with deterministic signs (largest-magnitude loading positive).
/// Throws Error{rank_deficiency} when rank exceeds the numerical rank of the data.
FactorModelFit pca_extract(const StandardizedMatrix& std_matrix, int rank,
                           std::string panel_id = {});

enum class RankMethod { growth_ratio, eigenvalue_ratio, fixed };

std::string_view to_string(RankMethod method);
RankMethod parse_rank_method(std::string_view name);

struct RankSelection {
  RankMethod method = RankMethod::growth_ratio;
  int kmax = 0;
  int selected = 0;
  std::vector<double> criterion;  // criterion value for k = 1..kmax
};

/// min(8, floor(cols / 2), floor(rows / 2)), at least 1.
int default_kmax(Eigen::Index cols, Eigen::Index rows);

/// Growth-ratio selection: V(k) = sum_{j>k} mu_j, GR(k) = ln(V(k-1)/V(k)) / ln(V(k)/V(k+1)).
RankSelection growth_ratio_select(std::span<const double> eigenvalues, int kmax);
/// Eigenvalue-ratio selection: ER(k) = mu_k / mu_{k+1}.
RankSelection eigenvalue_ratio_select(std::span<const double> eigenvalues, int kmax);

/// Dispatch on `method`. kmax defaults to default_kmax(cols, rows) and is clamped
/// so the criterion has the eigenvalues it needs; `fixed` returns fixed_rank.
RankSelection select_rank(const Eigen::VectorXd& eigenvalues, RankMethod method,
                          std::optional<int> kmax, Eigen::Index cols, Eigen::Index rows,
                          int fixed_rank);

/// Stacks an aggregated tensor into PCA layout: rows (d, t) with d slowest,
/// columns = series.
Eigen::MatrixXd stack_for_pca(const AggregatedTensor& tensor);
/// Inverse layout for factor scores: rows (d, t) x R into a tensor with R "series".
AggregatedTensor unstack_factors(const Eigen::MatrixXd& scores, const AggregatedTensor& like);

/// Treats an observed series (e.g. an activity or financial-conditions index)
/// as one factor and aggregates it like any predictor.
AggregatedTensor ingest_external_factor(const RawSeries& series, const LagLeadSpec& spec,
                                        const LegendreBasis& basis, Quarter first, Quarter last);

/// `panel_id,factor_index,d,period,value` rows for every (r, d, t).
void write_factor_scores_csv(const std::filesystem::path& path, const std::string& panel_id,
                             const AggregatedTensor& factors);

}  // namespace spdmidas
