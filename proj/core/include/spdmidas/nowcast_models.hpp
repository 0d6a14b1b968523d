#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "spdmidas/factor_extraction.hpp"
#include "spdmidas/midas_basis.hpp"
#include "spdmidas/panel_data.hpp"
#include "spdmidas/penalized_solvers.hpp"

namespace spdmidas {

enum class ModelKind {
  ar,
  sg_lasso_midas,
  ridge_midas,
  sg_lava_midas,
  famidas,
  sg_lasso_famidas,
  lasso_umidas,
  lasso_faumidas,
};

std::string_view to_string(ModelKind kind);
/// Accepts the upper-case names used in reports (e.g. "SG_LASSO_FAMIDAS").
ModelKind parse_model_kind(std::string_view name);

bool uses_factors(ModelKind kind);
bool uses_predictors(ModelKind kind);
bool is_penalized(ModelKind kind);

/// How one panel enters a model.
struct PanelRole {
  std::string panel_id;
  /// Predictor blocks of this panel enter the (penalized) regression.
  bool include_sparse = true;
  /// Factors extracted from this panel enter unpenalized; for lava kinds the
  /// panel's columns also carry the dense part.
  bool include_dense_factors = false;
  /// Low-frequency lags q of the panel's MIDAS window.
  int lags = 1;
  RankMethod rank_method = RankMethod::growth_ratio;
  /// Rank used by RankMethod::fixed; 0 means no factors.
  int fixed_rank = 1;
  /// Upper bound of the rank scan; unset selects default_kmax.
  std::optional<int> kmax;
  /// Key of an observed series used as this panel's single factor instead of PCA.
  std::optional<std::string> external_factor;
};

struct CvPlan {
  int folds = 5;
  void validate() const;
};

struct PenaltyGrid {
  int points = 50;
  /// Smallest grid value as a fraction of the largest.
  double ratio = 1e-4;
  /// Points per axis of the lava cross-product grid.
  int lava_points = 10;
  /// Mixing weights tried by cross-validation (sparse-group kinds only).
  std::vector<double> alphas{0.5};
};

struct ModelConfig {
  std::string name;
  ModelKind kind = ModelKind::ar;
  int ar_lags = 4;
  int degree = 3;
  std::vector<PanelRole> panels;
  PenaltyGrid grid;
  CvPlan cv;
  SolverOptions solver;
  /// Fixed penalty that bypasses cross-validation.
  std::optional<PenaltySpec> penalty;

  std::string label() const { return name.empty() ? std::string(to_string(kind)) : name; }
  void validate() const;
};

/// Everything a model may look at for one origin: the target released so far
/// and the balanced panels on a calendar ending at the origin quarter.
struct ModelInputs {
  Quarter origin;
  TargetSeries target;
  std::vector<HighFrequencyPanel> panels;
  /// Transformed observed series available as external factors, by key.
  std::map<std::string, RawSeries> external;

  const HighFrequencyPanel& panel(const std::string& id) const;
};

/// Leads per panel id for the current horizon (panels absent from the map use 0).
using LeadMap = std::map<std::string, int>;

/// Training design plus the regressor row of the origin quarter, built with
/// statistics (column scales, factor loadings) from the training rows only.
struct DesignBundle {
  DesignAssembly design;
  Eigen::RowVectorXd origin_row;
  Quarter first_period;
  Quarter last_period;
  std::vector<FactorModelFit> factor_fits;
  std::vector<RankSelection> rank_selections;
  std::vector<std::string> series_keys;  // per tag, empty for non-predictor columns
  /// Lava only: which penalized columns carry a dense part.
  std::vector<bool> dense_mask;
};

/// Assembles the regression for `config` at `inputs.origin`. Penalized columns
/// are divided by their training standard deviation.
/// Throws Error{span} when the history cannot support the lags and windows.
DesignBundle assemble_design(const ModelConfig& config, const ModelInputs& inputs,
                             const LeadMap& leads);

struct CvScore {
  PenaltySpec penalty;
  double score = 0.0;
};

struct TuningResult {
  PenaltySpec penalty;
  std::vector<CvScore> scores;
};

/// Contiguous, near-equal blocks [begin, end) partitioning 0..rows.
std::vector<std::pair<Eigen::Index, Eigen::Index>> contiguous_folds(Eigen::Index rows, int folds);

/// Candidate penalties for the model kind in decreasing order along each axis.
std::vector<PenaltySpec> penalty_grid(const ModelConfig& config, const DesignBundle& bundle);

/// Blocked cross-validation: each grid point is fit leaving one contiguous block
/// out and scored by the held-out mean squared error averaged over folds. The
/// smallest score wins; ties go to the smaller penalty, then to the earlier point.
TuningResult blocked_cv_tune(const ModelConfig& config, const DesignBundle& bundle);

struct FittedNowcastModel {
  std::string name;
  ModelKind kind = ModelKind::ar;
  PenaltySpec penalty;
  Solution solution;
  DesignBundle bundle;
  /// Coefficients on the unstandardized column scale.
  Eigen::VectorXd coefficients;
};

/// Fits the assembled design with `penalty` (ignored by unpenalized kinds).
FittedNowcastModel fit_model(const ModelConfig& config, DesignBundle bundle,
                             const PenaltySpec& penalty);

/// Nowcast for the origin quarter of the fitted model.
double predict_one(const FittedNowcastModel& model);
/// Prediction for an arbitrary standardized regressor row.
double predict_row(const FittedNowcastModel& model, const Eigen::RowVectorXd& row);

struct NowcastResult {
  double value = 0.0;
  PenaltySpec penalty;
  bool tuned = false;
  FittedNowcastModel model;
};

/// Assemble, tune (unless `cached` or a fixed penalty is given), fit and predict.
NowcastResult nowcast(const ModelConfig& config, const ModelInputs& inputs, const LeadMap& leads,
                      const std::optional<PenaltySpec>& cached = std::nullopt);

/// `role,panel,series,d,value` rows on the original column scale, followed by
/// `penalty` rows holding alpha, mu, mu1 and mu2 in the series field.
void write_coefficients_csv(const std::filesystem::path& path, const FittedNowcastModel& model);

}  // namespace spdmidas
