#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "spdmidas/factor_extraction.hpp"
#include "spdmidas/nowcast_models.hpp"
#include "spdmidas/panel_data.hpp"

namespace spdmidas {

/// Nowcast horizon: the information date is the end of `info_month` (1..3) of
/// the target quarter; leads count the current-quarter high-frequency slots.
struct Horizon {
  std::string label;
  int info_month = 3;
  int monthly_leads = 3;
  int weekly_leads = 13;
  /// Per-panel overrides of the frequency-based leads.
  LeadMap overrides;

  int leads_for(const std::string& panel_id, Frequency frequency) const;
  Date information_date(Quarter origin) const { return origin.month_end(info_month); }
};

/// 2-month, 1-month and end-of-quarter horizons.
std::vector<Horizon> default_horizons();

/// Inclusive range of origins; unset ends are open.
struct Subsample {
  std::string label = "full";
  std::optional<Quarter> first;
  std::optional<Quarter> last;

  bool contains(Quarter q) const {
    return (!first || q >= *first) && (!last || q <= *last);
  }
};

/// full, up to 2019Q4, 2020Q1 onward.
std::vector<Subsample> default_subsamples();

enum class MissingPolicy { complete, trim };

struct HarnessConfig {
  Quarter in_sample_end = Quarter::of(2007, 4);
  Quarter first_origin = Quarter::of(2008, 1);
  Quarter last_origin = Quarter::of(2022, 4);
  std::vector<Horizon> horizons = default_horizons();
  std::vector<Subsample> subsamples = default_subsamples();
  /// Name (label) of the benchmark model; defaults to the AR model.
  std::string benchmark = "AR";
  /// Penalties are re-tuned at every k-th origin and reused in between.
  int retune_every = 1;
  /// Upper bound on worker threads.
  int jobs = 1;
  MissingPolicy missing = MissingPolicy::complete;
  CompletionConfig completion;

  void validate() const;
};

/// Model inputs for one (origin, horizon) together with the audit trail.
struct PreparedOrigin {
  ModelInputs inputs;
  Date information_date;
  /// Latest observation timestamp that entered the inputs.
  Date max_timestamp;
};

/// Slices the store at the horizon's information date, transforms, aligns every
/// panel on a calendar ending at the origin and completes (or trims) it. The
/// target stops at origin - 1, which must already be released.
/// `external_keys` are series delivered as observed factors instead of panels.
PreparedOrigin prepare_origin(const HarnessConfig& config, const VintageStore& store, Quarter origin,
                              const Horizon& horizon, const std::set<std::string>& external_keys = {});

/// Leads of every panel role of `model` at `horizon`.
LeadMap leads_for(const ModelConfig& model, const Horizon& horizon, const ModelInputs& inputs);

struct NowcastRecord {
  Quarter origin;
  std::string horizon;
  std::string model;
  double nowcast = 0.0;
  std::optional<double> realized;
  /// realized - nowcast; NaN when the record failed or the realization is unknown.
  double error = 0.0;
  bool ok = false;
  std::string reason;
  Date information_date;
  Date max_timestamp;
  PenaltySpec penalty;
  bool tuned = false;
  /// The final fit met the solver's convergence test; false as well when the
  /// record failed because no fit converged.
  bool converged = true;
};

/// Runs every model at every origin and horizon. Records come back sorted by
/// model (input order), horizon (config order) and origin. Throws std::logic_error
/// if a nowcast touched data stamped after its information date.
std::vector<NowcastRecord> run_expanding(const HarnessConfig& config,
                                         const std::vector<ModelConfig>& models,
                                         const VintageStore& store);

/// Records of one model at one horizon, in origin order.
std::vector<NowcastRecord> select_records(const std::vector<NowcastRecord>& records,
                                          const std::string& model, const std::string& horizon);

/// sqrt(mean squared error) over successful records inside the subsample.
double rmse(const std::vector<NowcastRecord>& records, const Subsample& subsample = {});

/// Ratio of model to benchmark RMSE over the origins both cover inside the subsample.
/// Throws Error{data} when that set is empty.
double relative_rmse(const std::vector<NowcastRecord>& model,
                     const std::vector<NowcastRecord>& benchmark, const Subsample& subsample = {});

/// k-th value: sqrt of the sum of squared errors through the k-th origin.
std::vector<double> cumsum_series(const std::vector<NowcastRecord>& records,
                                  const Subsample& subsample = {});

struct ReportCell {
  std::string model;
  std::string horizon;
  std::string subsample;
  /// Absolute RMSE for the benchmark, relative RMSE for other models.
  double value = 0.0;
  bool relative = false;
  int count = 0;
  int failed = 0;
};

struct CumsumSeries {
  std::string model;
  std::string horizon;
  std::string subsample;
  std::vector<Quarter> origins;
  std::vector<double> values;
};

struct EvaluationReport {
  std::string benchmark;
  std::vector<std::string> models;
  std::vector<std::string> horizons;
  std::vector<std::string> subsamples;
  std::vector<ReportCell> cells;
  std::vector<CumsumSeries> cumsum;
  std::vector<NowcastRecord> records;
  bool audit_passed = true;

  const ReportCell* cell(const std::string& model, const std::string& horizon,
                         const std::string& subsample) const;
};

/// Table-shaped summary per (model, horizon, subsample). Subsamples without
/// successful records are skipped with a warning.
EvaluationReport subsample_report(const std::vector<NowcastRecord>& records,
                                  const HarnessConfig& config);

/// Long format `model,horizon,subsample,metric,value`.
void write_report_csv(const std::filesystem::path& path, const EvaluationReport& report);
/// Nested subsample -> model -> horizon JSON.
void write_report_json(const std::filesystem::path& path, const EvaluationReport& report);
/// `model,horizon,subsample,origin,cumsum`.
void write_cumsum_csv(const std::filesystem::path& path, const EvaluationReport& report);
/// One row per record.
void write_records_csv(const std::filesystem::path& path, const std::vector<NowcastRecord>& records);

// Synthetic sparse-plus-dense data ----------------------------------------------

struct RegimeShift {
  Quarter start = Quarter::of(2020, 1);
  /// Multiplies the common factor innovations from `start` on.
  double factor_scale = 3.0;
};

struct DgpConfig {
  std::uint64_t seed = 1;
  Quarter start = Quarter::of(1983, 1);
  int quarters = 160;
  int macro_series = 40;
  int weekly_series = 20;
  int factors = 1;
  /// Number of observed series entering the target with sparse coefficients.
  int sparsity = 5;
  /// Scale of the factor loadings in the target (0 disables the dense part).
  double dense_scale = 1.0;
  /// Scale of the active-series coefficients.
  double sparse_scale = 1.0;
  double noise_sd = 1.0;
  double intercept = 0.5;
  double ar_coefficient = 0.2;
  double factor_persistence = 0.5;
  double idiosyncratic_persistence = 0.3;
  /// Basis degree of the true MIDAS weight functions.
  int degree = 3;
  std::optional<RegimeShift> shift;

  void validate() const;
};

/// Ground truth of a synthetic draw. Coefficients act on the end-of-quarter
/// Legendre-aggregated regressors (one lag quarter plus the full current quarter).
struct DgpTruth {
  std::vector<std::string> active_keys;
  /// Per active series, D+1 coefficients.
  std::vector<std::vector<double>> sparse_coefficients;
  /// Per factor, D+1 coefficients.
  std::vector<std::vector<double>> dense_coefficients;
  double intercept = 0.0;
  double ar_coefficient = 0.0;
  std::optional<RegimeShift> shift;
  /// Monthly common factors, one row per factor.
  Eigen::MatrixXd factors;
  std::vector<Date> factor_dates;
};

struct SyntheticData {
  VintageStore store;
  DgpTruth truth;
};

/// Monthly panel `macro` (factor plus idiosyncratic parts) and weekly panel
/// `financial` (idiosyncratic only); identical seeds give identical draws.
SyntheticData synthetic_dgp(const DgpConfig& config);

void write_truth_json(const std::filesystem::path& path, const DgpTruth& truth);

}  // namespace spdmidas
