#include "spdmidas/nowcast_models.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>
#include <fmt/os.h>

#include "spdmidas/error.hpp"
#include "spdmidas/log.hpp"

namespace spdmidas {

namespace {

constexpr struct {
  ModelKind kind;
  const char* name;
} kKindNames[] = {
    {ModelKind::ar, "AR"},
    {ModelKind::sg_lasso_midas, "SG_LASSO_MIDAS"},
    {ModelKind::ridge_midas, "RIDGE_MIDAS"},
    {ModelKind::sg_lava_midas, "SG_LAVA_MIDAS"},
    {ModelKind::famidas, "FAMIDAS"},
    {ModelKind::sg_lasso_famidas, "SG_LASSO_FAMIDAS"},
    {ModelKind::lasso_umidas, "LASSO_UMIDAS"},
    {ModelKind::lasso_faumidas, "LASSO_FAUMIDAS"},
};

bool is_umidas(ModelKind kind) {
  return kind == ModelKind::lasso_umidas || kind == ModelKind::lasso_faumidas;
}

// One block of regressor columns over the rows [first, origin].
struct Block {
  Eigen::MatrixXd values;
  std::vector<ColumnTag> tags;
  std::vector<int> local_group;  // -1 unpenalized, otherwise group id within the block
  std::vector<std::string> keys;
  bool dense = false;
};

Eigen::MatrixXd window_weights(const LagLeadSpec& spec, const LegendreBasis& basis, bool umidas) {
  return umidas ? indicator_weights(spec) : weight_matrix(spec, basis);
}

AggregatedTensor aggregate_panel(const HighFrequencyPanel& panel, const LagLeadSpec& spec,
                                 const LegendreBasis& basis, bool umidas, Quarter first,
                                 Quarter last) {
  return aggregate_with(panel, spec, window_weights(spec, basis, umidas),
                        umidas ? Dictionary::indicator : Dictionary::legendre, first, last);
}

// Factor tensor for one panel: PCA on the training rows, projection for all rows.
AggregatedTensor pca_factors(const AggregatedTensor& full, const PanelRole& role, Quarter last_train,
                             DesignBundle& bundle) {
  const int train_rows = last_train - full.first_period + 1;
  AggregatedTensor train = full;
  train.values = full.values.topRows(train_rows);
  const Eigen::MatrixXd stacked = stack_for_pca(train);
  const StandardizedMatrix std_train = standardize(stacked);

  const Eigen::VectorXd ev = role.rank_method == RankMethod::fixed ? Eigen::VectorXd()
                                                                   : covariance_eigenvalues(std_train);
  const RankSelection selection = select_rank(ev, role.rank_method, role.kmax, stacked.cols(),
                                              stacked.rows(), role.fixed_rank);
  bundle.rank_selections.push_back(selection);
  if (selection.selected == 0) {
    AggregatedTensor none = full;
    none.series_count = 0;
    none.values.resize(full.rows(), 0);
    return none;
  }
  FactorModelFit fit = pca_extract(std_train, selection.selected, role.panel_id);
  const Eigen::MatrixXd scores = fit.project(stack_for_pca(full));
  bundle.factor_fits.push_back(std::move(fit));
  return unstack_factors(scores, full);
}

AggregatedTensor external_factor(const RawSeries& series, const LagLeadSpec& spec,
                                 const LegendreBasis& basis, bool umidas, Quarter first,
                                 Quarter last) {
  const std::vector<RawSeries> one{series};
  TargetCalendar cal = TargetCalendar::covering(one);
  if (cal.last() < last) cal.periods = last - cal.first + 1;
  const HighFrequencyPanel panel = align_to_target(one, cal, series.key);
  return aggregate_panel(panel, spec, basis, umidas, first, last);
}

double penalty_size(const PenaltySpec& p) {
  return p.kind == PenaltyKind::lava ? p.mu1 + p.mu2 : p.mu;
}

bool same_penalty(const PenaltySpec& a, const PenaltySpec& b) {
  return a.kind == b.kind && a.alpha == b.alpha && a.mu == b.mu && a.mu1 == b.mu1 && a.mu2 == b.mu2;
}

std::vector<double> log_grid(double top, double ratio, int points) {
  std::vector<double> out;
  if (points <= 1) return {top};
  for (int i = 0; i < points; ++i) {
    out.push_back(top * std::pow(ratio, static_cast<double>(i) / (points - 1)));
  }
  return out;
}

double ridge_scale(const DesignAssembly& d) {
  double sum = 0.0;
  int n = 0;
  for (Eigen::Index c = 0; c < d.cols(); ++c) {
    if (!d.penalized(c)) continue;
    sum += d.columns.col(c).squaredNorm() / static_cast<double>(d.rows());
    ++n;
  }
  return n > 0 && sum > 0.0 ? sum / n : 1.0;
}

Solution ols_or_min_norm(const DesignAssembly& design) {
  try {
    return ols_fit(design);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::rank_deficiency) throw;
    log_warn("{}; using the minimum-norm least-squares solution", e.what());
    Solution sol;
    sol.coefficients = design.columns.completeOrthogonalDecomposition().solve(design.response);
    sol.objective_trace.push_back(least_squares_loss(design, sol.coefficients));
    sol.iterations = 1;
    sol.converged = true;
    return sol;
  }
}

Solution solve(const ModelConfig& config, const DesignBundle& bundle, const DesignAssembly& design,
               const PenaltySpec& penalty, const Eigen::VectorXd* warm = nullptr) {
  switch (config.kind) {
    case ModelKind::ar:
    case ModelKind::famidas:
      return ols_or_min_norm(design);
    case ModelKind::ridge_midas:
      return ridge_fit(design, penalty.mu);
    case ModelKind::sg_lava_midas:
      return lava_fit(design, penalty.mu1, penalty.mu2, penalty.alpha, config.solver,
                      &bundle.dense_mask);
    default:
      return fit_proximal(design, penalty, config.solver, warm);
  }
}

}  // namespace

std::string_view to_string(ModelKind kind) {
  for (const auto& e : kKindNames) {
    if (e.kind == kind) return e.name;
  }
  return "UNKNOWN";
}

ModelKind parse_model_kind(std::string_view name) {
  for (const auto& e : kKindNames) {
    if (name == e.name) return e.kind;
  }
  throw Error(ErrorKind::config, fmt::format("unknown model kind '{}'", name));
}

bool uses_factors(ModelKind kind) {
  return kind == ModelKind::famidas || kind == ModelKind::sg_lasso_famidas ||
         kind == ModelKind::lasso_faumidas;
}

bool uses_predictors(ModelKind kind) {
  return kind != ModelKind::ar && kind != ModelKind::famidas;
}

bool is_penalized(ModelKind kind) { return uses_predictors(kind); }

void CvPlan::validate() const {
  if (folds < 2) throw Error(ErrorKind::config, fmt::format("cv folds must be >= 2, got {}", folds));
}

void ModelConfig::validate() const {
  if (ar_lags < 0) throw Error(ErrorKind::config, "ar_lags must be >= 0");
  if (degree < 0) throw Error(ErrorKind::config, "basis degree must be >= 0");
  cv.validate();
  if (is_penalized(kind) && !penalty) {
    if (grid.points < 1 || !(grid.ratio > 0.0 && grid.ratio <= 1.0) || grid.lava_points < 1 ||
        grid.alphas.empty()) {
      throw Error(ErrorKind::config, fmt::format("model {}: empty or invalid penalty grid", label()));
    }
    for (double a : grid.alphas) {
      if (!(a >= 0.0 && a <= 1.0)) {
        throw Error(ErrorKind::config, fmt::format("model {}: alpha {} outside [0,1]", label(), a));
      }
    }
  }
  if (penalty) penalty->validate();
  for (const auto& role : panels) {
    if (!role.include_sparse && !role.include_dense_factors) {
      throw Error(ErrorKind::config,
                  fmt::format("model {}: panel '{}' is neither sparse nor dense", label(),
                              role.panel_id));
    }
    if (role.lags < 0) throw Error(ErrorKind::config, "panel lags must be >= 0");
    if (role.rank_method == RankMethod::fixed && role.fixed_rank < 0) {
      throw Error(ErrorKind::config, "fixed factor rank must be >= 0");
    }
  }
  if (uses_predictors(kind) &&
      std::none_of(panels.begin(), panels.end(), [](const PanelRole& r) { return r.include_sparse; })) {
    throw Error(ErrorKind::config, fmt::format("model {} has no predictor panel", label()));
  }
}

const HighFrequencyPanel& ModelInputs::panel(const std::string& id) const {
  for (const auto& p : panels) {
    if (p.panel_id() == id) return p;
  }
  throw Error(ErrorKind::data, fmt::format("panel '{}' is not present in the data", id));
}

DesignBundle assemble_design(const ModelConfig& config, const ModelInputs& inputs,
                             const LeadMap& leads) {
  config.validate();
  const Quarter origin = inputs.origin;
  const TargetSeries& y = inputs.target;
  if (y.values.empty()) throw Error(ErrorKind::span, "target series is empty");
  const Quarter last_train = std::min(y.last(), origin - 1);
  if (config.ar_lags > 0 && y.last() < origin - 1) {
    throw Error(ErrorKind::span, fmt::format("target for {} is not released by the origin {}",
                                             (origin - 1).label(), origin.label()));
  }
  const LegendreBasis basis(config.degree);
  const bool umidas = is_umidas(config.kind);

  Quarter first = y.first + config.ar_lags;
  auto spec_for = [&](const HighFrequencyPanel& panel, const PanelRole& role) {
    const auto it = leads.find(role.panel_id);
    LagLeadSpec spec{panel.m(), role.lags, it == leads.end() ? 0 : it->second};
    spec.validate();
    return spec;
  };
  auto predictor_role = [&](const PanelRole& r) { return uses_predictors(config.kind) && r.include_sparse; };
  auto factor_role = [&](const PanelRole& r) { return uses_factors(config.kind) && r.include_dense_factors; };

  for (const auto& role : config.panels) {
    if (!predictor_role(role) && !factor_role(role)) continue;
    if (factor_role(role) && role.external_factor) {
      const auto it = inputs.external.find(*role.external_factor);
      if (it == inputs.external.end()) {
        throw Error(ErrorKind::data,
                    fmt::format("external factor '{}' is not available", *role.external_factor));
      }
    }
    if (!predictor_role(role) && role.external_factor) continue;
    const auto& panel = inputs.panel(role.panel_id);
    const auto spec = spec_for(panel, role);
    const auto [lo, hi] = window_range(panel, spec);
    if (hi < origin) {
      throw Error(ErrorKind::span, fmt::format("panel '{}' does not reach the origin {}",
                                               role.panel_id, origin.label()));
    }
    first = std::max(first, lo);
  }
  const int train_rows = last_train - first + 1;
  if (train_rows < 2) {
    throw Error(ErrorKind::span,
                fmt::format("model {}: only {} usable training quarters before {}", config.label(),
                            std::max(train_rows, 0), origin.label()));
  }
  const int rows = origin - first + 1;  // training rows plus the origin row
  DesignBundle bundle;
  bundle.first_period = first;
  bundle.last_period = last_train;

  std::vector<Block> blocks;
  {
    Block base;
    base.values.resize(rows, 1 + config.ar_lags);
    base.values.col(0).setOnes();
    base.tags.push_back({ColumnRole::intercept, "", 0, 0});
    base.local_group.push_back(-1);
    base.keys.emplace_back();
    for (int j = 1; j <= config.ar_lags; ++j) {
      for (int i = 0; i < rows; ++i) base.values(i, j) = y.at(first + i - j);
      base.tags.push_back({ColumnRole::ar_lag, "", j, 0});
      base.local_group.push_back(-1);
      base.keys.emplace_back();
    }
    blocks.push_back(std::move(base));
  }
  // Penalized predictor blocks, one group per series (per column for UMIDAS).
  for (const auto& role : config.panels) {
    if (!predictor_role(role)) continue;
    const auto& panel = inputs.panel(role.panel_id);
    const auto tensor = aggregate_panel(panel, spec_for(panel, role), basis, umidas, first, origin);
    Block b;
    b.values = tensor.values;
    b.dense = role.include_dense_factors;
    for (int k = 0; k < tensor.series_count; ++k) {
      for (int d = 0; d < tensor.basis_size; ++d) {
        b.tags.push_back({ColumnRole::predictor, role.panel_id, k, d});
        b.local_group.push_back(umidas ? k * tensor.basis_size + d : k);
        b.keys.push_back(panel.keys()[static_cast<std::size_t>(k)]);
      }
    }
    blocks.push_back(std::move(b));
  }
  // Unpenalized factor blocks.
  for (const auto& role : config.panels) {
    if (!factor_role(role)) continue;
    AggregatedTensor factors;
    if (role.external_factor) {
      const auto& series = inputs.external.at(*role.external_factor);
      const LagLeadSpec spec = [&] {
        const auto it = leads.find(role.panel_id);
        LagLeadSpec s{series.frequency.periods_per_target(), role.lags,
                      it == leads.end() ? 0 : it->second};
        s.validate();
        return s;
      }();
      factors = external_factor(series, spec, basis, umidas, first, origin);
      bundle.rank_selections.push_back({RankMethod::fixed, 1, 1, {}});
    } else {
      const auto& panel = inputs.panel(role.panel_id);
      const auto full = aggregate_panel(panel, spec_for(panel, role), basis, umidas, first, origin);
      factors = pca_factors(full, role, last_train, bundle);
    }
    Block b;
    b.values = factors.values;
    for (int r = 0; r < factors.series_count; ++r) {
      for (int d = 0; d < factors.basis_size; ++d) {
        b.tags.push_back({ColumnRole::factor, role.panel_id, r, d});
        b.local_group.push_back(-1);
        b.keys.emplace_back();
      }
    }
    blocks.push_back(std::move(b));
  }

  Eigen::Index cols = 0;
  for (const auto& b : blocks) cols += b.values.cols();
  Eigen::MatrixXd all(rows, cols);
  std::vector<int> group_of;
  std::vector<ColumnTag> tags;
  Eigen::Index at = 0;
  int group_base = 0;
  for (const auto& b : blocks) {
    all.middleCols(at, b.values.cols()) = b.values;
    int used = 0;
    for (std::size_t i = 0; i < b.tags.size(); ++i) {
      const int g = b.local_group[i];
      group_of.push_back(g < 0 ? -1 : group_base + g);
      used = std::max(used, g + 1);
      tags.push_back(b.tags[i]);
      bundle.series_keys.push_back(b.keys[i]);
      if (config.kind == ModelKind::sg_lava_midas && g >= 0) bundle.dense_mask.push_back(b.dense);
    }
    group_base += used;
    at += b.values.cols();
  }
  if (config.kind == ModelKind::sg_lava_midas &&
      std::none_of(bundle.dense_mask.begin(), bundle.dense_mask.end(), [](bool v) { return v; })) {
    bundle.dense_mask.assign(bundle.dense_mask.size(), true);
  }
  if (config.kind != ModelKind::sg_lava_midas) bundle.dense_mask.clear();
  // Penalties act on every non-AR, non-factor column for penalized kinds.
  if (!is_penalized(config.kind)) std::fill(group_of.begin(), group_of.end(), -1);

  Eigen::VectorXd response(train_rows);
  for (int i = 0; i < train_rows; ++i) response[i] = y.at(first + i);
  DesignAssembly design = make_design(std::move(response), all.topRows(train_rows), group_of);
  design.tags = std::move(tags);
  bundle.origin_row = all.row(rows - 1);
  for (Eigen::Index c = 0; c < design.cols(); ++c) {
    if (!design.penalized(c)) continue;
    const auto col = design.columns.col(c);
    const double mean = col.mean();
    const double sd = std::sqrt((col.array() - mean).square().sum() / std::max<Eigen::Index>(train_rows - 1, 1));
    const double scale = sd > 0.0 ? sd : 1.0;
    design.column_scales[c] = scale;
    design.columns.col(c) /= scale;
    bundle.origin_row[c] /= scale;
  }
  design.validate();
  const auto fixed_cols = static_cast<int>(design.unpenalized().size());
  if (train_rows <= fixed_cols) {
    throw Error(ErrorKind::span,
                fmt::format("model {}: {} training quarters before {} cannot identify {} unpenalized "
                            "coefficients",
                            config.label(), train_rows, origin.label(), fixed_cols));
  }
  bundle.design = std::move(design);
  return bundle;
}

std::vector<std::pair<Eigen::Index, Eigen::Index>> contiguous_folds(Eigen::Index rows, int folds) {
  if (folds < 2 || rows < folds) {
    throw Error(ErrorKind::config,
                fmt::format("cannot split {} rows into {} contiguous folds", rows, folds));
  }
  std::vector<std::pair<Eigen::Index, Eigen::Index>> out;
  for (int f = 0; f < folds; ++f) {
    out.emplace_back(rows * f / folds, rows * (f + 1) / folds);
  }
  return out;
}

std::vector<PenaltySpec> penalty_grid(const ModelConfig& config, const DesignBundle& bundle) {
  const auto& d = bundle.design;
  const auto& g = config.grid;
  std::vector<PenaltySpec> out;
  switch (config.kind) {
    case ModelKind::ar:
    case ModelKind::famidas:
      return out;
    case ModelKind::ridge_midas:
      for (double mu : log_grid(100.0 * ridge_scale(d), g.ratio, g.points)) {
        out.push_back(PenaltySpec::ridge(mu));
      }
      return out;
    case ModelKind::sg_lava_midas: {
      const double alpha = g.alphas.front();
      const double top = std::max(mu_max(d, alpha), 1e-12);
      for (double mu1 : log_grid(top, g.ratio, g.lava_points)) {
        for (double mu2 : log_grid(100.0 * ridge_scale(d), g.ratio, g.lava_points)) {
          out.push_back(PenaltySpec::lava(mu1, mu2, alpha));
        }
      }
      return out;
    }
    case ModelKind::lasso_umidas:
    case ModelKind::lasso_faumidas: {
      const double top = std::max(mu_max(d, 1.0), 1e-12);
      for (double mu : log_grid(top, g.ratio, g.points)) out.push_back(PenaltySpec::lasso(mu));
      return out;
    }
    default:
      for (double alpha : g.alphas) {
        const double top = std::max(mu_max(d, alpha), 1e-12);
        for (double mu : log_grid(top, g.ratio, g.points)) {
          out.push_back(PenaltySpec::sparse_group(mu, alpha));
        }
      }
      return out;
  }
}

TuningResult blocked_cv_tune(const ModelConfig& config, const DesignBundle& bundle) {
  TuningResult result;
  const auto grid = penalty_grid(config, bundle);
  if (grid.empty()) return result;
  const auto& design = bundle.design;
  const auto folds = contiguous_folds(design.rows(), config.cv.folds);
  std::vector<double> scores(grid.size(), 0.0);
  // Repeated grid points reuse the first occurrence so their scores are identical.
  std::vector<std::size_t> first_of(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    first_of[i] = i;
    for (std::size_t j = 0; j < i; ++j) {
      if (same_penalty(grid[i], grid[j])) {
        first_of[i] = j;
        break;
      }
    }
  }
  for (const auto& [begin, end] : folds) {
    const DesignAssembly train = design.without_rows(begin, end);
    const DesignAssembly test = design.only_rows(begin, end);
    Eigen::VectorXd warm;
    double warm_alpha = -1.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      if (first_of[i] != i || !std::isfinite(scores[i])) continue;
      const PenaltySpec& p = grid[i];
      try {
        const bool can_warm = p.kind != PenaltyKind::ridge && p.kind != PenaltyKind::lava &&
                              warm.size() == train.cols() && warm_alpha == p.alpha;
        const Solution sol = solve(config, bundle, train, p, can_warm ? &warm : nullptr);
        if (!sol.converged) {
          log_warn("model {}: cv fit did not converge at mu={:.4g}; skipping the grid point",
                   config.label(), penalty_size(p));
          scores[i] = std::numeric_limits<double>::infinity();
          continue;
        }
        warm = sol.coefficients;
        warm_alpha = p.alpha;
        const Eigen::VectorXd resid = test.response - test.columns * sol.coefficients;
        scores[i] += resid.squaredNorm() / static_cast<double>(test.rows()) /
                     static_cast<double>(folds.size());
      } catch (const Error& e) {
        log_warn("model {}: cv fit failed at mu={:.4g}: {}", config.label(), penalty_size(p), e.what());
        scores[i] = std::numeric_limits<double>::infinity();
      }
    }
  }
  for (std::size_t i = 0; i < grid.size(); ++i) scores[i] = scores[first_of[i]];
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    result.scores.push_back({grid[i], scores[i]});
    if (!std::isfinite(scores[i])) continue;
    if (!best || scores[i] < scores[*best] ||
        (scores[i] == scores[*best] && penalty_size(grid[i]) < penalty_size(grid[*best]))) {
      best = i;
    }
  }
  if (!best) {
    throw Error(ErrorKind::convergence,
                fmt::format("model {}: no penalty on the grid could be fit", config.label()));
  }
  result.penalty = grid[*best];
  return result;
}

FittedNowcastModel fit_model(const ModelConfig& config, DesignBundle bundle,
                             const PenaltySpec& penalty) {
  FittedNowcastModel model;
  model.name = config.label();
  model.kind = config.kind;
  model.penalty = is_penalized(config.kind) ? penalty : PenaltySpec{};
  model.solution = solve(config, bundle, bundle.design, model.penalty);
  if (!model.solution.converged) {
    log_warn("model {}: final fit did not converge in {} iterations", model.name,
             model.solution.iterations);
  }
  model.coefficients = model.solution.coefficients.cwiseQuotient(bundle.design.column_scales);
  model.bundle = std::move(bundle);
  return model;
}

double predict_row(const FittedNowcastModel& model, const Eigen::RowVectorXd& row) {
  if (row.size() != model.solution.coefficients.size()) {
    throw Error(ErrorKind::config, "regressor row does not match the fitted model");
  }
  return row.dot(model.solution.coefficients);
}

double predict_one(const FittedNowcastModel& model) {
  return predict_row(model, model.bundle.origin_row);
}

NowcastResult nowcast(const ModelConfig& config, const ModelInputs& inputs, const LeadMap& leads,
                      const std::optional<PenaltySpec>& cached) {
  DesignBundle bundle = assemble_design(config, inputs, leads);
  NowcastResult out;
  if (is_penalized(config.kind)) {
    if (config.penalty) {
      out.penalty = *config.penalty;
    } else if (cached) {
      out.penalty = *cached;
    } else {
      out.penalty = blocked_cv_tune(config, bundle).penalty;
      out.tuned = true;
    }
  }
  out.model = fit_model(config, std::move(bundle), out.penalty);
  out.value = predict_one(out.model);
  return out;
}

void write_coefficients_csv(const std::filesystem::path& path, const FittedNowcastModel& model) {
  auto out = fmt::output_file(path.string());
  out.print("role,panel,series,d,value\n");
  const auto& tags = model.bundle.design.tags;
  for (std::size_t c = 0; c < tags.size(); ++c) {
    const auto& tag = tags[c];
    std::string series;
    switch (tag.role) {
      case ColumnRole::intercept: break;
      case ColumnRole::predictor: series = model.bundle.series_keys[c]; break;
      case ColumnRole::ar_lag:
      case ColumnRole::factor: series = std::to_string(tag.series + (tag.role == ColumnRole::factor)); break;
    }
    out.print("{},{},{},{},{:.17g}\n", to_string(tag.role), tag.panel, series, tag.d,
              model.coefficients[static_cast<Eigen::Index>(c)]);
  }
  const auto& p = model.penalty;
  out.print("penalty,,alpha,,{:.17g}\npenalty,,mu,,{:.17g}\npenalty,,mu1,,{:.17g}\npenalty,,mu2,,{:.17g}\n",
            p.alpha, p.mu, p.mu1, p.mu2);
}

}  // namespace spdmidas
