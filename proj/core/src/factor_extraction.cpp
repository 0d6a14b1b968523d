#include "spdmidas/factor_extraction.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>
#include <fmt/os.h>

namespace spdmidas {

namespace {

using BoolMatrix = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;

BoolMatrix observed_mask(const Eigen::MatrixXd& m) {
  return m.unaryExpr([](double v) { return !std::isnan(v); });
}

// Returns the index with the largest value; values within a relative 1e-12 of
// the maximum count as ties and the smallest index wins.
int argmax_first(const std::vector<double>& values) {
  double best = -std::numeric_limits<double>::infinity();
  for (double v : values) best = std::max(best, v);
  const double slack = 1e-12 * std::max(1.0, std::abs(best));
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i] >= best - slack) return static_cast<int>(i);
  }
  return 0;
}

}  // namespace

Eigen::MatrixXd StandardizedMatrix::apply(const Eigen::MatrixXd& rows) const {
  return (rows.rowwise() - column_means.transpose()).array().rowwise() /
         column_sds.transpose().array();
}

StandardizedMatrix standardize(const Eigen::MatrixXd& matrix, std::span<const std::string> names) {
  if (matrix.rows() < 2) throw Error(ErrorKind::data, "standardization needs at least 2 rows");
  if (matrix.hasNaN()) throw Error(ErrorKind::data, "standardization input has missing entries");
  StandardizedMatrix out;
  const auto n = static_cast<double>(matrix.rows());
  out.column_means = matrix.colwise().mean().transpose();
  const Eigen::MatrixXd centered = matrix.rowwise() - out.column_means.transpose();
  out.column_sds = (centered.colwise().squaredNorm() / (n - 1.0)).cwiseSqrt().transpose();
  for (Eigen::Index c = 0; c < matrix.cols(); ++c) {
    const double scale = std::max(1.0, out.column_means.cwiseAbs()[c]);
    if (!(out.column_sds[c] > 1e-12 * scale)) {
      const std::string name = static_cast<std::size_t>(c) < names.size()
                                   ? names[static_cast<std::size_t>(c)]
                                   : fmt::format("column {}", c);
      throw Error(ErrorKind::degenerate_column, fmt::format("'{}' has zero variance", name));
    }
  }
  out.matrix = centered.array().rowwise() / out.column_sds.transpose().array();
  return out;
}

void CompletionConfig::validate() const {
  if (max_rank < 1 || !(tolerance > 0.0) || max_iterations < 1 || !(lambda_decay > 0.0) ||
      !(lambda_decay < 1.0)) {
    throw Error(ErrorKind::config, "invalid matrix-completion configuration");
  }
}

double lambda_zero(const Eigen::MatrixXd& with_missing) {
  const Eigen::MatrixXd filled = with_missing.unaryExpr([](double v) {
    return std::isnan(v) ? 0.0 : v;
  });
  Eigen::BDCSVD<Eigen::MatrixXd> svd(filled);
  return svd.singularValues().size() ? svd.singularValues()[0] : 0.0;
}

SoftImputeResult soft_impute(const Eigen::MatrixXd& with_missing, double lambda,
                             const CompletionConfig& config, const Eigen::MatrixXd* warm_start) {
  config.validate();
  const BoolMatrix mask = observed_mask(with_missing);
  for (Eigen::Index r = 0; r < mask.rows(); ++r) {
    if (!mask.row(r).any()) {
      throw Error(ErrorKind::unidentifiable, fmt::format("row {} has no observed entries", r));
    }
  }
  for (Eigen::Index c = 0; c < mask.cols(); ++c) {
    if (!mask.col(c).any()) {
      throw Error(ErrorKind::unidentifiable, fmt::format("column {} has no observed entries", c));
    }
  }
  SoftImputeResult res;
  res.lambda = lambda;
  if (mask.all()) {
    res.completed = with_missing;
    res.converged = true;
    Eigen::BDCSVD<Eigen::MatrixXd> svd(with_missing);
    res.rank = static_cast<int>(std::min<Eigen::Index>(
        config.max_rank, (svd.singularValues().array() > lambda).count()));
    return res;
  }
  const Eigen::MatrixXd observed = with_missing.unaryExpr([](double v) {
    return std::isnan(v) ? 0.0 : v;
  });
  Eigen::MatrixXd z = warm_start ? *warm_start : Eigen::MatrixXd::Zero(with_missing.rows(),
                                                                      with_missing.cols());
  auto objective = [&](const Eigen::MatrixXd& fit, double nuclear) {
    const Eigen::MatrixXd resid = mask.select(observed - fit, 0.0);
    return 0.5 * resid.squaredNorm() + lambda * nuclear;
  };
  for (int it = 1; it <= config.max_iterations; ++it) {
    res.iterations = it;
    const Eigen::MatrixXd filled = mask.select(observed, z);
    Eigen::BDCSVD<Eigen::MatrixXd> svd(filled, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd& s = svd.singularValues();
    int rank = 0;
    double nuclear = 0.0;
    Eigen::MatrixXd next = Eigen::MatrixXd::Zero(z.rows(), z.cols());
    for (Eigen::Index i = 0; i < s.size() && rank < config.max_rank; ++i) {
      const double shrunk = s[i] - lambda;
      if (shrunk <= 0.0) break;
      next.noalias() += shrunk * svd.matrixU().col(i) * svd.matrixV().col(i).transpose();
      nuclear += shrunk;
      ++rank;
    }
    const double before = z.norm();
    const double delta = (next - z).norm();
    z = std::move(next);
    res.rank = rank;
    res.objective_trace.push_back(objective(z, nuclear));
    if (delta <= config.tolerance * std::max(before, 1e-300) || (before == 0.0 && delta == 0.0)) {
      res.converged = true;
      break;
    }
  }
  res.completed = mask.select(observed, z);
  if (!res.converged) {
    throw ConvergenceError(
        fmt::format("soft-impute did not converge in {} iterations at lambda {}",
                    config.max_iterations, lambda),
        res);
  }
  return res;
}

SoftImputeResult complete_matrix(const Eigen::MatrixXd& with_missing,
                                 const CompletionConfig& config) {
  config.validate();
  const BoolMatrix mask = observed_mask(with_missing);
  const Eigen::Index cols = with_missing.cols();
  Eigen::VectorXd means(cols), sds(cols);
  for (Eigen::Index c = 0; c < cols; ++c) {
    double sum = 0.0, sq = 0.0;
    int n = 0;
    for (Eigen::Index r = 0; r < with_missing.rows(); ++r) {
      if (mask(r, c)) {
        sum += with_missing(r, c);
        ++n;
      }
    }
    if (n == 0) {
      throw Error(ErrorKind::unidentifiable, fmt::format("column {} has no observed entries", c));
    }
    means[c] = sum / n;
    for (Eigen::Index r = 0; r < with_missing.rows(); ++r) {
      if (mask(r, c)) sq += (with_missing(r, c) - means[c]) * (with_missing(r, c) - means[c]);
    }
    sds[c] = n > 1 ? std::sqrt(sq / (n - 1)) : 0.0;
    if (!(sds[c] > 0.0)) sds[c] = 1.0;
  }
  Eigen::MatrixXd scaled = with_missing;
  for (Eigen::Index c = 0; c < cols; ++c) {
    scaled.col(c) = (scaled.col(c).array() - means[c]) / sds[c];
  }

  SoftImputeResult res;
  auto run = [&](double lambda, const Eigen::MatrixXd* warm) {
    try {
      return soft_impute(scaled, lambda, config, warm);
    } catch (const ConvergenceError& e) {
      return e.last_iterate();
    }
  };
  const double lambda0 = lambda_zero(scaled);
  if (config.lambda) {
    res = run(*config.lambda, nullptr);
  } else {
    double lambda = lambda0;
    Eigen::MatrixXd warm = Eigen::MatrixXd::Zero(scaled.rows(), scaled.cols());
    while (true) {
      res = run(lambda, &warm);
      warm = res.completed;
      if (res.rank >= config.max_rank - 1 || lambda <= config.lambda_floor * lambda0) break;
      lambda = std::max(lambda * config.lambda_decay, config.lambda_floor * lambda0);
    }
  }
  for (Eigen::Index c = 0; c < cols; ++c) {
    res.completed.col(c) = res.completed.col(c).array() * sds[c] + means[c];
  }
  // Observed entries are returned exactly as given.
  res.completed = mask.select(with_missing, res.completed);
  return res;
}

HighFrequencyPanel complete_panel(const HighFrequencyPanel& panel, const CompletionConfig& config) {
  const Eigen::MatrixXd& v = panel.values();
  Eigen::Index first = -1, last = -1;
  for (Eigen::Index h = 0; h < v.cols(); ++h) {
    if ((v.col(h).array() == v.col(h).array()).any()) {  // any non-NaN
      if (first < 0) first = h;
      last = h;
    }
  }
  if (first < 0) {
    throw Error(ErrorKind::unidentifiable,
                fmt::format("panel '{}' has no observations", panel.panel_id()));
  }
  const Eigen::MatrixXd block = v.middleCols(first, last - first + 1);
  if (!block.hasNaN()) return panel;
  // Series in columns, slots in rows.
  const SoftImputeResult res = complete_matrix(block.transpose(), config);
  Eigen::MatrixXd out = v;
  out.middleCols(first, last - first + 1) = res.completed.transpose();
  return panel.with_values(std::move(out));
}

Eigen::MatrixXd FactorModelFit::project(const Eigen::MatrixXd& raw_rows) const {
  const Eigen::MatrixXd std_rows =
      (raw_rows.rowwise() - column_means.transpose()).array().rowwise() /
      column_sds.transpose().array();
  return std_rows * loadings / static_cast<double>(loadings.rows());
}

Eigen::VectorXd covariance_eigenvalues(const StandardizedMatrix& std_matrix) {
  const auto& x = std_matrix.matrix;
  const auto rows = static_cast<double>(x.rows());
  const Eigen::MatrixXd cov = x.transpose() * x / rows;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov, Eigen::EigenvaluesOnly);
  const Eigen::Index n = std::min(x.cols(), x.rows());
  Eigen::VectorXd out(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    out[i] = std::max(es.eigenvalues()[x.cols() - 1 - i], 0.0);
  }
  return out;
}

FactorModelFit pca_extract(const StandardizedMatrix& std_matrix, int rank, std::string panel_id) {
  const auto& x = std_matrix.matrix;
  const Eigen::Index k = x.cols();
  if (rank < 1 || rank > std::min(k, x.rows())) {
    throw Error(ErrorKind::rank_deficiency,
                fmt::format("requested {} factors from a {}x{} matrix", rank, x.rows(), k));
  }
  const Eigen::MatrixXd cov = x.transpose() * x / static_cast<double>(x.rows());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  const Eigen::VectorXd& evals = es.eigenvalues();
  const double top = std::max(evals[k - 1], 0.0);
  if (!(evals[k - rank] > 1e-10 * top) || top <= 0.0) {
    throw Error(ErrorKind::rank_deficiency,
                fmt::format("data has fewer than {} non-degenerate principal components", rank));
  }
  FactorModelFit fit;
  fit.panel_id = std::move(panel_id);
  fit.column_means = std_matrix.column_means;
  fit.column_sds = std_matrix.column_sds;
  fit.loadings.resize(k, rank);
  for (int r = 0; r < rank; ++r) {
    Eigen::VectorXd v = es.eigenvectors().col(k - 1 - r);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v[arg] < 0.0) v = -v;
    fit.loadings.col(r) = v * std::sqrt(static_cast<double>(k));
  }
  fit.factor_scores = x * fit.loadings / static_cast<double>(k);
  fit.eigenvalues = covariance_eigenvalues(std_matrix);
  return fit;
}

std::string_view to_string(RankMethod method) {
  switch (method) {
    case RankMethod::growth_ratio: return "growth_ratio";
    case RankMethod::eigenvalue_ratio: return "eigenvalue_ratio";
    case RankMethod::fixed: return "fixed";
  }
  return "unknown";
}

RankMethod parse_rank_method(std::string_view name) {
  if (name == "growth_ratio") return RankMethod::growth_ratio;
  if (name == "eigenvalue_ratio") return RankMethod::eigenvalue_ratio;
  if (name == "fixed") return RankMethod::fixed;
  throw Error(ErrorKind::config, fmt::format("unknown rank selection method '{}'", name));
}

int default_kmax(Eigen::Index cols, Eigen::Index rows) {
  const auto k = std::min<Eigen::Index>({8, cols / 2, rows / 2});
  return static_cast<int>(std::max<Eigen::Index>(k, 1));
}

RankSelection growth_ratio_select(std::span<const double> eigenvalues, int kmax) {
  if (kmax < 1 || static_cast<int>(eigenvalues.size()) <= kmax + 1) {
    throw Error(ErrorKind::degenerate_spectrum,
                fmt::format("growth ratio needs more than kmax + 1 = {} eigenvalues, got {}",
                            kmax + 1, eigenvalues.size()));
  }
  // tail[k] = V(k) = sum_{j > k} mu_j (1-based eigenvalue index).
  std::vector<double> tail(eigenvalues.size() + 1, 0.0);
  for (std::size_t k = eigenvalues.size(); k-- > 0;) tail[k] = tail[k + 1] + eigenvalues[k];
  for (int k = 0; k <= kmax + 1; ++k) {
    if (!(tail[static_cast<std::size_t>(k)] > 0.0)) {
      throw Error(ErrorKind::degenerate_spectrum,
                  fmt::format("residual eigenvalue mass V({}) is not positive", k));
    }
  }
  RankSelection sel{RankMethod::growth_ratio, kmax, 0, {}};
  for (int k = 1; k <= kmax; ++k) {
    const auto i = static_cast<std::size_t>(k);
    const double num = std::log(tail[i - 1] / tail[i]);
    const double den = std::log(tail[i] / tail[i + 1]);
    sel.criterion.push_back(den > 0.0 ? num / den : std::numeric_limits<double>::infinity());
  }
  sel.selected = argmax_first(sel.criterion) + 1;
  return sel;
}

RankSelection eigenvalue_ratio_select(std::span<const double> eigenvalues, int kmax) {
  if (kmax < 1 || static_cast<int>(eigenvalues.size()) < kmax + 1) {
    throw Error(ErrorKind::degenerate_spectrum,
                fmt::format("eigenvalue ratio needs kmax + 1 = {} eigenvalues, got {}", kmax + 1,
                            eigenvalues.size()));
  }
  RankSelection sel{RankMethod::eigenvalue_ratio, kmax, 0, {}};
  for (int k = 1; k <= kmax; ++k) {
    const double next = eigenvalues[static_cast<std::size_t>(k)];
    if (!(next > 0.0)) {
      throw Error(ErrorKind::degenerate_spectrum,
                  fmt::format("eigenvalue {} is zero inside the scan range", k + 1));
    }
    sel.criterion.push_back(eigenvalues[static_cast<std::size_t>(k - 1)] / next);
  }
  sel.selected = argmax_first(sel.criterion) + 1;
  return sel;
}

RankSelection select_rank(const Eigen::VectorXd& eigenvalues, RankMethod method,
                          std::optional<int> kmax, Eigen::Index cols, Eigen::Index rows,
                          int fixed_rank) {
  if (method == RankMethod::fixed) return {RankMethod::fixed, fixed_rank, fixed_rank, {}};
  const int slack = method == RankMethod::growth_ratio ? 2 : 1;
  int k = kmax.value_or(default_kmax(cols, rows));
  k = std::max(1, std::min<int>(k, static_cast<int>(eigenvalues.size()) - slack));
  const std::span<const double> ev(eigenvalues.data(), static_cast<std::size_t>(eigenvalues.size()));
  return method == RankMethod::growth_ratio ? growth_ratio_select(ev, k)
                                            : eigenvalue_ratio_select(ev, k);
}

Eigen::MatrixXd stack_for_pca(const AggregatedTensor& tensor) {
  const Eigen::Index t = tensor.rows();
  Eigen::MatrixXd out(t * tensor.basis_size, tensor.series_count);
  for (int d = 0; d < tensor.basis_size; ++d) {
    for (int k = 0; k < tensor.series_count; ++k) {
      out.block(d * t, k, t, 1) = tensor.values.col(tensor.column(k, d));
    }
  }
  return out;
}

AggregatedTensor unstack_factors(const Eigen::MatrixXd& scores, const AggregatedTensor& like) {
  const Eigen::Index t = like.rows();
  if (scores.rows() != t * like.basis_size) {
    throw Error(ErrorKind::config, "factor scores do not match the tensor layout");
  }
  AggregatedTensor out;
  out.first_period = like.first_period;
  out.series_count = static_cast<int>(scores.cols());
  out.basis_size = like.basis_size;
  out.spec = like.spec;
  out.dictionary = like.dictionary;
  out.values.resize(t, scores.cols() * like.basis_size);
  for (int r = 0; r < out.series_count; ++r) {
    for (int d = 0; d < like.basis_size; ++d) {
      out.values.col(out.column(r, d)) = scores.block(d * t, r, t, 1);
    }
  }
  return out;
}

AggregatedTensor ingest_external_factor(const RawSeries& series, const LagLeadSpec& spec,
                                        const LegendreBasis& basis, Quarter first, Quarter last) {
  if (series.frequency.periods_per_target() != spec.m) {
    throw Error(ErrorKind::config,
                fmt::format("external factor '{}' is {} but the spec uses m={}", series.key,
                            series.frequency.name(), spec.m));
  }
  const std::vector<RawSeries> one{series};
  const HighFrequencyPanel panel = align_to_target(one, TargetCalendar::covering(one), series.key);
  return aggregate(panel, spec, basis, first, last);
}

void write_factor_scores_csv(const std::filesystem::path& path, const std::string& panel_id,
                             const AggregatedTensor& factors) {
  auto out = fmt::output_file(path.string());
  out.print("panel_id,factor_index,d,period,value\n");
  for (int r = 0; r < factors.series_count; ++r) {
    for (int d = 0; d < factors.basis_size; ++d) {
      for (Eigen::Index i = 0; i < factors.rows(); ++i) {
        out.print("{},{},{},{},{:.17g}\n", panel_id, r + 1, d,
                  (factors.first_period + static_cast<int>(i)).label(),
                  factors.values(i, factors.column(r, d)));
      }
    }
  }
}

}  // namespace spdmidas
