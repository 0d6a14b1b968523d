#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "spdmidas/panel_data.hpp"

namespace spdmidas {

/// Orthonormal shifted Legendre polynomials w_0..w_D on [0,1]:
/// integral of w_i * w_j over [0,1] is the Kronecker delta.
class LegendreBasis {
 public:
  explicit LegendreBasis(int degree = 3);

  int degree() const { return degree_; }
  int size() const { return degree_ + 1; }

  /// w_d(s). Throws Error{domain} when d is outside 0..D or s outside [0,1].
  double eval(int d, double s) const;
  /// (w_0(s), ..., w_D(s)).
  Eigen::VectorXd eval_all(double s) const;

 private:
  int degree_;
};

/// High-frequency window of a panel: q low-frequency lags of m slots each plus
/// `leads` slots from the current quarter. The lag index j runs over
/// 1 - leads .. m * q; j <= 0 are leads.
struct LagLeadSpec {
  int m = 3;
  int q = 1;
  int leads = 0;

  /// Throws Error{config} unless m >= 1, q >= 0, 0 <= leads <= m and the window is non-empty.
  void validate() const;
  int window() const { return m * q + leads; }
  int first_j() const { return 1 - leads; }
  /// Basis evaluation point for lag index j: (j - 1 + leads) / m rescaled by the
  /// window length q + leads / m, so every point lies in [0, 1).
  double point(int j) const;
};

enum class Dictionary { legendre, indicator };

/// MIDAS-aggregated regressors X_{k,d,t}: one row per target period, columns
/// ordered (k, d) with d fastest.
struct AggregatedTensor {
  Eigen::MatrixXd values;
  Quarter first_period;
  int series_count = 0;
  int basis_size = 0;
  LagLeadSpec spec;
  Dictionary dictionary = Dictionary::legendre;

  Eigen::Index rows() const { return values.rows(); }
  Quarter last_period() const { return first_period + static_cast<int>(values.rows()) - 1; }
  Eigen::Index column(int k, int d) const { return static_cast<Eigen::Index>(k) * basis_size + d; }
  double operator()(int k, int d, Quarter t) const {
    return values(t - first_period, column(k, d));
  }
};

/// basis_size x window matrix W with W(d, i) the weight of lag index j = i + 1 - leads.
Eigen::MatrixXd weight_matrix(const LagLeadSpec& spec, const LegendreBasis& basis);
Eigen::MatrixXd indicator_weights(const LagLeadSpec& spec);

/// Target periods t in the panel's calendar whose whole window fits inside the
/// high-frequency axis (missing values are not inspected).
std::pair<Quarter, Quarter> window_range(const HighFrequencyPanel& panel, const LagLeadSpec& spec);

/// X_{k,d,t} = sum_j w_d(point(j)) * X~_{k, t-1-(j-1)/m} for t in [first, last].
/// Throws Error{ragged_edge} naming (k, t, j) for a missing or out-of-range input.
AggregatedTensor aggregate(const HighFrequencyPanel& panel, const LagLeadSpec& spec,
                           const LegendreBasis& basis, Quarter first, Quarter last);

/// Unrestricted design: one column per (k, j).
AggregatedTensor umidas_expand(const HighFrequencyPanel& panel, const LagLeadSpec& spec,
                               Quarter first, Quarter last);

/// Aggregation with an arbitrary basis_size x window weight matrix.
AggregatedTensor aggregate_with(const HighFrequencyPanel& panel, const LagLeadSpec& spec,
                                const Eigen::MatrixXd& weights, Dictionary dictionary,
                                Quarter first, Quarter last);

/// omega(s) = sum_d coeffs[d] * w_d(s) on each grid point.
std::vector<double> weight_curve(std::span<const double> coeffs, const LegendreBasis& basis,
                                 std::span<const double> grid);

}  // namespace spdmidas
