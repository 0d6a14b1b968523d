#include "spdmidas/midas_basis.hpp"

#include <cmath>

#include <fmt/format.h>

#include "spdmidas/error.hpp"

namespace spdmidas {

LegendreBasis::LegendreBasis(int degree) : degree_(degree) {
  if (degree < 0) throw Error(ErrorKind::config, fmt::format("basis degree {} < 0", degree));
}

Eigen::VectorXd LegendreBasis::eval_all(double s) const {
  if (!(s >= 0.0 && s <= 1.0)) {
    throw Error(ErrorKind::domain, fmt::format("basis point {} outside [0,1]", s));
  }
  Eigen::VectorXd out(size());
  const double x = 2.0 * s - 1.0;
  double p_prev = 1.0;
  double p = x;
  out[0] = 1.0;
  if (degree_ >= 1) out[1] = std::sqrt(3.0) * x;
  for (int n = 1; n < degree_; ++n) {
    const double p_next = ((2.0 * n + 1.0) * x * p - n * p_prev) / (n + 1.0);
    p_prev = p;
    p = p_next;
    out[n + 1] = std::sqrt(2.0 * (n + 1) + 1.0) * p;
  }
  return out;
}

double LegendreBasis::eval(int d, double s) const {
  if (d < 0 || d > degree_) {
    throw Error(ErrorKind::domain, fmt::format("basis index {} outside 0..{}", d, degree_));
  }
  return eval_all(s)[d];
}

void LagLeadSpec::validate() const {
  if (m < 1 || q < 0 || leads < 0 || leads > m || window() < 1) {
    throw Error(ErrorKind::config,
                fmt::format("invalid lag/lead spec m={} q={} leads={}", m, q, leads));
  }
}

double LagLeadSpec::point(int j) const {
  return static_cast<double>(j - 1 + leads) / static_cast<double>(m * q + leads);
}

Eigen::MatrixXd weight_matrix(const LagLeadSpec& spec, const LegendreBasis& basis) {
  spec.validate();
  Eigen::MatrixXd w(basis.size(), spec.window());
  for (int i = 0; i < spec.window(); ++i) {
    w.col(i) = basis.eval_all(spec.point(i + spec.first_j()));
  }
  return w;
}

Eigen::MatrixXd indicator_weights(const LagLeadSpec& spec) {
  spec.validate();
  return Eigen::MatrixXd::Identity(spec.window(), spec.window());
}

std::pair<Quarter, Quarter> window_range(const HighFrequencyPanel& panel, const LagLeadSpec& spec) {
  const auto& cal = panel.calendar();
  const Quarter first = cal.first + spec.q;
  // Latest t with m*(t - first_cal) + leads - 1 inside the axis.
  const int hf_len = cal.periods * spec.m;
  const int tau_max = (hf_len - spec.leads) / spec.m;
  return {first, cal.first + std::min(tau_max, cal.periods - 1 + (spec.leads == 0 ? 1 : 0))};
}

AggregatedTensor aggregate_with(const HighFrequencyPanel& panel, const LagLeadSpec& spec,
                                const Eigen::MatrixXd& weights, Dictionary dictionary,
                                Quarter first, Quarter last) {
  spec.validate();
  if (spec.m != panel.m()) {
    throw Error(ErrorKind::config,
                fmt::format("panel '{}' has {} slots per quarter but the spec uses m={}",
                            panel.panel_id(), panel.m(), spec.m));
  }
  if (weights.cols() != spec.window()) {
    throw Error(ErrorKind::config, "weight matrix width does not match the lag window");
  }
  const int periods = last - first + 1;
  const auto K = static_cast<int>(panel.series_count());
  const auto nb = static_cast<int>(weights.rows());
  AggregatedTensor out;
  out.first_period = first;
  out.series_count = K;
  out.basis_size = nb;
  out.spec = spec;
  out.dictionary = dictionary;
  out.values = Eigen::MatrixXd::Zero(std::max(periods, 0), static_cast<Eigen::Index>(K) * nb);
  const auto& hf = panel.values();
  Eigen::VectorXd window(spec.window());
  for (int r = 0; r < periods; ++r) {
    const Quarter t = first + r;
    const Eigen::Index tau = t - panel.calendar().first;
    for (int k = 0; k < K; ++k) {
      for (int i = 0; i < spec.window(); ++i) {
        const int j = i + spec.first_j();
        const Eigen::Index h = spec.m * tau - j;
        const double x = (h >= 0 && h < hf.cols()) ? hf(k, h) : std::nan("");
        if (std::isnan(x)) {
          throw Error(ErrorKind::ragged_edge,
                      fmt::format("panel '{}': series k={} ('{}') missing at target {} lag j={}",
                                  panel.panel_id(), k, panel.keys()[static_cast<std::size_t>(k)],
                                  t.label(), j));
        }
        window[i] = x;
      }
      out.values.row(r).segment(static_cast<Eigen::Index>(k) * nb, nb) = weights * window;
    }
  }
  return out;
}

AggregatedTensor aggregate(const HighFrequencyPanel& panel, const LagLeadSpec& spec,
                           const LegendreBasis& basis, Quarter first, Quarter last) {
  return aggregate_with(panel, spec, weight_matrix(spec, basis), Dictionary::legendre, first,
                        last);
}

AggregatedTensor umidas_expand(const HighFrequencyPanel& panel, const LagLeadSpec& spec,
                               Quarter first, Quarter last) {
  return aggregate_with(panel, spec, indicator_weights(spec), Dictionary::indicator, first, last);
}

std::vector<double> weight_curve(std::span<const double> coeffs, const LegendreBasis& basis,
                                 std::span<const double> grid) {
  if (static_cast<int>(coeffs.size()) != basis.size()) {
    throw Error(ErrorKind::domain, fmt::format("weight curve needs {} coefficients, got {}",
                                               basis.size(), coeffs.size()));
  }
  const Eigen::Map<const Eigen::VectorXd> beta(coeffs.data(),
                                               static_cast<Eigen::Index>(coeffs.size()));
  std::vector<double> out;
  out.reserve(grid.size());
  for (double s : grid) out.push_back(beta.dot(basis.eval_all(s)));
  return out;
}

}  // namespace spdmidas
