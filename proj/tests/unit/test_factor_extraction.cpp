#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "oracles.hpp"
#include "spdmidas/error.hpp"
#include "spdmidas/factor_extraction.hpp"

using namespace spdmidas;

namespace {

Eigen::MatrixXd gaussian(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng) {
  std::normal_distribution<double> n01;
  Eigen::MatrixXd out(r, c);
  for (Eigen::Index i = 0; i < r; ++i) {
    for (Eigen::Index j = 0; j < c; ++j) out(i, j) = n01(rng);
  }
  return out;
}

double mask_fraction(Eigen::MatrixXd& m, double share, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  int hidden = 0;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (unit(rng) < share) {
        m(i, j) = std::nan("");
        ++hidden;
      }
    }
  }
  return hidden;
}

}  // namespace

TEST_CASE("standardize") {
  Eigen::MatrixXd two(2, 1);
  two << 1, 3;
  const auto s = standardize(two);
  CHECK(s.matrix(0, 0) == doctest::Approx(-std::sqrt(0.5)).epsilon(1e-15));
  CHECK(s.matrix(1, 0) == doctest::Approx(std::sqrt(0.5)).epsilon(1e-15));

  std::mt19937_64 rng(1);
  const Eigen::MatrixXd x = gaussian(50, 4, rng) * 3.0 + Eigen::MatrixXd::Constant(50, 4, 2.0);
  const auto sx = standardize(x);
  for (Eigen::Index c = 0; c < 4; ++c) {
    CHECK(std::abs(sx.matrix.col(c).mean()) <= 1e-10);
    CHECK(std::abs(sx.matrix.col(c).squaredNorm() / 49.0 - 1.0) <= 1e-10);
  }
  CHECK((standardize(sx.matrix).matrix - sx.matrix).cwiseAbs().maxCoeff() <= 1e-12);

  Eigen::MatrixXd flat = x;
  flat.col(2).setConstant(4.0);
  const std::vector<std::string> names{"a", "b", "PAYEMS", "d"};
  try {
    standardize(flat, names);
    FAIL("expected degenerate column");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::degenerate_column);
    CHECK(std::string(e.what()).find("PAYEMS") != std::string::npos);
  }
}

TEST_CASE("soft-impute examples") {
  CompletionConfig cfg;
  std::mt19937_64 rng(2);

  SUBCASE("lambda at lambda0 returns the zero solution") {
    Eigen::MatrixXd m = gaussian(12, 5, rng);
    mask_fraction(m, 0.2, rng);
    const double l0 = lambda_zero(m);
    const auto res = soft_impute(m, l0, cfg);
    CHECK(res.rank == 0);
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) {
        if (std::isnan(m(i, j))) CHECK(res.completed(i, j) == 0.0);
        else CHECK(res.completed(i, j) == m(i, j));
      }
    }
    // On the original scale the zero fit imputes the observed column mean.
    CompletionConfig fixed = cfg;
    fixed.lambda = 1e6;
    const auto back = complete_matrix(m, fixed);
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      double sum = 0.0;
      int n = 0;
      for (Eigen::Index i = 0; i < m.rows(); ++i) {
        if (!std::isnan(m(i, j))) {
          sum += m(i, j);
          ++n;
        }
      }
      for (Eigen::Index i = 0; i < m.rows(); ++i) {
        if (std::isnan(m(i, j))) CHECK(back.completed(i, j) == doctest::Approx(sum / n).epsilon(1e-12));
      }
    }
  }
  SUBCASE("exact rank one recovery") {
    const Eigen::Vector4d u(1.0, 2.0, -1.0, 0.5), v(0.3, -1.2, 2.0, 1.0);
    Eigen::MatrixXd m = u * v.transpose();
    const double truth = m(2, 1);
    m(2, 1) = std::nan("");
    CompletionConfig one = cfg;
    one.max_rank = 1;
    one.tolerance = 1e-14;
    one.max_iterations = 100000;
    const auto res = soft_impute(m, 0.0, one);
    CHECK(std::abs(res.completed(2, 1) - truth) <= 1e-8);
  }
  SUBCASE("fully observed input is returned unchanged") {
    const Eigen::MatrixXd m = gaussian(6, 4, rng);
    CHECK(soft_impute(m, 0.5, cfg).completed == m);
    CHECK(complete_matrix(m, cfg).completed == m);
  }
  SUBCASE("objective is non-increasing") {
    Eigen::MatrixXd m = gaussian(40, 3, rng) * gaussian(3, 15, rng) + gaussian(40, 15, rng) * 0.1;
    mask_fraction(m, 0.3, rng);
    const auto res = soft_impute(m, 0.1 * lambda_zero(m), cfg);
    for (std::size_t i = 1; i < res.objective_trace.size(); ++i) {
      CHECK(res.objective_trace[i] <= res.objective_trace[i - 1] * (1 + 1e-12));
    }
  }
  SUBCASE("empty row is unidentifiable") {
    Eigen::MatrixXd m = gaussian(5, 3, rng);
    m.row(3).setConstant(std::nan(""));
    CHECK_THROWS_AS(soft_impute(m, 0.1, cfg), Error);
  }
  SUBCASE("iteration budget exhaustion carries the last iterate") {
    Eigen::MatrixXd m = gaussian(30, 3, rng) * gaussian(3, 10, rng);
    mask_fraction(m, 0.4, rng);
    CompletionConfig tiny = cfg;
    tiny.max_iterations = 2;
    tiny.tolerance = 1e-15;
    try {
      soft_impute(m, 1e-3, tiny);
      FAIL("expected convergence error");
    } catch (const ConvergenceError& e) {
      CHECK(e.kind() == ErrorKind::convergence);
      CHECK(e.last_iterate().iterations == 2);
      CHECK(e.last_iterate().completed.rows() == 30);
    }
  }
}

TEST_CASE("lambda path recovers a low-rank matrix") {
  std::mt19937_64 rng(3);
  const Eigen::MatrixXd truth = gaussian(100, 2, rng) * gaussian(2, 30, rng);
  Eigen::MatrixXd m = truth;
  mask_fraction(m, 0.2, rng);
  const auto res = complete_matrix(m, CompletionConfig{});
  double se = 0.0, ss = 0.0;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (std::isnan(m(i, j))) {
        se += std::pow(res.completed(i, j) - truth(i, j), 2);
        ss += truth(i, j) * truth(i, j);
      } else {
        CHECK(res.completed(i, j) == m(i, j));
      }
    }
  }
  CHECK(std::sqrt(se / ss) <= 0.05);
}

TEST_CASE("pca examples") {
  std::mt19937_64 rng(4);
  SUBCASE("exact rank one") {
    const Eigen::VectorXd f = gaussian(60, 1, rng);
    const Eigen::VectorXd l = gaussian(8, 1, rng);
    const auto s = standardize(f * l.transpose());
    const auto fit = pca_extract(s, 1);
    CHECK((fit.reconstruction() - s.matrix).cwiseAbs().maxCoeff() <= 1e-10);
    const Eigen::VectorXd fc = f.array() - f.mean();
    CHECK(std::abs(testing::canonical_correlations(fit.factor_scores, fc)[0] - 1.0) <= 1e-10);
    CHECK_THROWS_AS(pca_extract(s, 2), Error);
  }
  SUBCASE("full rank reconstructs exactly and errors shrink with rank") {
    const auto s = standardize(gaussian(40, 6, rng));
    double prev = std::numeric_limits<double>::infinity();
    for (int r = 1; r <= 6; ++r) {
      const auto fit = pca_extract(s, r);
      const double err = (fit.reconstruction() - s.matrix).norm();
      CHECK(err <= prev + 1e-12);
      prev = err;
      const Eigen::MatrixXd gram = fit.loadings.transpose() * fit.loadings / 6.0;
      CHECK((gram - Eigen::MatrixXd::Identity(r, r)).cwiseAbs().maxCoeff() <= 1e-12);
    }
    CHECK(prev <= 1e-10);
    const auto fit = pca_extract(s, 3);
    for (Eigen::Index i = 1; i < fit.eigenvalues.size(); ++i) {
      CHECK(fit.eigenvalues[i] <= fit.eigenvalues[i - 1]);
      CHECK(fit.eigenvalues[i] >= 0.0);
    }
    const auto again = pca_extract(s, 3);
    CHECK(again.loadings == fit.loadings);
    for (int r = 0; r < 3; ++r) {
      Eigen::Index arg = 0;
      fit.loadings.col(r).cwiseAbs().maxCoeff(&arg);
      CHECK(fit.loadings(arg, r) > 0.0);
    }
  }
  SUBCASE("two-factor recovery") {
    const Eigen::MatrixXd f = gaussian(200, 2, rng);
    const Eigen::MatrixXd x = f * gaussian(2, 20, rng) + gaussian(200, 20, rng) * 0.1;
    const auto fit = pca_extract(standardize(x), 2);
    const Eigen::VectorXd cc = testing::canonical_correlations(fit.factor_scores, f);
    CHECK(cc.minCoeff() >= 0.95);
    for (int r = 0; r < 2; ++r) {
      double best = 0.0;
      for (int e = 0; e < 2; ++e) {
        const Eigen::VectorXd a = f.col(r).array() - f.col(r).mean();
        const Eigen::VectorXd b = fit.factor_scores.col(e).array() - fit.factor_scores.col(e).mean();
        best = std::max(best, std::abs(a.dot(b)) / (a.norm() * b.norm()));
      }
      // Rotation within the factor space is unidentified; the span is.
      CHECK(best >= 0.5);
    }
  }
}

TEST_CASE("growth ratio selection") {
  CHECK(growth_ratio_select(std::vector<double>{100, 50, 1, 0.5, 0.25, 0.125}, 3).selected == 2);
  CHECK(growth_ratio_select(std::vector<double>{100, 1, 1, 1, 1}, 3).selected == 1);
  CHECK(growth_ratio_select(std::vector<double>{1, 1, 1, 1, 1}, 3).selected == 1);
  CHECK_THROWS_AS(growth_ratio_select(std::vector<double>{3, 2, 0, 0, 0}, 3), Error);
  // Direct evaluation of the formula for the first example.
  const auto sel = growth_ratio_select(std::vector<double>{100, 50, 1, 0.5, 0.25, 0.125}, 3);
  const double v0 = 151.875, v1 = 51.875, v2 = 1.875, v3 = 0.875;
  CHECK(sel.criterion[0] == doctest::Approx(std::log(v0 / v1) / std::log(v1 / v2)));
  CHECK(sel.criterion[1] == doctest::Approx(std::log(v1 / v2) / std::log(v2 / v3)));
}

TEST_CASE("eigenvalue ratio selection") {
  const auto a = eigenvalue_ratio_select(std::vector<double>{100, 50, 1, 0.5}, 2);
  CHECK(a.criterion == std::vector<double>{2.0, 50.0});
  CHECK(a.selected == 2);
  CHECK(eigenvalue_ratio_select(std::vector<double>{9, 3, 1}, 2).selected == 1);
  CHECK(eigenvalue_ratio_select(std::vector<double>{100, 1, 1}, 2).selected == 1);
  CHECK_THROWS_AS(eigenvalue_ratio_select(std::vector<double>{4, 0, 0}, 2), Error);
}

TEST_CASE("rank selection is scale invariant") {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> unit(0.01, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> ev(10);
    for (double& e : ev) e = std::pow(10.0, 3.0 * unit(rng));
    std::sort(ev.rbegin(), ev.rend());
    for (double c : {1e-6, 0.37, 3.0, 1e8}) {
      std::vector<double> scaled(ev);
      for (double& e : scaled) e *= c;
      CHECK(growth_ratio_select(scaled, 5).selected == growth_ratio_select(ev, 5).selected);
      CHECK(eigenvalue_ratio_select(scaled, 5).selected == eigenvalue_ratio_select(ev, 5).selected);
    }
  }
}

TEST_CASE("default kmax") {
  CHECK(default_kmax(50, 400) == 8);
  CHECK(default_kmax(6, 400) == 3);
  CHECK(default_kmax(1, 1) == 1);
}

TEST_CASE("aggregating a noiseless factor panel keeps the factor identity") {
  std::mt19937_64 rng(7);
  const int k = 6, r = 2, quarters = 10;
  const TargetCalendar cal{Quarter::parse("2001Q1"), quarters};
  HighFrequencyPanel factors("f", {"f1", "f2"}, Frequency::monthly(), cal);
  factors.values() = gaussian(r, quarters * 3, rng);
  const Eigen::MatrixXd lambda = gaussian(k, r, rng);
  std::vector<std::string> keys;
  for (int i = 0; i < k; ++i) keys.push_back("x" + std::to_string(i));
  HighFrequencyPanel x("x", keys, Frequency::monthly(), cal);
  x.values() = lambda * factors.values();
  const LagLeadSpec spec{3, 1, 2};
  const LegendreBasis basis(3);
  const Quarter first = cal.first + 1, last = cal.last();
  const auto ax = aggregate(x, spec, basis, first, last);
  const auto af = aggregate(factors, spec, basis, first, last);
  for (int i = 0; i < k; ++i) {
    for (int d = 0; d < 4; ++d) {
      for (Quarter t = first; t <= last; t = t + 1) {
        double rhs = 0.0;
        for (int j = 0; j < r; ++j) rhs += lambda(i, j) * af(j, d, t);
        CHECK(ax(i, d, t) == doctest::Approx(rhs).epsilon(1e-12));
      }
    }
  }
  // Stacking round-trips through the factor layout.
  const Eigen::MatrixXd stacked = stack_for_pca(af);
  CHECK(unstack_factors(stacked, af).values == af.values);
}

TEST_CASE("external factor ingestion") {
  RawSeries s{"ADS", "ext", {}, Frequency::weekly(), TransformCode(1)};
  for (int i = 0; i < 13 * 6; ++i) s.observations.push_back({Date(2020, 1, 3).plus_days(7L * i), 2.5});
  const auto t = ingest_external_factor(s, {13, 1, 4}, LegendreBasis(3), Quarter::parse("2020Q2"),
                                        Quarter::parse("2021Q1"));
  CHECK(t.series_count == 1);
  CHECK(t.basis_size == 4);
  const auto c = ingest_external_factor(s, {13, 1, 0}, LegendreBasis(0), Quarter::parse("2020Q2"),
                                        Quarter::parse("2021Q1"));
  for (Eigen::Index i = 0; i < c.rows(); ++i) CHECK(c.values(i, 0) == doctest::Approx(2.5 * 13));

  RawSeries monthly{"CFNAI", "ext", {}, Frequency::monthly(), TransformCode(1)};
  for (int i = 0; i < 12; ++i) {
    monthly.observations.push_back(
        {Date(std::chrono::sys_days{std::chrono::year{2019} / (i + 1) / 1}), double(i)});
  }
  const auto mt = ingest_external_factor(monthly, {3, 1, 1}, LegendreBasis(3),
                                         Quarter::parse("2019Q2"), Quarter::parse("2019Q4"));
  const LegendreBasis basis(3);
  // Quarter 2019Q3: lags are Jun, May, Apr (values 5, 4, 3); the lead is Jul (6).
  for (int d = 0; d < 4; ++d) {
    const double direct = basis.eval(d, 0.0) * 6 + basis.eval(d, 0.25) * 5 +
                          basis.eval(d, 0.5) * 4 + basis.eval(d, 0.75) * 3;
    CHECK(mt(0, d, Quarter::parse("2019Q3")) == doctest::Approx(direct).epsilon(1e-13));
  }
  CHECK_THROWS_AS(ingest_external_factor(monthly, {13, 1, 0}, LegendreBasis(3),
                                         Quarter::parse("2019Q2"), Quarter::parse("2019Q4")),
                  Error);
}

TEST_CASE("factor score export") {
  AggregatedTensor t;
  t.first_period = Quarter::parse("2010Q1");
  t.series_count = 1;
  t.basis_size = 2;
  t.values.resize(2, 2);
  t.values << 1, 2, 3, 4;
  const auto path = std::filesystem::temp_directory_path() / "spdmidas_scores.csv";
  write_factor_scores_csv(path, "macro", t);
  std::ifstream in(path);
  std::string header, first;
  std::getline(in, header);
  std::getline(in, first);
  CHECK(header == "panel_id,factor_index,d,period,value");
  CHECK(first == "macro,1,0,2010Q1,1");
  std::filesystem::remove(path);
}
