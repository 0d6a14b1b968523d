#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "spdmidas/error.hpp"
#include "spdmidas/evaluation_harness.hpp"

using namespace spdmidas;

namespace {

NowcastRecord rec(int origin_offset, double error, std::string model = "M", std::string horizon = "EoQ") {
  NowcastRecord r;
  r.origin = Quarter::of(2010, 1) + origin_offset;
  r.model = std::move(model);
  r.horizon = std::move(horizon);
  r.error = error;
  r.ok = true;
  return r;
}

std::vector<NowcastRecord> recs(std::initializer_list<double> errors, const std::string& model = "M") {
  std::vector<NowcastRecord> out;
  int i = 0;
  for (double e : errors) out.push_back(rec(i++, e, model));
  return out;
}

DgpConfig small_dgp(std::uint64_t seed) {
  DgpConfig d;
  d.seed = seed;
  d.start = Quarter::of(1990, 1);
  d.quarters = 100;  // through 2014Q4
  d.macro_series = 10;
  d.weekly_series = 5;
  d.sparsity = 2;
  return d;
}

HarnessConfig late_origins(int count, std::vector<Horizon> horizons = default_horizons()) {
  HarnessConfig h;
  h.first_origin = Quarter::of(2014, 4) - (count - 1);
  h.in_sample_end = h.first_origin - 1;
  h.last_origin = Quarter::of(2014, 4);
  h.horizons = std::move(horizons);
  h.subsamples = {{"full", std::nullopt, std::nullopt}};
  return h;
}

ModelConfig ar_model() {
  ModelConfig m;
  m.kind = ModelKind::ar;
  return m;
}

ModelConfig sg_model(double mu = 0.05) {
  ModelConfig m;
  m.kind = ModelKind::sg_lasso_midas;
  m.panels = {PanelRole{.panel_id = "macro"}, PanelRole{.panel_id = "financial"}};
  if (mu > 0) m.penalty = PenaltySpec::sparse_group(mu, 0.5);
  return m;
}

ModelConfig famidas_model() {
  ModelConfig m;
  m.kind = ModelKind::famidas;
  PanelRole r{.panel_id = "macro", .include_sparse = false, .include_dense_factors = true};
  r.rank_method = RankMethod::fixed;
  r.fixed_rank = 1;
  m.panels = {r};
  return m;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream f(p);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("relative RMSE examples") {
  CHECK(relative_rmse(recs({1, 1}), recs({2, 2}, "B")) == 0.5);
  CHECK(relative_rmse(recs({1.5, -2, 0.25}), recs({1.5, -2, 0.25}, "B")) == 1.0);
  CHECK(rmse(recs({3, 4})) == doctest::Approx(std::sqrt(12.5)).epsilon(1e-15));

  SUBCASE("scale invariance") {
    const auto a = recs({0.3, -1.2, 2.5, 0.7});
    const auto b = recs({1.1, 0.4, -0.9, 2.0}, "B");
    const double base = relative_rmse(a, b);
    for (double c : {1e-3, 0.5, 7.0, 1e4}) {
      auto as = a, bs = b;
      for (auto& r : as) r.error *= c;
      for (auto& r : bs) r.error *= c;
      CHECK(relative_rmse(as, bs) == doctest::Approx(base).epsilon(1e-14));
    }
  }
  SUBCASE("subsample restriction and empty subsamples") {
    const auto a = recs({1, 1, 4, 4});
    const auto b = recs({2, 2, 2, 2}, "B");
    const Subsample late{"late", Quarter::of(2010, 3), std::nullopt};
    CHECK(relative_rmse(a, b, late) == 2.0);
    const Subsample none{"none", Quarter::of(2030, 1), std::nullopt};
    CHECK_THROWS_AS(relative_rmse(a, b, none), Error);
    CHECK_THROWS_AS(rmse(a, none), Error);
  }
  SUBCASE("failed records are not scored") {
    auto a = recs({1, 100});
    a[1].ok = false;
    CHECK(relative_rmse(a, recs({2, 2}, "B")) == 0.5);
  }
}

TEST_CASE("CUMSUM examples") {
  const auto c345 = cumsum_series(recs({3, 4}));
  REQUIRE(c345.size() == 2);
  CHECK(c345[0] == 3.0);
  CHECK(c345[1] == 5.0);
  const auto ones = cumsum_series(recs({1, 1, 1}));
  CHECK(ones[0] == 1.0);
  CHECK(ones[1] == std::sqrt(2.0));
  CHECK(ones[2] == std::sqrt(3.0));
  for (double v : cumsum_series(recs({0, 0, 0, 0}))) CHECK(v == 0.0);

  // Out-of-order input is sorted by origin; the series is non-decreasing and ends at sqrt(SSE).
  auto mixed = recs({0.5, -2.0, 1.25, 0.0, 3.0});
  std::swap(mixed[0], mixed[3]);
  const auto cs = cumsum_series(mixed);
  double sse = 0.0;
  for (const auto& r : mixed) sse += r.error * r.error;
  for (std::size_t i = 1; i < cs.size(); ++i) CHECK(cs[i] >= cs[i - 1]);
  CHECK(cs.back() == doctest::Approx(std::sqrt(sse)).epsilon(1e-15));
  CHECK(cs.front() == 0.5);
}

TEST_CASE("synthetic data is deterministic per seed") {
  const auto a = synthetic_dgp(small_dgp(7));
  const auto b = synthetic_dgp(small_dgp(7));
  const auto c = synthetic_dgp(small_dgp(8));
  const auto& sa = a.store.snapshots().begin()->second;
  const auto& sb = b.store.snapshots().begin()->second;
  const auto& sc = c.store.snapshots().begin()->second;
  CHECK(sa.target.values == sb.target.values);
  CHECK(sa.target.values != sc.target.values);
  REQUIRE(sa.series.size() == 15);
  for (std::size_t i = 0; i < sa.series.size(); ++i) {
    REQUIRE(sa.series[i].observations.size() == sb.series[i].observations.size());
    for (std::size_t j = 0; j < sa.series[i].observations.size(); ++j) {
      CHECK(sa.series[i].observations[j].value == sb.series[i].observations[j].value);
    }
  }
  CHECK(a.truth.active_keys == b.truth.active_keys);
  CHECK(a.truth.active_keys.size() == 2);
  CHECK(a.store.pseudo());

  DgpConfig bad = small_dgp(1);
  bad.sparsity = 99;
  CHECK_THROWS_AS(synthetic_dgp(bad), Error);
  bad = small_dgp(1);
  bad.factors = 0;
  CHECK_THROWS_AS(synthetic_dgp(bad), Error);
}

TEST_CASE("regime shift amplifies the common factor") {
  DgpConfig d = small_dgp(3);
  d.quarters = 160;
  d.start = Quarter::of(1983, 1);
  d.shift = RegimeShift{Quarter::of(2015, 1), 3.0};
  const auto data = synthetic_dgp(d);
  double pre = 0, post = 0;
  int npre = 0, npost = 0;
  for (std::size_t i = 1; i < data.truth.factor_dates.size(); ++i) {
    const double v = data.truth.factors(0, static_cast<Eigen::Index>(i));
    if (data.truth.factor_dates[i] < Quarter::of(2015, 1).first_day()) {
      pre += v * v;
      ++npre;
    } else {
      post += v * v;
      ++npost;
    }
  }
  CHECK((post / npost) / (pre / npre) > 3.0);
}

TEST_CASE("expanding window record grid") {
  const auto data = synthetic_dgp(small_dgp(11));
  const auto cfg = late_origins(3);
  const auto records = run_expanding(cfg, {ar_model(), sg_model()}, data.store);
  CHECK(records.size() == 18);
  for (const auto& r : records) {
    CHECK(r.ok);
    CHECK(r.max_timestamp <= r.information_date);
    CHECK(r.realized.has_value());
    CHECK(r.error == doctest::Approx(*r.realized - r.nowcast).epsilon(1e-15));
  }
  // Canonical order: model, horizon, origin.
  CHECK(records.front().model == "AR");
  CHECK(records.front().horizon == "2-month");
  CHECK(records[1].origin == records[0].origin + 1);

  SUBCASE("the benchmark ignores leads") {
    const auto h2 = select_records(records, "AR", "2-month");
    const auto h0 = select_records(records, "AR", "EoQ");
    REQUIRE(h2.size() == 3);
    for (std::size_t i = 0; i < h2.size(); ++i) CHECK(h2[i].nowcast == h0[i].nowcast);
  }
  SUBCASE("information dates follow the horizon") {
    for (const auto& r : records) {
      const int month = r.horizon == "2-month" ? 1 : r.horizon == "1-month" ? 2 : 3;
      CHECK(r.information_date == r.origin.month_end(month));
    }
  }
  SUBCASE("thread count does not change records") {
    auto par = cfg;
    par.jobs = 3;
    const auto again = run_expanding(par, {ar_model(), sg_model()}, data.store);
    REQUIRE(again.size() == records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
      CHECK(again[i].model == records[i].model);
      CHECK(again[i].origin == records[i].origin);
      CHECK(again[i].nowcast == records[i].nowcast);
    }
  }
}

TEST_CASE("re-tuning cadence") {
  const auto data = synthetic_dgp(small_dgp(5));
  auto cfg = late_origins(5, {default_horizons()[2]});
  cfg.retune_every = 3;
  auto model = sg_model(0.0);
  model.grid.points = 5;
  model.grid.ratio = 1e-2;
  const auto records = run_expanding(cfg, {model}, data.store);
  REQUIRE(records.size() == 5);
  const bool expected[] = {true, false, false, true, false};
  for (std::size_t i = 0; i < 5; ++i) CHECK(records[i].tuned == expected[i]);
  CHECK(records[1].penalty.mu == records[0].penalty.mu);
}

TEST_CASE("failures are recorded and the run continues") {
  const auto data = synthetic_dgp(small_dgp(2));
  auto cfg = late_origins(2, {default_horizons()[2]});
  cfg.last_origin = Quarter::of(2015, 1);  // beyond the panels
  const auto records = run_expanding(cfg, {ar_model(), sg_model()}, data.store);
  REQUIRE(records.size() == 6);
  const auto sg = select_records(records, "SG_LASSO_MIDAS", "EoQ");
  CHECK(sg[0].ok);
  CHECK(sg[1].ok);
  CHECK_FALSE(sg[2].ok);
  CHECK_FALSE(sg[2].reason.empty());

  // The report counts the gap and still scores the covered origins.
  const auto report = subsample_report(records, cfg);
  const auto* cell = report.cell("SG_LASSO_MIDAS", "EoQ", "full");
  REQUIRE(cell != nullptr);
  CHECK(cell->failed == 1);
  CHECK(cell->count == 2);
}

TEST_CASE("unreleased target is a data failure") {
  TargetSeries y{Quarter::of(2000, 1), {1, 2, 3, 4}};
  RawSeries s{"a", "macro", {}, Frequency::monthly(), TransformCode(1)};
  for (int m = 1; m <= 12; ++m) s.observations.push_back({Date(2000, static_cast<unsigned>(m), 1), double(m)});
  const auto store = VintageStore::pseudo_real_time({y, {s}});
  HarnessConfig cfg;
  try {
    prepare_origin(cfg, store, Quarter::of(2001, 2), default_horizons()[0]);
    FAIL("expected a data error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::data);
    CHECK(std::string(e.what()).find("2001Q1") != std::string::npos);
  }
}

TEST_CASE("prepared inputs respect the information date") {
  const auto data = synthetic_dgp(small_dgp(4));
  const Quarter origin = Quarter::of(2014, 3);
  for (const auto& h : default_horizons()) {
    const auto p = prepare_origin(HarnessConfig{}, data.store, origin, h);
    CHECK(p.max_timestamp <= p.information_date);
    CHECK(p.inputs.target.last() == origin - 1);
    REQUIRE(p.inputs.panels.size() == 2);
    for (const auto& panel : p.inputs.panels) {
      CHECK(panel.calendar().last() == origin);
      const int leads = h.leads_for(panel.panel_id(), panel.frequency());
      for (int slot = 1; slot <= leads; ++slot) CHECK_FALSE(panel.is_missing(0, origin, slot));
    }
  }
}

TEST_CASE("noiseless recovery for the correctly specified model") {
  DgpConfig d = small_dgp(9);
  d.noise_sd = 0.0;
  d.dense_scale = 0.0;
  d.sparsity = 1;
  const auto data = synthetic_dgp(d);
  auto model = sg_model(1e-7);
  model.solver.tolerance = 1e-14;
  model.solver.gradient_tolerance = 1e-11;
  model.solver.max_iterations = 200000;
  const auto records = run_expanding(late_origins(4, {default_horizons()[2]}), {model}, data.store);
  double scale = 0.0;
  for (double v : data.store.snapshots().begin()->second.target.values) scale = std::max(scale, std::abs(v));
  for (const auto& r : records) {
    REQUIRE(r.ok);
    CHECK(std::abs(r.error) <= 1e-4 * scale);
  }
}

TEST_CASE("single active series: sg-LASSO recovers its group") {
  int recovered = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    DgpConfig d = small_dgp(seed);
    d.noise_sd = 0.0;
    d.dense_scale = 0.0;
    d.sparsity = 1;
    const auto data = synthetic_dgp(d);
    const auto prepared = prepare_origin(HarnessConfig{}, data.store, Quarter::of(2014, 4), default_horizons()[2]);
    auto model = sg_model(0.0);
    model.grid.points = 20;
    model.grid.ratio = 1e-3;
    const auto res = nowcast(model, prepared.inputs, leads_for(model, default_horizons()[2], prepared.inputs));
    const auto& tags = res.model.bundle.design.tags;
    std::map<std::string, double> norms;
    for (std::size_t c = 0; c < tags.size(); ++c) {
      if (tags[c].role != ColumnRole::predictor) continue;
      const double v = res.model.solution.coefficients[static_cast<Eigen::Index>(c)];
      norms[res.model.bundle.series_keys[c]] += v * v;
    }
    const auto best = std::max_element(norms.begin(), norms.end(),
                                       [](const auto& a, const auto& b) { return a.second < b.second; });
    double total = 0.0;
    for (const auto& [k, v] : norms) total += v;
    if (best->first == data.truth.active_keys[0] && best->second >= 0.9 * total) ++recovered;
  }
  CHECK(recovered == 5);
}

TEST_CASE("pure dense data: FAMIDAS beats sg-LASSO-MIDAS on average") {
  double fa = 0.0, sg = 0.0;
  const int seeds = 20;
  for (int seed = 1; seed <= seeds; ++seed) {
    DgpConfig d = small_dgp(static_cast<std::uint64_t>(100 + seed));
    d.macro_series = 20;
    d.sparsity = 0;
    d.dense_scale = 1.0;
    d.noise_sd = 0.3;
    const auto data = synthetic_dgp(d);
    auto cfg = late_origins(8, {default_horizons()[2]});
    cfg.retune_every = 8;
    auto sgm = sg_model(0.0);
    sgm.grid.points = 10;
    sgm.grid.ratio = 1e-2;
    const auto records = run_expanding(cfg, {famidas_model(), sgm}, data.store);
    fa += rmse(select_records(records, "FAMIDAS", "EoQ"));
    sg += rmse(select_records(records, "SG_LASSO_MIDAS", "EoQ"));
  }
  MESSAGE("mean RMSE FAMIDAS " << fa / seeds << " vs SG_LASSO_MIDAS " << sg / seeds);
  CHECK(fa < sg);
}

TEST_CASE("report layout and writers") {
  const auto data = synthetic_dgp(small_dgp(12));
  auto cfg = late_origins(4, {default_horizons()[1], default_horizons()[2]});
  cfg.subsamples = {{"full", std::nullopt, std::nullopt},
                    {"early", std::nullopt, Quarter::of(2014, 2)},
                    {"late", Quarter::of(2014, 3), std::nullopt}};
  const auto records = run_expanding(cfg, {ar_model(), sg_model()}, data.store);

  SUBCASE("three splits give three blocks per model") {
    const auto report = subsample_report(records, cfg);
    CHECK(report.cells.size() == 2 * 2 * 3);
    CHECK_FALSE(report.cell("AR", "EoQ", "full")->relative);
    CHECK(report.cell("SG_LASSO_MIDAS", "EoQ", "late")->relative);
    CHECK(report.cumsum.size() == report.cells.size());
    CHECK(report.audit_passed);
    const auto* full = report.cell("AR", "EoQ", "full");
    CHECK(full->value == rmse(select_records(records, "AR", "EoQ")));
  }
  SUBCASE("single full split gives one block") {
    auto one = cfg;
    one.subsamples = {{"full", std::nullopt, std::nullopt}};
    CHECK(subsample_report(records, one).cells.size() == 2 * 2);
  }
  SUBCASE("one model only") {
    const auto only = select_records(records, "SG_LASSO_MIDAS", "EoQ");
    auto bench_only = select_records(records, "AR", "EoQ");
    auto one = cfg;
    one.horizons = {default_horizons()[2]};
    one.subsamples = {{"full", std::nullopt, std::nullopt}};
    CHECK_FALSE(subsample_report(bench_only, one).cells.front().relative);
    CHECK_FALSE(subsample_report(only, one).cells.front().relative);
  }
  SUBCASE("writers are deterministic") {
    const auto dir = std::filesystem::temp_directory_path() / "spdmidas_report_test";
    std::filesystem::create_directories(dir);
    const auto report = subsample_report(records, cfg);
    write_report_csv(dir / "a.csv", report);
    write_report_json(dir / "a.json", report);
    write_cumsum_csv(dir / "c.csv", report);
    write_records_csv(dir / "r.csv", records);
    const auto again = subsample_report(run_expanding(cfg, {ar_model(), sg_model()}, data.store), cfg);
    write_report_csv(dir / "b.csv", again);
    write_report_json(dir / "b.json", again);
    CHECK(slurp(dir / "a.csv") == slurp(dir / "b.csv"));
    CHECK(slurp(dir / "a.json") == slurp(dir / "b.json"));
    CHECK(slurp(dir / "a.csv").rfind("model,horizon,subsample,metric,value\n", 0) == 0);
    CHECK(slurp(dir / "c.csv").rfind("model,horizon,subsample,origin,cumsum\n", 0) == 0);
    CHECK(slurp(dir / "a.json").find("\"relative_rmse\"") != std::string::npos);
    std::filesystem::remove_all(dir);
  }
}
