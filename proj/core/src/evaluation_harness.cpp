#include "spdmidas/evaluation_harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <limits>
#include <mutex>
#include <numeric>
#include <random>
#include <stdexcept>
#include <thread>

#include <fmt/format.h>
#include <fmt/os.h>
#include <nlohmann/json.hpp>

#include "spdmidas/error.hpp"
#include "spdmidas/log.hpp"
#include "spdmidas/midas_basis.hpp"

namespace spdmidas {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool usable(const NowcastRecord& r) { return r.ok && std::isfinite(r.error); }

std::string csv_safe(std::string text) {
  std::replace(text.begin(), text.end(), ',', ';');
  std::replace(text.begin(), text.end(), '\n', ' ');
  return text;
}

std::string number(double v) {
  if (std::isnan(v)) return "NA";
  return fmt::format("{:.17g}", v);
}

}  // namespace

int Horizon::leads_for(const std::string& panel_id, Frequency frequency) const {
  if (const auto it = overrides.find(panel_id); it != overrides.end()) return it->second;
  switch (frequency.cadence) {
    case Cadence::monthly: return monthly_leads;
    case Cadence::weekly: return weekly_leads;
    case Cadence::quarterly: return 0;
  }
  return 0;
}

std::vector<Horizon> default_horizons() {
  return {{"2-month", 1, 1, 4, {}}, {"1-month", 2, 2, 8, {}}, {"EoQ", 3, 3, 13, {}}};
}

std::vector<Subsample> default_subsamples() {
  return {{"full", std::nullopt, std::nullopt},
          {"pre-2020", std::nullopt, Quarter::of(2019, 4)},
          {"post-2020", Quarter::of(2020, 1), std::nullopt}};
}

void HarnessConfig::validate() const {
  if (!(first_origin > in_sample_end)) {
    throw Error(ErrorKind::config, fmt::format("first origin {} must follow the in-sample end {}",
                                               first_origin.label(), in_sample_end.label()));
  }
  if (last_origin < first_origin) {
    throw Error(ErrorKind::config, "last origin precedes the first origin");
  }
  if (horizons.empty()) throw Error(ErrorKind::config, "at least one horizon is required");
  for (const auto& h : horizons) {
    if (h.info_month < 1 || h.info_month > 3) {
      throw Error(ErrorKind::config,
                  fmt::format("horizon '{}': information month must be 1..3", h.label));
    }
  }
  if (retune_every < 1) throw Error(ErrorKind::config, "retune_every must be >= 1");
  if (jobs < 1) throw Error(ErrorKind::config, "jobs must be >= 1");
  completion.validate();
}

PreparedOrigin prepare_origin(const HarnessConfig& config, const VintageStore& store, Quarter origin,
                              const Horizon& horizon, const std::set<std::string>& external_keys) {
  PreparedOrigin out;
  out.information_date = horizon.information_date(origin);
  const Snapshot snap = vintage_slice(store, out.information_date);

  if (!snap.target.contains(origin - 1)) {
    throw Error(ErrorKind::data, fmt::format("target for {} is not released by {}",
                                             (origin - 1).label(), out.information_date.iso()));
  }
  out.inputs.origin = origin;
  out.inputs.target = snap.target.up_to(origin - 1);
  out.max_timestamp = (origin - 1).last_day();

  std::map<std::string, std::vector<RawSeries>> by_panel;
  for (const auto& raw : snap.series) {
    if (raw.observations.empty()) continue;
    RawSeries s = apply_tcode(raw);
    if (const auto last = s.last_date(); last && *last > out.max_timestamp) out.max_timestamp = *last;
    if (external_keys.count(s.key)) {
      out.inputs.external.emplace(s.key, std::move(s));
    } else {
      by_panel[s.panel_id].push_back(std::move(s));
    }
  }
  for (auto& [panel_id, series] : by_panel) {
    TargetCalendar cal = TargetCalendar::covering(series);
    cal.periods = origin - cal.first + 1;
    HighFrequencyPanel panel = align_to_target(series, cal, panel_id);
    if (config.missing == MissingPolicy::trim) {
      panel = trim_to_balanced(panel, origin);
    } else {
      panel = complete_panel(panel, config.completion);
    }
    if (panel.max_date() && *panel.max_date() > out.max_timestamp) out.max_timestamp = *panel.max_date();
    out.inputs.panels.push_back(std::move(panel));
  }
  return out;
}

LeadMap leads_for(const ModelConfig& model, const Horizon& horizon, const ModelInputs& inputs) {
  LeadMap leads;
  for (const auto& role : model.panels) {
    if (role.external_factor) {
      if (const auto it = inputs.external.find(*role.external_factor); it != inputs.external.end()) {
        leads[role.panel_id] = horizon.leads_for(role.panel_id, it->second.frequency);
      }
      continue;
    }
    for (const auto& p : inputs.panels) {
      if (p.panel_id() == role.panel_id) leads[role.panel_id] = horizon.leads_for(role.panel_id, p.frequency());
    }
  }
  return leads;
}

std::vector<NowcastRecord> run_expanding(const HarnessConfig& config,
                                         const std::vector<ModelConfig>& models,
                                         const VintageStore& store) {
  config.validate();
  if (models.empty()) throw Error(ErrorKind::config, "no models to evaluate");
  for (const auto& m : models) m.validate();
  std::set<std::string> external_keys;
  for (const auto& m : models) {
    for (const auto& r : m.panels) {
      if (r.external_factor) external_keys.insert(*r.external_factor);
    }
  }

  // Tasks are (horizon, block of retune_every origins); penalties tuned at a
  // block's first origin are reused inside the block.
  struct Task {
    std::size_t horizon;
    Quarter first;
    Quarter last;
  };
  std::vector<Task> tasks;
  for (std::size_t h = 0; h < config.horizons.size(); ++h) {
    for (Quarter o = config.first_origin; o <= config.last_origin; o = o + config.retune_every) {
      tasks.push_back({h, o, std::min(o + (config.retune_every - 1), config.last_origin)});
    }
  }

  std::vector<std::vector<NowcastRecord>> results(tasks.size());
  auto run_task = [&](const Task& task, std::vector<NowcastRecord>& out) {
    const Horizon& horizon = config.horizons[task.horizon];
    std::vector<std::optional<PenaltySpec>> cache(models.size());
    for (Quarter o = task.first; o <= task.last; o = o + 1) {
      const auto realized = store.realized(o);
      std::optional<PreparedOrigin> prepared;
      std::string prep_error;
      try {
        prepared = prepare_origin(config, store, o, horizon, external_keys);
      } catch (const Error& e) {
        prep_error = e.what();
      }
      for (std::size_t mi = 0; mi < models.size(); ++mi) {
        NowcastRecord rec;
        rec.origin = o;
        rec.horizon = horizon.label;
        rec.model = models[mi].label();
        rec.realized = realized;
        rec.information_date = horizon.information_date(o);
        rec.error = kNaN;
        if (!prepared) {
          rec.reason = prep_error;
          out.push_back(std::move(rec));
          continue;
        }
        rec.max_timestamp = prepared->max_timestamp;
        try {
          const LeadMap leads = leads_for(models[mi], horizon, prepared->inputs);
          const NowcastResult res = nowcast(models[mi], prepared->inputs, leads, cache[mi]);
          if (res.tuned) cache[mi] = res.penalty;
          rec.nowcast = res.value;
          rec.penalty = res.penalty;
          rec.tuned = res.tuned;
          rec.converged = res.model.solution.converged;
          rec.ok = true;
          if (realized) rec.error = *realized - res.value;
        } catch (const Error& e) {
          rec.reason = e.what();
          rec.converged = e.kind() != ErrorKind::convergence;
          log_warn("origin {} {} {}: {}", o.label(), horizon.label, rec.model, e.what());
        }
        out.push_back(std::move(rec));
      }
    }
  };

  const auto workers = static_cast<std::size_t>(
      std::max(1, std::min<int>(config.jobs, static_cast<int>(tasks.size()))));
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < tasks.size(); i = next++) {
      try {
        run_task(tasks[i], results[i]);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  std::vector<NowcastRecord> records;
  for (auto& r : results) std::move(r.begin(), r.end(), std::back_inserter(records));
  std::map<std::string, std::size_t> model_rank, horizon_rank;
  for (std::size_t i = 0; i < models.size(); ++i) model_rank.emplace(models[i].label(), i);
  for (std::size_t i = 0; i < config.horizons.size(); ++i) horizon_rank.emplace(config.horizons[i].label, i);
  std::stable_sort(records.begin(), records.end(), [&](const NowcastRecord& a, const NowcastRecord& b) {
    const auto ka = std::tuple(model_rank[a.model], horizon_rank[a.horizon], a.origin);
    const auto kb = std::tuple(model_rank[b.model], horizon_rank[b.horizon], b.origin);
    return ka < kb;
  });

  for (const auto& r : records) {
    if (r.ok && r.max_timestamp > r.information_date) {
      throw std::logic_error(fmt::format("look-ahead: {} at {} used data stamped {} after {}", r.model,
                                         r.origin.label(), r.max_timestamp.iso(),
                                         r.information_date.iso()));
    }
  }
  return records;
}

std::vector<NowcastRecord> select_records(const std::vector<NowcastRecord>& records,
                                          const std::string& model, const std::string& horizon) {
  std::vector<NowcastRecord> out;
  for (const auto& r : records) {
    if (r.model == model && r.horizon == horizon) out.push_back(r);
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const NowcastRecord& a, const NowcastRecord& b) { return a.origin < b.origin; });
  return out;
}

double rmse(const std::vector<NowcastRecord>& records, const Subsample& subsample) {
  double sse = 0.0;
  int n = 0;
  for (const auto& r : records) {
    if (!usable(r) || !subsample.contains(r.origin)) continue;
    sse += r.error * r.error;
    ++n;
  }
  if (n == 0) {
    throw Error(ErrorKind::data, fmt::format("subsample '{}' has no scored nowcasts", subsample.label));
  }
  return std::sqrt(sse / n);
}

double relative_rmse(const std::vector<NowcastRecord>& model,
                     const std::vector<NowcastRecord>& benchmark, const Subsample& subsample) {
  std::map<std::pair<int, std::string>, double> bench;
  for (const auto& r : benchmark) {
    if (usable(r) && subsample.contains(r.origin)) bench[{r.origin.index, r.horizon}] = r.error;
  }
  double num = 0.0, den = 0.0;
  int n = 0;
  for (const auto& r : model) {
    if (!usable(r) || !subsample.contains(r.origin)) continue;
    const auto it = bench.find({r.origin.index, r.horizon});
    if (it == bench.end()) continue;
    num += r.error * r.error;
    den += it->second * it->second;
    ++n;
  }
  if (n == 0) {
    throw Error(ErrorKind::data,
                fmt::format("subsample '{}' has no origins scored by both models", subsample.label));
  }
  if (den == 0.0) {
    throw Error(ErrorKind::data,
                fmt::format("benchmark has zero error over subsample '{}'", subsample.label));
  }
  return std::sqrt(num / den);
}

std::vector<double> cumsum_series(const std::vector<NowcastRecord>& records, const Subsample& subsample) {
  std::vector<const NowcastRecord*> ordered;
  for (const auto& r : records) {
    if (usable(r) && subsample.contains(r.origin)) ordered.push_back(&r);
  }
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const NowcastRecord* a, const NowcastRecord* b) { return a->origin < b->origin; });
  std::vector<double> out;
  double sse = 0.0;
  for (const auto* r : ordered) {
    sse += r->error * r->error;
    out.push_back(std::sqrt(sse));
  }
  return out;
}

const ReportCell* EvaluationReport::cell(const std::string& model, const std::string& horizon,
                                         const std::string& subsample) const {
  for (const auto& c : cells) {
    if (c.model == model && c.horizon == horizon && c.subsample == subsample) return &c;
  }
  return nullptr;
}

EvaluationReport subsample_report(const std::vector<NowcastRecord>& records,
                                  const HarnessConfig& config) {
  EvaluationReport report;
  report.benchmark = config.benchmark;
  report.records = records;
  for (const auto& r : records) {
    if (std::find(report.models.begin(), report.models.end(), r.model) == report.models.end()) {
      report.models.push_back(r.model);
    }
    if (r.ok && r.max_timestamp > r.information_date) report.audit_passed = false;
  }
  for (const auto& h : config.horizons) report.horizons.push_back(h.label);
  const bool has_benchmark =
      std::find(report.models.begin(), report.models.end(), config.benchmark) != report.models.end();

  for (const auto& sub : config.subsamples) {
    report.subsamples.push_back(sub.label);
    for (const auto& model : report.models) {
      for (const auto& horizon : report.horizons) {
        const auto recs = select_records(records, model, horizon);
        ReportCell cell{model, horizon, sub.label, 0.0, false, 0, 0};
        for (const auto& r : recs) {
          if (!sub.contains(r.origin)) continue;
          if (usable(r)) ++cell.count; else if (!r.ok) ++cell.failed;
        }
        try {
          if (has_benchmark && model != config.benchmark) {
            cell.value = relative_rmse(recs, select_records(records, config.benchmark, horizon), sub);
            cell.relative = true;
          } else {
            cell.value = rmse(recs, sub);
          }
        } catch (const Error& e) {
          log_warn("report: {} {} {}: {}", model, horizon, sub.label, e.what());
          continue;
        }
        report.cells.push_back(cell);

        CumsumSeries cs{model, horizon, sub.label, {}, cumsum_series(recs, sub)};
        for (const auto& r : recs) {
          if (usable(r) && sub.contains(r.origin)) cs.origins.push_back(r.origin);
        }
        report.cumsum.push_back(std::move(cs));
      }
    }
  }
  return report;
}

void write_report_csv(const std::filesystem::path& path, const EvaluationReport& report) {
  auto out = fmt::output_file(path.string());
  out.print("model,horizon,subsample,metric,value\n");
  for (const auto& c : report.cells) {
    out.print("{},{},{},{},{}\n", c.model, c.horizon, c.subsample,
              c.relative ? "relative_rmse" : "rmse", number(c.value));
    out.print("{},{},{},count,{}\n", c.model, c.horizon, c.subsample, c.count);
    out.print("{},{},{},failed,{}\n", c.model, c.horizon, c.subsample, c.failed);
  }
}

void write_report_json(const std::filesystem::path& path, const EvaluationReport& report) {
  using json = nlohmann::ordered_json;
  json root;
  root["benchmark"] = report.benchmark;
  root["audit_passed"] = report.audit_passed;
  root["horizons"] = report.horizons;
  json subs = json::array();
  for (const auto& sub : report.subsamples) {
    json models = json::array();
    for (const auto& model : report.models) {
      json horizons = json::object();
      for (const auto& h : report.horizons) {
        const ReportCell* c = report.cell(model, h, sub);
        if (!c) continue;
        horizons[h] = {{c->relative ? "relative_rmse" : "rmse", c->value},
                       {"count", c->count},
                       {"failed", c->failed}};
      }
      models.push_back({{"model", model}, {"benchmark", model == report.benchmark}, {"horizons", horizons}});
    }
    subs.push_back({{"subsample", sub}, {"models", models}});
  }
  root["subsamples"] = subs;
  std::ofstream f(path);
  if (!f) throw Error(ErrorKind::data, fmt::format("cannot write '{}'", path.string()));
  f << root.dump(2) << '\n';
}

void write_cumsum_csv(const std::filesystem::path& path, const EvaluationReport& report) {
  auto out = fmt::output_file(path.string());
  out.print("model,horizon,subsample,origin,cumsum\n");
  for (const auto& cs : report.cumsum) {
    for (std::size_t i = 0; i < cs.values.size(); ++i) {
      out.print("{},{},{},{},{}\n", cs.model, cs.horizon, cs.subsample, cs.origins[i].label(),
                number(cs.values[i]));
    }
  }
}

void write_records_csv(const std::filesystem::path& path, const std::vector<NowcastRecord>& records) {
  auto out = fmt::output_file(path.string());
  out.print(
      "model,horizon,origin,information_date,max_timestamp,nowcast,realized,error,ok,converged,"
      "tuned,penalty,alpha,mu,mu1,mu2,reason\n");
  for (const auto& r : records) {
    out.print("{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n", r.model, r.horizon,
              r.origin.label(), r.information_date.iso(), r.ok ? r.max_timestamp.iso() : "",
              r.ok ? number(r.nowcast) : "NA", r.realized ? number(*r.realized) : "NA",
              number(r.error), r.ok ? 1 : 0, r.converged ? 1 : 0, r.tuned ? 1 : 0,
              to_string(r.penalty.kind), number(r.penalty.alpha), number(r.penalty.mu),
              number(r.penalty.mu1), number(r.penalty.mu2), csv_safe(r.reason));
  }
}

// Synthetic data -------------------------------------------------------------------

void DgpConfig::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorKind::config, "synthetic data: " + msg); };
  if (quarters < 8) fail("at least 8 quarters are required");
  if (macro_series < 1 || weekly_series < 0) fail("panel sizes must be positive");
  if (factors < 0) fail("factor count must be >= 0");
  if (sparsity < 0 || sparsity > macro_series + weekly_series) {
    fail(fmt::format("sparsity {} exceeds the {} available series", sparsity,
                     macro_series + weekly_series));
  }
  if (factors == 0 && dense_scale != 0.0) fail("a dense part needs at least one factor");
  if (noise_sd < 0.0 || dense_scale < 0.0 || sparse_scale < 0.0) fail("scales must be >= 0");
  if (std::abs(factor_persistence) >= 1.0 || std::abs(idiosyncratic_persistence) >= 1.0 ||
      std::abs(ar_coefficient) >= 1.0) {
    fail("autoregressive coefficients must lie in (-1, 1)");
  }
  if (degree < 0) fail("basis degree must be >= 0");
  if (shift && shift->factor_scale <= 0.0) fail("regime shift scale must be positive");
}

SyntheticData synthetic_dgp(const DgpConfig& config) {
  config.validate();
  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> n01;
  const TargetCalendar cal{config.start, config.quarters};
  const Date shift_date = config.shift ? config.shift->start.first_day() : Date{};

  std::vector<Date> months;
  for (Quarter q = cal.first; q <= cal.last(); q = q + 1) {
    for (int m = 0; m < 3; ++m) {
      months.emplace_back(q.year(), static_cast<unsigned>(3 * (q.q() - 1) + m + 1), 1u);
    }
  }
  std::vector<Date> weeks;
  {
    Date d = cal.first.first_day();
    // Weekly observations fall on Fridays.
    while (std::chrono::weekday{d.sys_days()} != std::chrono::Friday) d = d.plus_days(1);
    for (; d <= cal.last().last_day(); d = d.plus_days(7)) weeks.push_back(d);
  }

  auto ar1 = [&](std::size_t n, double rho, auto scale_at) {
    std::vector<double> x(n);
    const double sd = std::sqrt(1.0 - rho * rho);
    double prev = n01(rng);
    for (int burn = 0; burn < 50; ++burn) prev = rho * prev + sd * n01(rng);
    for (std::size_t i = 0; i < n; ++i) {
      prev = rho * prev + sd * scale_at(i) * n01(rng);
      x[i] = prev;
    }
    return x;
  };

  DgpTruth truth;
  truth.intercept = config.intercept;
  truth.ar_coefficient = config.ar_coefficient;
  truth.shift = config.shift;
  truth.factor_dates = months;
  truth.factors.resize(config.factors, static_cast<Eigen::Index>(months.size()));
  for (int r = 0; r < config.factors; ++r) {
    const auto f = ar1(months.size(), config.factor_persistence, [&](std::size_t i) {
      return config.shift && months[i] >= shift_date ? config.shift->factor_scale : 1.0;
    });
    for (std::size_t i = 0; i < f.size(); ++i) truth.factors(r, static_cast<Eigen::Index>(i)) = f[i];
  }
  auto unit = [](std::size_t) { return 1.0; };

  std::vector<RawSeries> series;
  for (int k = 0; k < config.macro_series; ++k) {
    RawSeries s{fmt::format("M{:02}", k + 1), "macro", {}, Frequency::monthly(), TransformCode(1)};
    std::vector<double> lambda(static_cast<std::size_t>(config.factors));
    for (auto& l : lambda) l = (n01(rng) > 0 ? 1.0 : -1.0) * (0.5 + std::uniform_real_distribution<>(0, 1)(rng));
    auto e = ar1(months.size(), config.idiosyncratic_persistence, unit);
    for (std::size_t i = 0; i < months.size(); ++i) {
      double v = e[i];
      for (int r = 0; r < config.factors; ++r) v += lambda[static_cast<std::size_t>(r)] * truth.factors(r, static_cast<Eigen::Index>(i));
      s.observations.push_back({months[i], v});
    }
    series.push_back(std::move(s));
  }
  for (int k = 0; k < config.weekly_series; ++k) {
    RawSeries s{fmt::format("W{:02}", k + 1), "financial", {}, Frequency::weekly(), TransformCode(1)};
    auto e = ar1(weeks.size(), config.idiosyncratic_persistence, unit);
    for (std::size_t i = 0; i < weeks.size(); ++i) s.observations.push_back({weeks[i], e[i]});
    series.push_back(std::move(s));
  }

  // Active series drawn without replacement across both panels.
  std::vector<std::size_t> order(series.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  order.resize(static_cast<std::size_t>(config.sparsity));
  std::sort(order.begin(), order.end());

  const LegendreBasis basis(config.degree);
  const Quarter y_first = cal.first + 1;
  Eigen::VectorXd signal = Eigen::VectorXd::Zero(config.quarters - 1);
  for (std::size_t idx : order) {
    const RawSeries& s = series[idx];
    const auto panel = align_to_target({s}, cal, s.panel_id);
    const LagLeadSpec spec{panel.m(), 1, panel.m()};
    const auto x = aggregate(panel, spec, basis, y_first, cal.last());
    // Aggregates sum over the window, so coefficients shrink with its length.
    const double scale = config.sparse_scale / std::sqrt(static_cast<double>(spec.window() * basis.size()));
    std::vector<double> beta(static_cast<std::size_t>(basis.size()));
    for (auto& b : beta) b = scale * n01(rng);
    for (int d = 0; d < basis.size(); ++d) {
      for (Quarter t = y_first; t <= cal.last(); t = t + 1) signal[t - y_first] += beta[static_cast<std::size_t>(d)] * x(0, d, t);
    }
    truth.active_keys.push_back(s.key);
    truth.sparse_coefficients.push_back(std::move(beta));
  }
  for (int r = 0; r < config.factors; ++r) {
    RawSeries f{fmt::format("F{}", r + 1), "factor", {}, Frequency::monthly(), TransformCode(1)};
    for (std::size_t i = 0; i < months.size(); ++i) f.observations.push_back({months[i], truth.factors(r, static_cast<Eigen::Index>(i))});
    const auto panel = align_to_target({f}, cal, "factor");
    const LagLeadSpec spec{3, 1, 3};
    const auto x = aggregate(panel, spec, basis, y_first, cal.last());
    const double scale = config.dense_scale / std::sqrt(static_cast<double>(spec.window() * basis.size()));
    std::vector<double> gamma(static_cast<std::size_t>(basis.size()));
    for (auto& g : gamma) g = scale * n01(rng);
    for (int d = 0; d < basis.size(); ++d) {
      for (Quarter t = y_first; t <= cal.last(); t = t + 1) signal[t - y_first] += gamma[static_cast<std::size_t>(d)] * x(0, d, t);
    }
    truth.dense_coefficients.push_back(std::move(gamma));
  }

  TargetSeries y{y_first, {}};
  double prev = config.intercept / (1.0 - config.ar_coefficient);
  for (Eigen::Index i = 0; i < signal.size(); ++i) {
    prev = config.intercept + config.ar_coefficient * prev + signal[i] + config.noise_sd * n01(rng);
    y.values.push_back(prev);
  }
  return {VintageStore::pseudo_real_time(Snapshot{std::move(y), std::move(series)}), std::move(truth)};
}

void write_truth_json(const std::filesystem::path& path, const DgpTruth& truth) {
  nlohmann::ordered_json root;
  root["intercept"] = truth.intercept;
  root["ar_coefficient"] = truth.ar_coefficient;
  nlohmann::ordered_json sparse = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < truth.active_keys.size(); ++i) {
    sparse.push_back({{"series", truth.active_keys[i]}, {"coefficients", truth.sparse_coefficients[i]}});
  }
  root["sparse_support"] = sparse;
  nlohmann::ordered_json dense = nlohmann::ordered_json::array();
  for (const auto& g : truth.dense_coefficients) dense.push_back(g);
  root["dense_coefficients"] = dense;
  if (truth.shift) {
    root["regime_shift"] = {{"start", truth.shift->start.label()}, {"factor_scale", truth.shift->factor_scale}};
  } else {
    root["regime_shift"] = nullptr;
  }
  std::ofstream f(path);
  if (!f) throw Error(ErrorKind::data, fmt::format("cannot write '{}'", path.string()));
  f << root.dump(2) << '\n';
}

}  // namespace spdmidas
