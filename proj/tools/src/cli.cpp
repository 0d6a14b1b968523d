#include "cli.hpp"

#include <fstream>
#include <iostream>
#include <map>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "run_config.hpp"
#include "spdmidas/evaluation_harness.hpp"
#include "spdmidas/factor_extraction.hpp"
#include "spdmidas/log.hpp"
#include "spdmidas/panel_io.hpp"

namespace spdmidas::cli {

namespace {

namespace fs = std::filesystem;

struct Options {
  fs::path config;
  std::optional<fs::path> out;
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs;
  std::optional<std::string> log_level;
  std::optional<int> rank;
  bool strict = false;
  bool force = false;
};

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::config:
      return 2;
    case ErrorKind::convergence:
    case ErrorKind::rank_deficiency:
    case ErrorKind::degenerate_spectrum:
    case ErrorKind::unidentifiable:
    case ErrorKind::domain:
      return 4;
    default:
      return 3;
  }
}

// Refuses to clobber earlier results unless --force was given.
void claim_outputs(const fs::path& dir, const std::vector<std::string>& names, bool force) {
  if (!force) {
    for (const auto& n : names) {
      if (fs::exists(dir / n)) {
        throw Error(ErrorKind::config,
                    fmt::format("'{}' already exists; pass --force to overwrite", (dir / n).string()));
      }
    }
  }
  fs::create_directories(dir);
}

VintageStore load_store(const RunConfig& cfg) {
  if (!cfg.data) return synthetic_dgp(cfg.simulate).store;
  std::vector<fs::path> files = cfg.data->panels;
  files.push_back(cfg.data->metadata);
  files.push_back(cfg.data->target);
  for (const auto& f : files) {
    if (!fs::exists(f)) throw Error(ErrorKind::data, fmt::format("data file '{}' does not exist", f.string()));
  }
  return load_vintage_store(cfg.data->panels, cfg.data->metadata, cfg.data->target);
}

const Snapshot& latest_snapshot(const VintageStore& store) {
  if (store.empty()) throw Error(ErrorKind::data, "the data contain no snapshot");
  return std::prev(store.snapshots().end())->second;
}

std::map<std::string, std::vector<RawSeries>> by_panel(const std::vector<RawSeries>& series) {
  std::map<std::string, std::vector<RawSeries>> out;
  for (const auto& s : series) out[s.panel_id].push_back(s);
  return out;
}

int cmd_nowcast(const RunConfig& cfg, const Options& opt) {
  if (cfg.models.empty()) throw Error(ErrorKind::config, "models: at least one model is required");
  const std::vector<std::string> files{"report.csv", "report.json", "cumsum.csv", "records.csv"};
  claim_outputs(cfg.output, files, opt.force);

  const VintageStore store = load_store(cfg);
  const auto records = run_expanding(cfg.harness, cfg.models, store);

  int unconverged = 0;
  for (const auto& r : records) {
    if (!r.converged) ++unconverged;
  }
  if (unconverged > 0) {
    log_warn("{} nowcasts hit a fit that did not converge", unconverged);
  }

  const EvaluationReport report = subsample_report(records, cfg.harness);
  write_report_csv(cfg.output / files[0], report);
  write_report_json(cfg.output / files[1], report);
  write_cumsum_csv(cfg.output / files[2], report);
  write_records_csv(cfg.output / files[3], records);

  if (opt.strict && unconverged > 0) {
    std::cerr << fmt::format("error: {} nowcasts did not converge (--strict)\n", unconverged);
    return 4;
  }
  return 0;
}

// Slots covering the window of every quarter in [first, last] are observed.
bool window_observed(const HighFrequencyPanel& panel, const LagLeadSpec& spec, Quarter t) {
  const Eigen::Index anchor = static_cast<Eigen::Index>(t - panel.calendar().first) * panel.m();
  const Eigen::Index lo = anchor - static_cast<Eigen::Index>(spec.m) * spec.q;
  const Eigen::Index hi = anchor + spec.leads;
  if (lo < 0 || hi > panel.values().cols()) return false;
  return panel.values().middleCols(lo, hi - lo).allFinite();
}

int cmd_factors(const RunConfig& cfg, const Options& opt) {
  const VintageStore store = load_store(cfg);
  auto panels = by_panel(latest_snapshot(store).series);
  if (!cfg.factors.panels.empty()) {
    std::map<std::string, std::vector<RawSeries>> chosen;
    for (const auto& id : cfg.factors.panels) {
      auto it = panels.find(id);
      if (it == panels.end()) throw Error(ErrorKind::config, fmt::format("factors.panels: unknown panel '{}'", id));
      chosen.insert(*it);
    }
    panels = std::move(chosen);
  }
  std::vector<std::string> files{"eigenvalues.csv", "rank.csv"};
  for (const auto& [id, _] : panels) files.push_back(fmt::format("factors_{}.csv", id));
  claim_outputs(cfg.output, files, opt.force);

  const LegendreBasis basis(cfg.factors.degree);
  std::ofstream eig(cfg.output / "eigenvalues.csv");
  std::ofstream rank(cfg.output / "rank.csv");
  eig << "panel,index,eigenvalue\n";
  rank << "panel,method,kmax,selected\n";

  for (const auto& [id, raw] : panels) {
    std::vector<RawSeries> series;
    for (const auto& s : raw) series.push_back(apply_tcode(s));
    HighFrequencyPanel panel = align_to_target(series, TargetCalendar::covering(series), id);
    if (!panel.values().allFinite()) panel = complete_panel(panel, cfg.harness.completion);

    LagLeadSpec spec{panel.m(), cfg.factors.lags, std::min(cfg.factors.leads, panel.m())};
    spec.validate();
    auto [first, last] = window_range(panel, spec);
    while (first <= last && !window_observed(panel, spec, first)) first = first + 1;
    while (last >= first && !window_observed(panel, spec, last)) last = last - 1;
    if (first > last) throw Error(ErrorKind::data, fmt::format("panel '{}' has no fully observed window", id));

    const AggregatedTensor tensor = aggregate(panel, spec, basis, first, last);
    const StandardizedMatrix z = standardize(stack_for_pca(tensor), panel.keys());
    const Eigen::VectorXd ev = covariance_eigenvalues(z);
    const RankMethod method = opt.rank ? RankMethod::fixed : cfg.factors.rank_method;
    const RankSelection sel = select_rank(ev, method, cfg.factors.kmax, z.matrix.cols(), z.matrix.rows(),
                                          opt.rank.value_or(cfg.factors.fixed_rank));
    for (Eigen::Index i = 0; i < ev.size(); ++i) eig << fmt::format("{},{},{:.17g}\n", id, i + 1, ev(i));
    rank << fmt::format("{},{},{},{}\n", id, to_string(sel.method), sel.kmax, sel.selected);
    if (sel.selected == 0) log_warn("panel '{}': no factor selected", id);

    AggregatedTensor scores = tensor;
    scores.series_count = 0;
    scores.values.resize(tensor.rows(), 0);
    if (sel.selected > 0) {
      const FactorModelFit fit = pca_extract(z, sel.selected, id);
      scores = unstack_factors(fit.factor_scores, tensor);
    }
    write_factor_scores_csv(cfg.output / fmt::format("factors_{}.csv", id), id, scores);
  }
  return 0;
}

int cmd_simulate(const RunConfig& cfg, const Options& opt) {
  const SyntheticData data = synthetic_dgp(cfg.simulate);
  const Snapshot& snap = latest_snapshot(data.store);
  const auto panels = by_panel(snap.series);
  std::vector<std::string> files{"metadata.csv", "target.csv", "truth.json", "factors.csv"};
  for (const auto& [id, _] : panels) files.push_back(id + ".csv");
  claim_outputs(cfg.output, files, opt.force);

  for (const auto& [id, series] : panels) write_panel_csv(cfg.output / (id + ".csv"), series);
  write_metadata_csv(cfg.output / "metadata.csv", snap.series);
  write_target_csv(cfg.output / "target.csv", snap.target);
  write_truth_json(cfg.output / "truth.json", data.truth);

  std::ofstream f(cfg.output / "factors.csv");
  f << "date";
  for (Eigen::Index r = 0; r < data.truth.factors.rows(); ++r) f << ",factor_" << r + 1;
  f << '\n';
  for (std::size_t i = 0; i < data.truth.factor_dates.size(); ++i) {
    f << data.truth.factor_dates[i].iso();
    for (Eigen::Index r = 0; r < data.truth.factors.rows(); ++r) {
      f << fmt::format(",{:.17g}", data.truth.factors(r, static_cast<Eigen::Index>(i)));
    }
    f << '\n';
  }
  return 0;
}

int dispatch(const std::string& command, const Options& opt) {
  try {
    RunConfig cfg = load_run_config(opt.config);
    set_log_level(parse_log_level(opt.log_level.value_or(cfg.log_level)));
    if (opt.out) cfg.output = *opt.out;
    if (opt.seed) cfg.seed = *opt.seed;
    cfg.simulate.seed = cfg.seed;
    if (opt.jobs) {
      if (*opt.jobs < 1) throw Error(ErrorKind::config, "--jobs must be at least 1");
      cfg.harness.jobs = *opt.jobs;
    }
    if (opt.rank && *opt.rank < 1) throw Error(ErrorKind::config, "--rank must be at least 1");

    if (command == "nowcast") return cmd_nowcast(cfg, opt);
    if (command == "factors") return cmd_factors(cfg, opt);
    return cmd_simulate(cfg, opt);
  } catch (const Error& e) {
    std::cerr << fmt::format("error [{}]: {}\n", to_string(e.kind()), e.what());
    return exit_code(e.kind());
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error [io]: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace

int run(int argc, char** argv) {
  CLI::App app{"Sparse-group MIDAS nowcasting"};
  app.require_subcommand(1);
  Options opt;

  const std::vector<std::pair<std::string, std::string>> commands{
      {"nowcast", "Run the expanding-window evaluation and write reports"},
      {"factors", "Extract PCA factors per panel"},
      {"simulate", "Write a synthetic sparse-plus-dense data set"},
  };
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", opt.config, "JSON run file")->required();
    sub->add_option("--out", opt.out, "Output directory (overrides the config)");
    sub->add_option("--seed", opt.seed, "Random seed (overrides the config)");
    sub->add_option("--jobs", opt.jobs, "Maximum worker threads");
    sub->add_option("--log-level", opt.log_level, "error, warn, info or debug");
    sub->add_flag("--strict", opt.strict, "Treat solver non-convergence as an error");
    sub->add_flag("--force", opt.force, "Overwrite existing output files");
    if (name == "factors") sub->add_option("--rank", opt.rank, "Fixed number of factors");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  return dispatch(app.get_subcommands().front()->get_name(), opt);
}

}  // namespace spdmidas::cli
