#include "run_config.hpp"

#include <fstream>
#include <set>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "spdmidas/error.hpp"

namespace spdmidas::cli {

namespace {

using json = nlohmann::json;

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw Error(ErrorKind::config, fmt::format("{}: {}", path, what));
}

// A JSON object plus its location, for error messages.
class Node {
 public:
  Node(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail(path_, "expected an object");
  }

  const std::string& path() const { return path_; }
  bool has(const char* key) const { return j_.contains(key) && !j_.at(key).is_null(); }
  std::string at_path(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

  void allow(std::initializer_list<const char*> keys) const {
    const std::set<std::string> ok(keys.begin(), keys.end());
    for (const auto& [k, v] : j_.items()) {
      if (!ok.count(k)) fail(path_.empty() ? k : path_ + "." + k, "unknown field");
    }
  }

  template <typename T>
  T get(const char* key, T fallback) const {
    if (!has(key)) return fallback;
    return convert<T>(j_.at(key), at_path(key));
  }

  template <typename T>
  T require(const char* key) const {
    if (!has(key)) fail(at_path(key), "required field is missing");
    return convert<T>(j_.at(key), at_path(key));
  }

  Node child(const char* key) const { return Node(j_.at(key), at_path(key)); }
  const json& raw(const char* key) const { return j_.at(key); }

  template <typename T>
  static T convert(const json& v, const std::string& where) {
    try {
      return v.get<T>();
    } catch (const json::exception&) {
      fail(where, fmt::format("unexpected value {}", v.dump()));
    }
  }

 private:
  const json& j_;
  std::string path_;
};

Quarter quarter(const Node& n, const char* key, Quarter fallback) {
  if (!n.has(key)) return fallback;
  const auto text = n.get<std::string>(key, "");
  try {
    return Quarter::parse(text);
  } catch (const Error&) {
    fail(n.at_path(key), fmt::format("'{}' is not a quarter like 2008Q1", text));
  }
}

std::optional<Quarter> optional_quarter(const Node& n, const char* key) {
  if (!n.has(key)) return std::nullopt;
  return quarter(n, key, Quarter{});
}

RankMethod rank_method(const Node& n, const char* key, RankMethod fallback) {
  if (!n.has(key)) return fallback;
  const auto text = n.get<std::string>(key, "");
  try {
    return parse_rank_method(text);
  } catch (const Error&) {
    fail(n.at_path(key), fmt::format("unknown rank method '{}'", text));
  }
}

SolverOptions parse_solver(const Node& n) {
  n.allow({"tolerance", "gradient_tolerance", "max_iterations", "max_outer_iterations"});
  SolverOptions s;
  s.tolerance = n.get("tolerance", s.tolerance);
  s.gradient_tolerance = n.get("gradient_tolerance", s.gradient_tolerance);
  s.max_iterations = n.get("max_iterations", s.max_iterations);
  s.max_outer_iterations = n.get("max_outer_iterations", s.max_outer_iterations);
  if (!(s.tolerance > 0.0) || !(s.gradient_tolerance > 0.0)) fail(n.path(), "tolerances must be positive");
  if (s.max_iterations < 1 || s.max_outer_iterations < 1) fail(n.path(), "iteration limits must be >= 1");
  return s;
}

PenaltySpec parse_penalty(const Node& n) {
  n.allow({"kind", "mu", "alpha", "mu1", "mu2"});
  const auto kind = n.require<std::string>("kind");
  const double mu = n.get("mu", 0.0);
  const double alpha = n.get("alpha", 0.5);
  PenaltySpec p;
  if (kind == "lasso") p = PenaltySpec::lasso(mu);
  else if (kind == "group_lasso") p = PenaltySpec::group_lasso(mu);
  else if (kind == "sparse_group") p = PenaltySpec::sparse_group(mu, alpha);
  else if (kind == "ridge") p = PenaltySpec::ridge(mu);
  else if (kind == "lava") p = PenaltySpec::lava(n.get("mu1", 0.0), n.get("mu2", 0.0), alpha);
  else fail(n.at_path("kind"), fmt::format("unknown penalty kind '{}'", kind));
  try {
    p.validate();
  } catch (const Error& e) {
    fail(n.path(), e.what());
  }
  return p;
}

PanelRole parse_role(const Node& n) {
  n.allow({"panel", "sparse", "dense_factors", "lags", "rank", "fixed_rank", "kmax", "external_factor"});
  PanelRole r;
  r.panel_id = n.require<std::string>("panel");
  r.include_sparse = n.get("sparse", r.include_sparse);
  r.include_dense_factors = n.get("dense_factors", r.include_dense_factors);
  r.lags = n.get("lags", r.lags);
  r.rank_method = rank_method(n, "rank", r.rank_method);
  r.fixed_rank = n.get("fixed_rank", r.fixed_rank);
  if (n.has("kmax")) r.kmax = n.get("kmax", 0);
  if (n.has("external_factor")) r.external_factor = n.get<std::string>("external_factor", "");
  return r;
}

ModelConfig parse_model(const Node& n) {
  n.allow({"name", "kind", "ar_lags", "degree", "panels", "grid", "cv", "solver", "penalty"});
  ModelConfig m;
  const auto kind = n.require<std::string>("kind");
  try {
    m.kind = parse_model_kind(kind);
  } catch (const Error&) {
    fail(n.at_path("kind"), fmt::format("unknown model kind '{}'", kind));
  }
  m.name = n.get<std::string>("name", "");
  m.ar_lags = n.get("ar_lags", m.ar_lags);
  m.degree = n.get("degree", m.degree);
  if (n.has("panels")) {
    const auto& arr = n.raw("panels");
    if (!arr.is_array()) fail(n.at_path("panels"), "expected an array");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      m.panels.push_back(parse_role(Node(arr[i], fmt::format("{}[{}]", n.at_path("panels"), i))));
    }
  }
  if (n.has("grid")) {
    const Node g = n.child("grid");
    g.allow({"points", "ratio", "lava_points", "alphas"});
    m.grid.points = g.get("points", m.grid.points);
    m.grid.ratio = g.get("ratio", m.grid.ratio);
    m.grid.lava_points = g.get("lava_points", m.grid.lava_points);
    m.grid.alphas = g.get("alphas", m.grid.alphas);
  }
  if (n.has("cv")) {
    const Node c = n.child("cv");
    c.allow({"folds"});
    m.cv.folds = c.get("folds", m.cv.folds);
  }
  if (n.has("solver")) m.solver = parse_solver(n.child("solver"));
  if (n.has("penalty")) m.penalty = parse_penalty(n.child("penalty"));
  try {
    m.validate();
  } catch (const Error& e) {
    fail(n.path(), e.what());
  }
  return m;
}

Horizon parse_horizon(const Node& n) {
  n.allow({"label", "month", "monthly_leads", "weekly_leads", "leads"});
  Horizon h;
  h.label = n.require<std::string>("label");
  h.info_month = n.get("month", h.info_month);
  h.monthly_leads = n.get("monthly_leads", h.monthly_leads);
  h.weekly_leads = n.get("weekly_leads", h.weekly_leads);
  h.overrides = n.get("leads", h.overrides);
  return h;
}

HarnessConfig parse_harness(const Node& n) {
  n.allow({"in_sample_end", "first_origin", "last_origin", "horizons", "subsamples", "benchmark",
           "retune_every", "missing", "completion"});
  HarnessConfig h;
  h.in_sample_end = quarter(n, "in_sample_end", h.in_sample_end);
  h.first_origin = quarter(n, "first_origin", h.first_origin);
  h.last_origin = quarter(n, "last_origin", h.last_origin);
  if (n.has("horizons")) {
    h.horizons.clear();
    const auto& arr = n.raw("horizons");
    if (!arr.is_array()) fail(n.at_path("horizons"), "expected an array");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      h.horizons.push_back(parse_horizon(Node(arr[i], fmt::format("{}[{}]", n.at_path("horizons"), i))));
    }
  }
  if (n.has("subsamples")) {
    h.subsamples.clear();
    const auto& arr = n.raw("subsamples");
    if (!arr.is_array()) fail(n.at_path("subsamples"), "expected an array");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const Node s(arr[i], fmt::format("{}[{}]", n.at_path("subsamples"), i));
      s.allow({"label", "first", "last"});
      h.subsamples.push_back({s.require<std::string>("label"), optional_quarter(s, "first"),
                              optional_quarter(s, "last")});
    }
  }
  h.benchmark = n.get<std::string>("benchmark", h.benchmark);
  h.retune_every = n.get("retune_every", h.retune_every);
  const auto missing = n.get<std::string>("missing", "complete");
  if (missing == "complete") h.missing = MissingPolicy::complete;
  else if (missing == "trim") h.missing = MissingPolicy::trim;
  else fail(n.at_path("missing"), fmt::format("expected 'complete' or 'trim', got '{}'", missing));
  if (n.has("completion")) {
    const Node c = n.child("completion");
    c.allow({"max_rank", "lambda", "tolerance", "max_iterations"});
    h.completion.max_rank = c.get("max_rank", h.completion.max_rank);
    if (c.has("lambda")) h.completion.lambda = c.get("lambda", 0.0);
    h.completion.tolerance = c.get("tolerance", h.completion.tolerance);
    h.completion.max_iterations = c.get("max_iterations", h.completion.max_iterations);
  }
  try {
    h.validate();
  } catch (const Error& e) {
    fail(n.path(), e.what());
  }
  return h;
}

FactorsConfig parse_factors(const Node& n) {
  n.allow({"panels", "lags", "leads", "degree", "rank", "fixed_rank", "kmax"});
  FactorsConfig f;
  f.panels = n.get("panels", f.panels);
  f.lags = n.get("lags", f.lags);
  f.leads = n.get("leads", f.leads);
  f.degree = n.get("degree", f.degree);
  f.rank_method = rank_method(n, "rank", f.rank_method);
  f.fixed_rank = n.get("fixed_rank", f.fixed_rank);
  if (n.has("kmax")) f.kmax = n.get("kmax", 0);
  return f;
}

DgpConfig parse_simulate(const Node& n) {
  n.allow({"start", "quarters", "macro_series", "weekly_series", "factors", "sparsity", "dense_scale",
           "sparse_scale", "noise_sd", "intercept", "ar_coefficient", "factor_persistence",
           "idiosyncratic_persistence", "degree", "shift"});
  DgpConfig d;
  d.start = quarter(n, "start", d.start);
  d.quarters = n.get("quarters", d.quarters);
  d.macro_series = n.get("macro_series", d.macro_series);
  d.weekly_series = n.get("weekly_series", d.weekly_series);
  d.factors = n.get("factors", d.factors);
  d.sparsity = n.get("sparsity", d.sparsity);
  d.dense_scale = n.get("dense_scale", d.dense_scale);
  d.sparse_scale = n.get("sparse_scale", d.sparse_scale);
  d.noise_sd = n.get("noise_sd", d.noise_sd);
  d.intercept = n.get("intercept", d.intercept);
  d.ar_coefficient = n.get("ar_coefficient", d.ar_coefficient);
  d.factor_persistence = n.get("factor_persistence", d.factor_persistence);
  d.idiosyncratic_persistence = n.get("idiosyncratic_persistence", d.idiosyncratic_persistence);
  d.degree = n.get("degree", d.degree);
  if (n.has("shift")) {
    const Node s = n.child("shift");
    s.allow({"start", "factor_scale"});
    RegimeShift shift;
    shift.start = quarter(s, "start", shift.start);
    shift.factor_scale = s.get("factor_scale", shift.factor_scale);
    d.shift = shift;
  }
  try {
    d.validate();
  } catch (const Error& e) {
    fail(n.path(), e.what());
  }
  return d;
}

}  // namespace

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::config, fmt::format("cannot open config '{}'", path.string()));
  json root;
  try {
    root = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::config, fmt::format("{}: {}", path.string(), e.what()));
  }
  const Node n(root, "");
  n.allow({"data", "models", "harness", "factors", "simulate", "output", "seed", "log_level"});
  const auto base = path.parent_path();
  auto resolve = [&](const std::string& p) {
    const std::filesystem::path fp(p);
    return fp.is_absolute() ? fp : base / fp;
  };

  RunConfig cfg;
  if (n.has("data")) {
    const Node d = n.child("data");
    d.allow({"panels", "metadata", "target"});
    DataPaths paths;
    for (const auto& p : d.require<std::vector<std::string>>("panels")) paths.panels.push_back(resolve(p));
    paths.metadata = resolve(d.require<std::string>("metadata"));
    paths.target = resolve(d.require<std::string>("target"));
    cfg.data = std::move(paths);
  }
  if (n.has("models")) {
    const auto& arr = n.raw("models");
    if (!arr.is_array()) fail("models", "expected an array");
    std::set<std::string> names;
    for (std::size_t i = 0; i < arr.size(); ++i) {
      auto m = parse_model(Node(arr[i], fmt::format("models[{}]", i)));
      if (!names.insert(m.label()).second) {
        fail(fmt::format("models[{}].name", i), fmt::format("duplicate model name '{}'", m.label()));
      }
      cfg.models.push_back(std::move(m));
    }
  }
  if (n.has("harness")) cfg.harness = parse_harness(n.child("harness"));
  if (n.has("factors")) cfg.factors = parse_factors(n.child("factors"));
  if (n.has("simulate")) cfg.simulate = parse_simulate(n.child("simulate"));
  if (n.has("output")) cfg.output = resolve(n.get<std::string>("output", ""));
  cfg.seed = n.get<std::uint64_t>("seed", cfg.seed);
  cfg.log_level = n.get<std::string>("log_level", cfg.log_level);
  return cfg;
}

}  // namespace spdmidas::cli
