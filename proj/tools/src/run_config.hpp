#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "spdmidas/evaluation_harness.hpp"
#include "spdmidas/nowcast_models.hpp"

namespace spdmidas::cli {

struct DataPaths {
  std::vector<std::filesystem::path> panels;
  std::filesystem::path metadata;
  std::filesystem::path target;
};

/// Settings of the `factors` command.
struct FactorsConfig {
  /// Panels to process; empty means every panel in the data.
  std::vector<std::string> panels;
  int lags = 1;
  int leads = 0;
  int degree = 3;
  RankMethod rank_method = RankMethod::growth_ratio;
  int fixed_rank = 1;
  std::optional<int> kmax;
};

/// One JSON run file. Relative paths resolve against the file's directory.
struct RunConfig {
  std::optional<DataPaths> data;
  std::vector<ModelConfig> models;
  HarnessConfig harness;
  FactorsConfig factors;
  DgpConfig simulate;
  std::filesystem::path output = "out";
  std::uint64_t seed = 1;
  std::string log_level = "warn";
};

/// Parses and validates a run file. Throws Error{config} naming the offending
/// field as a JSON path (e.g. `models[1].kind`) or the parse position.
RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace spdmidas::cli
