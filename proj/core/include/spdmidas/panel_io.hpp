#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "spdmidas/panel_data.hpp"

namespace spdmidas {

/// Header plus rows of a comma-separated file. Fields are trimmed; quoting is
/// not supported because none of the ingestion schemas need it.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::filesystem::path source;

  /// Column index for `name`, or -1 when absent.
  int column(std::string_view name) const;
  /// Like column() but throws Error{data} naming the file when absent.
  int require(std::string_view name) const;
};

CsvTable read_csv(const std::filesystem::path& path);

struct SeriesMetadata {
  std::string series_id;
  std::string panel_id;
  Frequency frequency;
  TransformCode tcode;
};

std::map<std::string, SeriesMetadata> read_metadata(const std::filesystem::path& path);

/// Builds a vintage store from long-format panel and target files
/// (`series_id,date,value[,vintage_date]` and `date,value[,vintage_date]`).
/// Without any vintage column the result is a single pseudo-real-time snapshot.
/// Series missing from the metadata raise Error{data}.
VintageStore load_vintage_store(const std::vector<std::filesystem::path>& panel_files,
                                const std::filesystem::path& metadata_file,
                                const std::filesystem::path& target_file);

void write_panel_csv(const std::filesystem::path& path, const std::vector<RawSeries>& series);
void write_metadata_csv(const std::filesystem::path& path, const std::vector<RawSeries>& series);
void write_target_csv(const std::filesystem::path& path, const TargetSeries& target);

}  // namespace spdmidas
