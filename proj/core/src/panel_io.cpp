#include "spdmidas/panel_io.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <fmt/os.h>

#include "spdmidas/error.hpp"

namespace spdmidas {

namespace {

std::string trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return std::string(s);
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    out.push_back(trim(std::string_view(line).substr(start, pos - start)));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

std::optional<double> parse_value(const std::string& cell, const CsvTable& table,
                                  std::size_t line) {
  if (cell.empty() || cell == "NA" || cell == "NaN" || cell == "nan") return std::nullopt;
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (ec != std::errc{} || ptr != cell.data() + cell.size()) {
    throw Error(ErrorKind::data, fmt::format("{}:{}: malformed value '{}'",
                                             table.source.string(), line, cell));
  }
  return v;
}

Date parse_date_at(const std::string& cell, const CsvTable& table, std::size_t line) {
  try {
    return Date::parse(cell);
  } catch (const Error& e) {
    throw Error(ErrorKind::data, fmt::format("{}:{}: {}", table.source.string(), line, e.what()));
  }
}

const Date kAlwaysVisible(1, 1, 1);

struct Record {
  Date vintage;
  std::optional<double> value;
};

// Per key and observation date, every (vintage, value) revision in vintage order.
using History = std::map<std::string, std::map<Date, std::vector<Record>>>;

std::optional<std::optional<double>> as_of(const std::vector<Record>& revisions,
                                           const Date& vintage) {
  std::optional<std::optional<double>> out;
  for (const auto& r : revisions) {
    if (vintage < r.vintage) break;
    out = r.value;
  }
  return out;
}

}  // namespace

int CsvTable::column(std::string_view name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return static_cast<int>(i);
  }
  return -1;
}

int CsvTable::require(std::string_view name) const {
  const int c = column(name);
  if (c < 0) {
    throw Error(ErrorKind::data,
                fmt::format("{}: missing required column '{}'", source.string(), name));
  }
  return c;
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::data, fmt::format("cannot open data file '{}'", path.string()));
  CsvTable table;
  table.source = path;
  std::string line;
  if (!std::getline(in, line)) {
    throw Error(ErrorKind::data, fmt::format("{}: empty file", path.string()));
  }
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);
  table.header = split(line);
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto fields = split(line);
    if (fields.size() != table.header.size()) {
      throw Error(ErrorKind::data, fmt::format("{}:{}: expected {} fields, found {}",
                                               path.string(), line_no, table.header.size(),
                                               fields.size()));
    }
    table.rows.push_back(std::move(fields));
  }
  return table;
}

std::map<std::string, SeriesMetadata> read_metadata(const std::filesystem::path& path) {
  const CsvTable table = read_csv(path);
  const int c_id = table.require("series_id");
  const int c_panel = table.require("panel_id");
  const int c_freq = table.require("frequency");
  const int c_tcode = table.require("tcode");
  std::map<std::string, SeriesMetadata> out;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& row = table.rows[i];
    int code = 0;
    const auto& cell = row[static_cast<std::size_t>(c_tcode)];
    auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), code);
    if (ec != std::errc{} || ptr != cell.data() + cell.size()) {
      throw Error(ErrorKind::data,
                  fmt::format("{}:{}: malformed tcode '{}'", path.string(), i + 2, cell));
    }
    SeriesMetadata meta{row[static_cast<std::size_t>(c_id)],
                        row[static_cast<std::size_t>(c_panel)],
                        Frequency::parse(row[static_cast<std::size_t>(c_freq)]),
                        TransformCode(code)};
    out.emplace(meta.series_id, std::move(meta));
  }
  return out;
}

VintageStore load_vintage_store(const std::vector<std::filesystem::path>& panel_files,
                                const std::filesystem::path& metadata_file,
                                const std::filesystem::path& target_file) {
  const auto metadata = read_metadata(metadata_file);
  History series_history;
  std::map<Date, std::vector<Record>> target_history;
  std::set<Date> vintages;
  bool any_vintage = false;

  for (const auto& file : panel_files) {
    const CsvTable table = read_csv(file);
    const int c_id = table.require("series_id");
    const int c_date = table.require("date");
    const int c_value = table.require("value");
    const int c_vintage = table.column("vintage_date");
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
      const auto& row = table.rows[i];
      const auto& id = row[static_cast<std::size_t>(c_id)];
      if (!metadata.count(id)) {
        throw Error(ErrorKind::data, fmt::format("{}:{}: series '{}' has no metadata entry",
                                                 file.string(), i + 2, id));
      }
      Record rec{kAlwaysVisible, parse_value(row[static_cast<std::size_t>(c_value)], table, i + 2)};
      if (c_vintage >= 0) {
        rec.vintage = parse_date_at(row[static_cast<std::size_t>(c_vintage)], table, i + 2);
        vintages.insert(rec.vintage);
        any_vintage = true;
      }
      const Date date = parse_date_at(row[static_cast<std::size_t>(c_date)], table, i + 2);
      series_history[id][date].push_back(rec);
    }
  }

  {
    const CsvTable table = read_csv(target_file);
    const int c_date = table.require("date");
    const int c_value = table.require("value");
    const int c_vintage = table.column("vintage_date");
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
      const auto& row = table.rows[i];
      Record rec{kAlwaysVisible, parse_value(row[static_cast<std::size_t>(c_value)], table, i + 2)};
      if (c_vintage >= 0) {
        rec.vintage = parse_date_at(row[static_cast<std::size_t>(c_vintage)], table, i + 2);
        vintages.insert(rec.vintage);
        any_vintage = true;
      }
      target_history[parse_date_at(row[static_cast<std::size_t>(c_date)], table, i + 2)]
          .push_back(rec);
    }
  }

  auto by_vintage = [](std::vector<Record>& v) {
    std::stable_sort(v.begin(), v.end(),
                     [](const Record& a, const Record& b) { return a.vintage < b.vintage; });
  };
  for (auto& [id, dates] : series_history) {
    for (auto& [d, recs] : dates) by_vintage(recs);
  }
  for (auto& [d, recs] : target_history) by_vintage(recs);

  auto build = [&](const Date& vintage) {
    Snapshot snap;
    std::map<Quarter, double> target_values;
    for (const auto& [d, recs] : target_history) {
      auto v = as_of(recs, vintage);
      if (v && *v) target_values[Quarter::containing(d)] = **v;
    }
    if (!target_values.empty()) {
      snap.target.first = target_values.begin()->first;
      Quarter expect = snap.target.first;
      for (const auto& [q, v] : target_values) {
        if (q != expect) {
          throw Error(ErrorKind::data,
                      fmt::format("{}: target quarters not contiguous at {}",
                                  target_file.string(), q.label()));
        }
        snap.target.values.push_back(v);
        expect = q + 1;
      }
    }
    for (const auto& [id, dates] : series_history) {
      const auto& meta = metadata.at(id);
      RawSeries s{id, meta.panel_id, {}, meta.frequency, meta.tcode};
      for (const auto& [d, recs] : dates) {
        auto v = as_of(recs, vintage);
        if (v) s.observations.push_back({d, *v});
      }
      if (!s.observations.empty()) snap.series.push_back(std::move(s));
    }
    return snap;
  };

  if (!any_vintage) {
    auto snap = build(kAlwaysVisible);
    for (const auto& s : snap.series) s.validate();
    return VintageStore::pseudo_real_time(std::move(snap));
  }
  VintageStore store;
  for (const auto& v : vintages) store.add(v, build(v));
  return store;
}

void write_panel_csv(const std::filesystem::path& path, const std::vector<RawSeries>& series) {
  auto out = fmt::output_file(path.string());
  out.print("series_id,date,value\n");
  for (const auto& s : series) {
    for (const auto& ob : s.observations) {
      if (ob.value) {
        out.print("{},{},{:.17g}\n", s.key, ob.date.iso(), *ob.value);
      } else {
        out.print("{},{},\n", s.key, ob.date.iso());
      }
    }
  }
}

void write_metadata_csv(const std::filesystem::path& path, const std::vector<RawSeries>& series) {
  auto out = fmt::output_file(path.string());
  out.print("series_id,panel_id,frequency,tcode\n");
  for (const auto& s : series) {
    out.print("{},{},{},{}\n", s.key, s.panel_id, s.frequency.name(), s.tcode.value());
  }
}

void write_target_csv(const std::filesystem::path& path, const TargetSeries& target) {
  auto out = fmt::output_file(path.string());
  out.print("date,value\n");
  for (std::size_t i = 0; i < target.values.size(); ++i) {
    const Quarter q = target.first + static_cast<int>(i);
    out.print("{},{:.17g}\n", q.last_day().iso(), target.values[i]);
  }
}

}  // namespace spdmidas
