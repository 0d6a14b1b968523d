#include "spdmidas/panel_data.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "spdmidas/error.hpp"

namespace spdmidas {

namespace {

constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

struct Slot {
  Quarter quarter;
  int slot = 0;  // 1-based; 0 = dropped
  bool pad_first = false;
};

Slot slot_of(const Date& date, Frequency frequency) {
  switch (frequency.cadence) {
    case Cadence::quarterly:
      return {Quarter::containing(date), 1, false};
    case Cadence::monthly:
      return {Quarter::containing(date), static_cast<int>((date.month() - 1) % 3) + 1, false};
    case Cadence::weekly: {
      const WeekPosition wp = week_position(date);
      if (wp.weeks_in_quarter <= 12) {
        return {wp.quarter, wp.position + (13 - wp.weeks_in_quarter), wp.position == 1};
      }
      if (wp.position > 13) return {wp.quarter, 0, false};
      return {wp.quarter, wp.position, false};
    }
  }
  return {};
}

}  // namespace

Frequency Frequency::parse(std::string_view name) {
  if (name == "monthly") return monthly();
  if (name == "weekly") return weekly();
  if (name == "quarterly") return quarterly();
  throw Error(ErrorKind::data, fmt::format("unknown frequency '{}'", name));
}

int Frequency::periods_per_target() const {
  switch (cadence) {
    case Cadence::quarterly: return 1;
    case Cadence::monthly: return 3;
    case Cadence::weekly: return 13;
  }
  return 1;
}

std::string_view Frequency::name() const {
  switch (cadence) {
    case Cadence::quarterly: return "quarterly";
    case Cadence::monthly: return "monthly";
    case Cadence::weekly: return "weekly";
  }
  return "unknown";
}

TransformCode::TransformCode(int code) : code_(code) {
  if (code < 1 || code > 7) {
    throw Error(ErrorKind::data, fmt::format("transformation code {} outside 1..7", code));
  }
}

int TransformCode::order() const {
  static constexpr int kOrder[] = {0, 0, 1, 2, 0, 1, 2, 2};
  return kOrder[code_];
}

void RawSeries::validate() const {
  int present = 0;
  for (std::size_t i = 0; i < observations.size(); ++i) {
    if (i > 0 && !(observations[i - 1].date < observations[i].date)) {
      throw Error(ErrorKind::data,
                  fmt::format("series '{}': timestamps not strictly increasing at {}", key,
                              observations[i].date.iso()));
    }
    if (observations[i].value) ++present;
  }
  if (present < 2) {
    throw Error(ErrorKind::data,
                fmt::format("series '{}' has fewer than 2 observed values", key));
  }
}

std::optional<Date> RawSeries::last_date() const {
  if (observations.empty()) return std::nullopt;
  return observations.back().date;
}

TargetCalendar TargetCalendar::covering(const std::vector<RawSeries>& series) {
  std::optional<Quarter> lo, hi;
  for (const auto& s : series) {
    if (s.observations.empty()) continue;
    const Quarter a = Quarter::containing(s.observations.front().date);
    const Quarter b = Quarter::containing(s.observations.back().date);
    lo = lo ? std::min(*lo, a) : a;
    hi = hi ? std::max(*hi, b) : b;
  }
  if (!lo) throw Error(ErrorKind::data, "cannot build a calendar from empty series");
  return {*lo, *hi - *lo + 1};
}

HighFrequencyPanel::HighFrequencyPanel(std::string panel_id, std::vector<std::string> keys,
                                       Frequency frequency, TargetCalendar calendar)
    : panel_id_(std::move(panel_id)),
      keys_(std::move(keys)),
      frequency_(frequency),
      calendar_(calendar),
      values_(Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(keys_.size()),
                                        static_cast<Eigen::Index>(calendar.periods) *
                                            frequency.periods_per_target(),
                                        kMissing)) {}

Eigen::Index HighFrequencyPanel::hf_index(Quarter t, int slot) const {
  return static_cast<Eigen::Index>(t - calendar_.first) * m() + (slot - 1);
}

double HighFrequencyPanel::value(Eigen::Index k, Quarter t, int slot) const {
  const Eigen::Index h = hf_index(t, slot);
  if (h < 0 || h >= values_.cols()) return kMissing;
  return values_(k, h);
}

void HighFrequencyPanel::set(Eigen::Index k, Quarter t, int slot, double v) {
  values_(k, hf_index(t, slot)) = v;
}

bool HighFrequencyPanel::is_missing(Eigen::Index k, Quarter t, int slot) const {
  return std::isnan(value(k, t, slot));
}

bool HighFrequencyPanel::has_missing() const { return values_.hasNaN(); }

void HighFrequencyPanel::note_date(const Date& d) {
  if (!max_date_ || *max_date_ < d) max_date_ = d;
}

HighFrequencyPanel HighFrequencyPanel::with_values(Eigen::MatrixXd values) const {
  if (values.rows() != values_.rows() || values.cols() != values_.cols()) {
    throw Error(ErrorKind::data, "replacement panel values have the wrong shape");
  }
  HighFrequencyPanel out = *this;
  out.values_ = std::move(values);
  return out;
}

double TargetSeries::at(Quarter q) const {
  if (!contains(q)) {
    throw Error(ErrorKind::span, fmt::format("target has no value for {}", q.label()));
  }
  return values[static_cast<std::size_t>(q - first)];
}

TargetSeries TargetSeries::up_to(Quarter last_q) const {
  TargetSeries out{first, {}, release_lag};
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (first + static_cast<int>(i) > last_q) break;
    out.values.push_back(values[i]);
  }
  return out;
}

void VintageStore::add(const Date& vintage, Snapshot snapshot) {
  snapshots_[vintage] = std::move(snapshot);
}

VintageStore VintageStore::pseudo_real_time(Snapshot snapshot) {
  VintageStore store;
  store.snapshots_.emplace(Date(1, 1, 1), std::move(snapshot));
  store.pseudo_ = true;
  return store;
}

Date VintageStore::earliest() const {
  if (snapshots_.empty()) throw Error(ErrorKind::no_vintage, "vintage store is empty");
  return snapshots_.begin()->first;
}

std::optional<double> VintageStore::realized(Quarter q) const {
  if (pseudo_ || snapshots_.size() == 1) {
    const auto& target = snapshots_.begin()->second.target;
    if (target.contains(q)) return target.at(q);
    return std::nullopt;
  }
  for (const auto& [vintage, snap] : snapshots_) {
    if (snap.target.contains(q)) return snap.target.at(q);
  }
  return std::nullopt;
}

RawSeries apply_tcode(const RawSeries& series) {
  const int code = series.tcode.value();
  RawSeries out = series;
  if (code == 1) return out;

  const auto& obs = series.observations;
  if (static_cast<int>(obs.size()) <= series.tcode.order()) {
    throw Error(ErrorKind::data, fmt::format("series '{}' too short for transformation code {}",
                                             series.key, code));
  }
  const bool uses_log = code >= 4 && code <= 6;
  std::vector<std::optional<double>> x(obs.size());
  for (std::size_t i = 0; i < obs.size(); ++i) {
    x[i] = obs[i].value;
    if (uses_log && x[i]) {
      if (*x[i] <= 0.0) {
        throw Error(ErrorKind::transform_domain,
                    fmt::format("series '{}': log of non-positive value {} at {}", series.key,
                                *x[i], obs[i].date.iso()));
      }
      x[i] = std::log(*x[i]);
    }
  }
  auto diff = [](const std::vector<std::optional<double>>& v) {
    std::vector<std::optional<double>> d(v.size() - 1);
    for (std::size_t i = 1; i < v.size(); ++i) {
      if (v[i] && v[i - 1]) d[i - 1] = *v[i] - *v[i - 1];
    }
    return d;
  };
  std::vector<std::optional<double>> y;
  switch (code) {
    case 2: case 5: y = diff(x); break;
    case 3: case 6: y = diff(diff(x)); break;
    case 4: y = x; break;
    case 7: {
      std::vector<std::optional<double>> pct(x.size() - 1);
      for (std::size_t i = 1; i < x.size(); ++i) {
        if (x[i] && x[i - 1] && *x[i - 1] != 0.0) pct[i - 1] = *x[i] / *x[i - 1] - 1.0;
      }
      y = diff(pct);
      break;
    }
    default: break;
  }
  const std::size_t drop = obs.size() - y.size();
  out.observations.clear();
  for (std::size_t i = 0; i < y.size(); ++i) {
    out.observations.push_back({obs[i + drop].date, y[i]});
  }
  return out;
}

HighFrequencyPanel align_to_target(const std::vector<RawSeries>& series,
                                   const TargetCalendar& calendar, std::string panel_id) {
  if (series.empty()) throw Error(ErrorKind::data, "cannot align an empty series list");
  const Frequency frequency = series.front().frequency;
  std::vector<std::string> keys;
  keys.reserve(series.size());
  for (const auto& s : series) {
    if (!(s.frequency == frequency)) {
      throw Error(ErrorKind::data,
                  fmt::format("series '{}' is {} but the panel is {}", s.key, s.frequency.name(),
                              frequency.name()));
    }
    keys.push_back(s.key);
  }
  if (panel_id.empty()) panel_id = series.front().panel_id;
  HighFrequencyPanel panel(std::move(panel_id), std::move(keys), frequency, calendar);
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> filled =
      Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(
          panel.values().rows(), panel.values().cols(), false);

  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto ki = static_cast<Eigen::Index>(k);
    for (const auto& ob : series[k].observations) {
      const Slot slot = slot_of(ob.date, frequency);
      if (slot.slot == 0) continue;
      if (!calendar.contains(slot.quarter)) {
        throw Error(ErrorKind::span,
                    fmt::format("series '{}': observation {} outside calendar {}..{}",
                                series[k].key, ob.date.iso(), calendar.first.label(),
                                calendar.last().label()));
      }
      const Eigen::Index h = panel.hf_index(slot.quarter, slot.slot);
      if (filled(ki, h)) {
        throw Error(ErrorKind::duplicate_slot,
                    fmt::format("series '{}': two observations map to {} slot {}",
                                series[k].key, slot.quarter.label(), slot.slot));
      }
      filled(ki, h) = true;
      panel.note_date(ob.date);
      if (ob.value) panel.values()(ki, h) = *ob.value;
      if (slot.pad_first) {
        const Eigen::Index h1 = panel.hf_index(slot.quarter, 1);
        filled(ki, h1) = true;
        if (ob.value) panel.values()(ki, h1) = *ob.value;
      }
    }
  }
  return panel;
}

Snapshot vintage_slice(const VintageStore& store, const Date& as_of) {
  if (store.empty() || as_of < store.earliest()) {
    throw Error(ErrorKind::no_vintage,
                fmt::format("no vintage on or before {}", as_of.iso()));
  }
  auto it = store.snapshots().upper_bound(as_of);
  --it;
  const Snapshot& snap = it->second;
  Snapshot out;
  out.target = snap.target;
  const Quarter current = Quarter::containing(as_of);
  const Quarter last_complete = as_of == current.last_day() ? current : current - 1;
  out.target = snap.target.up_to(last_complete);
  out.series.reserve(snap.series.size());
  for (const auto& s : snap.series) {
    RawSeries cut = s;
    cut.observations.clear();
    for (const auto& ob : s.observations) {
      if (ob.date <= as_of) cut.observations.push_back(ob);
    }
    out.series.push_back(std::move(cut));
  }
  return out;
}

HighFrequencyPanel trim_to_balanced(const HighFrequencyPanel& panel, Quarter through) {
  const int m = panel.m();
  const auto& cal = panel.calendar();
  Quarter start = cal.first;
  for (Quarter t = through - 1; t >= cal.first; t = t - 1) {
    bool complete = true;
    for (int j = 1; j <= m && complete; ++j) {
      for (Eigen::Index k = 0; k < panel.series_count(); ++k) {
        if (panel.is_missing(k, t, j)) {
          complete = false;
          break;
        }
      }
    }
    if (!complete) {
      start = t + 1;
      break;
    }
  }
  if (start >= through) {
    throw Error(ErrorKind::span,
                fmt::format("panel '{}' has no fully observed quarter before {}", panel.panel_id(),
                            through.label()));
  }
  TargetCalendar trimmed{start, through - start + 1};
  HighFrequencyPanel out(panel.panel_id(), panel.keys(), panel.frequency(), trimmed);
  const Eigen::Index offset = panel.hf_index(start, 1);
  const Eigen::Index width = std::min<Eigen::Index>(out.values().cols(),
                                                    panel.values().cols() - offset);
  out.values().leftCols(width) = panel.values().middleCols(offset, width);
  if (panel.max_date()) out.note_date(*panel.max_date());
  return out;
}

}  // namespace spdmidas
