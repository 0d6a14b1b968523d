#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "spdmidas/calendar.hpp"

namespace spdmidas {

enum class Cadence { quarterly, monthly, weekly };

/// Sampling frequency of a series relative to the quarterly target.
/// Weekly data always occupies 13 slots per quarter.
struct Frequency {
  Cadence cadence = Cadence::monthly;

  static Frequency quarterly() { return {Cadence::quarterly}; }
  static Frequency monthly() { return {Cadence::monthly}; }
  static Frequency weekly() { return {Cadence::weekly}; }
  static Frequency parse(std::string_view name);

  int periods_per_target() const;
  std::string_view name() const;

  friend bool operator==(const Frequency&, const Frequency&) = default;
};

/// FRED-MD style transformation code:
/// 1 level, 2 first difference, 3 second difference, 4 log, 5 log first difference,
/// 6 log second difference, 7 first difference of percent change.
class TransformCode {
 public:
  TransformCode() = default;
  explicit TransformCode(int code);
  int value() const { return code_; }
  /// Leading observations consumed by differencing.
  int order() const;

 private:
  int code_ = 1;
};

struct Observation {
  Date date;
  std::optional<double> value;
};

struct RawSeries {
  std::string key;
  std::string panel_id;
  std::vector<Observation> observations;
  Frequency frequency;
  TransformCode tcode;

  /// Throws Error{data} unless timestamps are strictly increasing and at least
  /// two values are present.
  void validate() const;
  std::optional<Date> last_date() const;
};

/// Contiguous run of target quarters.
struct TargetCalendar {
  Quarter first;
  int periods = 0;

  Quarter last() const { return first + (periods - 1); }
  bool contains(Quarter q) const { return q >= first && q <= last(); }
  /// Smallest calendar covering every observation of every series.
  static TargetCalendar covering(const std::vector<RawSeries>& series);
};

/// K series sampled m times per quarter over a quarterly calendar. Missing
/// values are NaN. High-frequency index h = t * m + (j - 1) for quarter offset t
/// and forward slot j in 1..m.
class HighFrequencyPanel {
 public:
  HighFrequencyPanel() = default;
  HighFrequencyPanel(std::string panel_id, std::vector<std::string> keys, Frequency frequency,
                     TargetCalendar calendar);

  const std::string& panel_id() const { return panel_id_; }
  const std::vector<std::string>& keys() const { return keys_; }
  Eigen::Index series_count() const { return values_.rows(); }
  Frequency frequency() const { return frequency_; }
  int m() const { return frequency_.periods_per_target(); }
  const TargetCalendar& calendar() const { return calendar_; }

  /// K x (T*m) matrix of high-frequency values.
  const Eigen::MatrixXd& values() const { return values_; }
  Eigen::MatrixXd& values() { return values_; }

  double value(Eigen::Index k, Quarter t, int slot) const;
  void set(Eigen::Index k, Quarter t, int slot, double v);
  bool is_missing(Eigen::Index k, Quarter t, int slot) const;
  bool has_missing() const;
  Eigen::Index hf_index(Quarter t, int slot) const;

  /// Latest observation date placed in the panel (audit trail for look-ahead checks).
  std::optional<Date> max_date() const { return max_date_; }
  void note_date(const Date& d);

  /// Copy sharing keys and calendar but carrying new values of the same shape.
  HighFrequencyPanel with_values(Eigen::MatrixXd values) const;

 private:
  std::string panel_id_;
  std::vector<std::string> keys_;
  Frequency frequency_;
  TargetCalendar calendar_;
  Eigen::MatrixXd values_;
  std::optional<Date> max_date_;
};

struct TargetSeries {
  Quarter first;
  std::vector<double> values;
  int release_lag = 1;

  Quarter last() const { return first + (static_cast<int>(values.size()) - 1); }
  bool contains(Quarter q) const {
    return !values.empty() && q >= first && q <= last();
  }
  double at(Quarter q) const;
  /// Series truncated to quarters <= last.
  TargetSeries up_to(Quarter last) const;
};

struct Snapshot {
  TargetSeries target;
  std::vector<RawSeries> series;
};

/// Vintage-keyed data snapshots. A store holding a single pseudo snapshot
/// represents final-vintage (pseudo-real-time) data.
class VintageStore {
 public:
  void add(const Date& vintage, Snapshot snapshot);
  /// Single snapshot usable at any date.
  static VintageStore pseudo_real_time(Snapshot snapshot);

  bool pseudo() const { return pseudo_; }
  bool empty() const { return snapshots_.empty(); }
  const std::map<Date, Snapshot>& snapshots() const { return snapshots_; }
  Date earliest() const;

  /// Realized value used for scoring: the first release when vintages are
  /// present, otherwise the final value.
  std::optional<double> realized(Quarter q) const;

 private:
  std::map<Date, Snapshot> snapshots_;
  bool pseudo_ = false;
};

/// Applies the series' transformation code. Leading observations consumed by
/// differencing are dropped; a missing input propagates to every output it feeds.
RawSeries apply_tcode(const RawSeries& series);

/// Places observations at (k, t, j). Weekly quarters with 14 weeks drop the
/// last week; quarters with 12 weeks shift by one slot and repeat the first week
/// into slot 1.
HighFrequencyPanel align_to_target(const std::vector<RawSeries>& series,
                                   const TargetCalendar& calendar,
                                   std::string panel_id = {});

/// Newest snapshot with vintage <= as_of, with every observation dated after
/// as_of removed and target quarters ending after as_of dropped.
Snapshot vintage_slice(const VintageStore& store, const Date& as_of);

/// Trims the panel to the longest run of fully observed quarters ending at
/// `through - 1`; quarter `through` (the partially observed current quarter) is
/// kept as is.
HighFrequencyPanel trim_to_balanced(const HighFrequencyPanel& panel, Quarter through);

}  // namespace spdmidas
