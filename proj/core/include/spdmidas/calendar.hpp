#pragma once

#include <chrono>
#include <compare>
#include <string>
#include <string_view>

namespace spdmidas {

/// Calendar date backed by std::chrono; ordered, hashable through days_since_epoch.
class Date {
 public:
  Date() = default;
  Date(int year, unsigned month, unsigned day);
  explicit Date(std::chrono::sys_days days) : days_(days) {}

  /// Parses ISO-8601 `YYYY-MM-DD`. Throws Error{data} on malformed input.
  static Date parse(std::string_view text);

  std::chrono::year_month_day ymd() const { return std::chrono::year_month_day{days_}; }
  std::chrono::sys_days sys_days() const { return days_; }
  long days_since_epoch() const { return days_.time_since_epoch().count(); }
  int year() const { return static_cast<int>(ymd().year()); }
  unsigned month() const { return static_cast<unsigned>(ymd().month()); }
  unsigned day() const { return static_cast<unsigned>(ymd().day()); }

  Date plus_days(long n) const { return Date{days_ + std::chrono::days{n}}; }

  std::string iso() const;

  friend auto operator<=>(const Date&, const Date&) = default;

 private:
  std::chrono::sys_days days_{};
};

/// Quarterly target period. `index` counts quarters from year 0 so that
/// consecutive quarters differ by one.
struct Quarter {
  int index = 0;

  static Quarter of(int year, int q) { return Quarter{year * 4 + (q - 1)}; }
  static Quarter containing(const Date& date);
  /// Parses `2008Q1` (also accepts `2008-Q1`).
  static Quarter parse(std::string_view text);

  int year() const;
  int q() const;  // 1..4
  Date first_day() const;
  Date last_day() const;
  /// Last calendar day of the n-th month (1..3) of the quarter.
  Date month_end(int month_in_quarter) const;
  std::string label() const;

  Quarter operator+(int n) const { return Quarter{index + n}; }
  Quarter operator-(int n) const { return Quarter{index - n}; }
  int operator-(const Quarter& other) const { return index - other.index; }
  friend auto operator<=>(const Quarter&, const Quarter&) = default;
};

/// Position of a weekly observation inside its quarter. Weeks are counted by the
/// weekday of the observation date: `position` is the ordinal (1-based) of that
/// weekday within the quarter and `weeks_in_quarter` the number of such weekdays
/// (12, 13 or 14).
struct WeekPosition {
  Quarter quarter;
  int position = 0;
  int weeks_in_quarter = 0;
};

WeekPosition week_position(const Date& date);

}  // namespace spdmidas
