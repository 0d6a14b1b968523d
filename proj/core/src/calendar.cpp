#include "spdmidas/calendar.hpp"

#include <charconv>

#include <fmt/format.h>

#include "spdmidas/error.hpp"

namespace spdmidas {

namespace {

int parse_int(std::string_view text, std::string_view whole) {
  int value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw Error(ErrorKind::data, fmt::format("malformed date '{}'", whole));
  }
  return value;
}

int floor_div(int a, int b) { return a >= 0 ? a / b : -((-a + b - 1) / b); }

}  // namespace

Date::Date(int year, unsigned month, unsigned day) {
  std::chrono::year_month_day ymd{std::chrono::year{year}, std::chrono::month{month},
                                  std::chrono::day{day}};
  if (!ymd.ok()) {
    throw Error(ErrorKind::data, fmt::format("invalid date {}-{}-{}", year, month, day));
  }
  days_ = std::chrono::sys_days{ymd};
}

Date Date::parse(std::string_view text) {
  while (!text.empty() && (text.back() == ' ' || text.back() == '\r')) text.remove_suffix(1);
  while (!text.empty() && text.front() == ' ') text.remove_prefix(1);
  if (text.size() != 10 || text[4] != '-' || text[7] != '-') {
    throw Error(ErrorKind::data, fmt::format("malformed date '{}'", text));
  }
  const int y = parse_int(text.substr(0, 4), text);
  const int m = parse_int(text.substr(5, 2), text);
  const int d = parse_int(text.substr(8, 2), text);
  if (m < 1 || m > 12 || d < 1 || d > 31) {
    throw Error(ErrorKind::data, fmt::format("malformed date '{}'", text));
  }
  return Date(y, static_cast<unsigned>(m), static_cast<unsigned>(d));
}

std::string Date::iso() const { return fmt::format("{:04d}-{:02d}-{:02d}", year(), month(), day()); }

Quarter Quarter::containing(const Date& date) {
  return Quarter::of(date.year(), static_cast<int>((date.month() - 1) / 3 + 1));
}

Quarter Quarter::parse(std::string_view text) {
  auto pos = text.find('Q');
  if (pos == std::string_view::npos || pos + 2 != text.size()) {
    throw Error(ErrorKind::config, fmt::format("malformed quarter label '{}'", text));
  }
  auto year_part = text.substr(0, pos);
  if (!year_part.empty() && year_part.back() == '-') year_part.remove_suffix(1);
  int year = 0;
  auto [ptr, ec] = std::from_chars(year_part.data(), year_part.data() + year_part.size(), year);
  const int q = text[pos + 1] - '0';
  if (ec != std::errc{} || ptr != year_part.data() + year_part.size() || q < 1 || q > 4) {
    throw Error(ErrorKind::config, fmt::format("malformed quarter label '{}'", text));
  }
  return Quarter::of(year, q);
}

int Quarter::year() const { return floor_div(index, 4); }
int Quarter::q() const { return index - 4 * year() + 1; }

Date Quarter::first_day() const { return Date(year(), static_cast<unsigned>(3 * (q() - 1) + 1), 1); }

Date Quarter::month_end(int month_in_quarter) const {
  using namespace std::chrono;
  const auto m = static_cast<unsigned>(3 * (q() - 1) + month_in_quarter);
  year_month_day_last last{std::chrono::year{year()}, month_day_last{month{m}}};
  return Date{sys_days{last}};
}

Date Quarter::last_day() const { return month_end(3); }

std::string Quarter::label() const { return fmt::format("{}Q{}", year(), q()); }

WeekPosition week_position(const Date& date) {
  const Quarter quarter = Quarter::containing(date);
  const long first = quarter.first_day().days_since_epoch();
  const long last = quarter.last_day().days_since_epoch();
  const long day = date.days_since_epoch();
  const long first_same_weekday = first + ((day - first) % 7);
  WeekPosition out;
  out.quarter = quarter;
  out.position = static_cast<int>((day - first_same_weekday) / 7) + 1;
  out.weeks_in_quarter = static_cast<int>((last - first_same_weekday) / 7) + 1;
  return out;
}

}  // namespace spdmidas
