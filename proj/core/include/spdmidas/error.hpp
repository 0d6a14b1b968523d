#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace spdmidas {

enum class ErrorKind {
  transform_domain,
  duplicate_slot,
  no_vintage,
  domain,
  ragged_edge,
  degenerate_column,
  unidentifiable,
  convergence,
  rank_deficiency,
  degenerate_spectrum,
  span,
  config,
  data,
  empty_subsample,
};

std::string_view to_string(ErrorKind kind);

/// Base error for every failure raised by the library. The kind lets callers
/// (the CLI in particular) map failures onto exit codes without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace spdmidas
