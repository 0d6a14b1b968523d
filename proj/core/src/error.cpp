#include "spdmidas/error.hpp"

namespace spdmidas {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::transform_domain: return "transform-domain";
    case ErrorKind::duplicate_slot: return "duplicate-slot";
    case ErrorKind::no_vintage: return "no-vintage";
    case ErrorKind::domain: return "domain";
    case ErrorKind::ragged_edge: return "ragged-edge";
    case ErrorKind::degenerate_column: return "degenerate-column";
    case ErrorKind::unidentifiable: return "unidentifiable";
    case ErrorKind::convergence: return "convergence";
    case ErrorKind::rank_deficiency: return "rank-deficiency";
    case ErrorKind::degenerate_spectrum: return "degenerate-spectrum";
    case ErrorKind::span: return "span";
    case ErrorKind::config: return "config";
    case ErrorKind::data: return "data";
    case ErrorKind::empty_subsample: return "empty-subsample";
  }
  return "unknown";
}

}  // namespace spdmidas
