#include "ifqa/errors.hpp"

namespace ifqa {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::Config: return "config";
    case ErrorKind::Parameter: return "parameter";
    case ErrorKind::Domain: return "domain";
    case ErrorKind::Shape: return "shape";
    case ErrorKind::Validation: return "validation";
    case ErrorKind::Conflict: return "conflict";
    case ErrorKind::NotFound: return "not_found";
    case ErrorKind::UnsupportedHead: return "unsupported_head";
    case ErrorKind::EmptyScope: return "empty_scope";
    case ErrorKind::UndefinedCorrelation: return "undefined_correlation";
    case ErrorKind::Io: return "io";
    case ErrorKind::Load: return "load";
    case ErrorKind::NonFinite: return "non_finite";
  }
  return "unknown";
}

bool Error::is_validation() const noexcept {
  switch (kind_) {
    case ErrorKind::Config:
    case ErrorKind::Parameter:
    case ErrorKind::Domain:
    case ErrorKind::Shape:
    case ErrorKind::Validation:
    case ErrorKind::Conflict:
    case ErrorKind::NotFound:
    case ErrorKind::UnsupportedHead:
    case ErrorKind::EmptyScope:
      return true;
    default:
      return false;
  }
}

}  // namespace ifqa
