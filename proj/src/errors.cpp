#include "veinqa/errors.hpp"

namespace veinqa {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::Dimension: return "dimension";
    case ErrorKind::Parse: return "parse";
    case ErrorKind::Validation: return "validation";
    case ErrorKind::NotFound: return "not-found";
    case ErrorKind::Capacity: return "capacity";
    case ErrorKind::DegenerateInput: return "degenerate-input";
    case ErrorKind::EmptySelection: return "empty-selection";
    case ErrorKind::Training: return "training";
    case ErrorKind::IncompatibleModel: return "incompatible-model";
    case ErrorKind::RoiFailure: return "roi-failure";
    case ErrorKind::UndefinedScore: return "undefined-score";
    case ErrorKind::Input: return "input";
    case ErrorKind::Io: return "io";
    case ErrorKind::Usage: return "usage";
  }
  return "unknown";
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(message), kind_(kind) {}

void fail(ErrorKind kind, const std::string& message) { throw Error(kind, message); }

}  // namespace veinqa
