#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace veinqa {

enum class ErrorKind {
  Dimension,
  Parse,
  Validation,
  NotFound,
  Capacity,
  DegenerateInput,
  EmptySelection,
  Training,
  IncompatibleModel,
  RoiFailure,
  UndefinedScore,
  Input,
  Io,
  Usage,
};

std::string_view to_string(ErrorKind kind) noexcept;

/// Base exception for every failure raised by the library. The kind is the
/// machine-readable part; what() carries the human-readable context.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message);

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& message);

}  // namespace veinqa
