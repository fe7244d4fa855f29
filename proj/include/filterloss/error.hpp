#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace filterloss {

enum class ErrorKind {
  InvalidArgument,
  ShapeMismatch,
  MissingFile,
  EmptyFile,
  RaggedRow,
  NonNumeric,
  NonFinite,
  Io,
  CorruptFile,
  MissingClass,
  Config,
};

std::string_view to_string(ErrorKind kind);

/// Every failure raised by the library. `kind()` lets callers (and the CLI's
/// exit-code mapping) distinguish failure classes without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message);

  ErrorKind kind() const noexcept { return kind_; }

  /// Same kind, message prefixed with `context: `.
  Error with_context(std::string_view context) const;

 private:
  ErrorKind kind_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& message);

inline void require(bool condition, ErrorKind kind, const std::string& message) {
  if (!condition) fail(kind, message);
}

}  // namespace filterloss
