#include "filterloss/error.hpp"

namespace filterloss {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "invalid argument";
    case ErrorKind::ShapeMismatch: return "shape mismatch";
    case ErrorKind::MissingFile: return "missing file";
    case ErrorKind::EmptyFile: return "empty file";
    case ErrorKind::RaggedRow: return "ragged row";
    case ErrorKind::NonNumeric: return "non-numeric field";
    case ErrorKind::NonFinite: return "non-finite value";
    case ErrorKind::Io: return "i/o failure";
    case ErrorKind::CorruptFile: return "corrupt file";
    case ErrorKind::MissingClass: return "missing class";
    case ErrorKind::Config: return "config error";
  }
  return "unknown";
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(message), kind_(kind) {}

Error Error::with_context(std::string_view context) const {
  return Error(kind_, std::string(context) + ": " + what());
}

void fail(ErrorKind kind, const std::string& message) { throw Error(kind, message); }

}  // namespace filterloss
