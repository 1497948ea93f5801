#include "xlanchor/error.hpp"

namespace xlanchor {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::io: return "io";
    case ErrorKind::format: return "format";
    case ErrorKind::validation: return "validation";
    case ErrorKind::shape: return "shape";
    case ErrorKind::numerical: return "numerical";
  }
  return "unknown";
}

void throw_error(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

}  // namespace xlanchor
