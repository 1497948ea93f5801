#pragma once

#include <stdexcept>
#include <string>

namespace xlanchor {

enum class ErrorKind {
  io,          // file missing, unreadable, unwritable
  format,      // malformed file content
  validation,  // bad arguments or violated preconditions
  shape,       // dimension mismatch
  numerical,   // non-convergence, overflow
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] void throw_error(ErrorKind kind, const std::string& what);

inline void require(bool cond, ErrorKind kind, const char* what) {
  if (!cond) throw_error(kind, what);
}

}  // namespace xlanchor
