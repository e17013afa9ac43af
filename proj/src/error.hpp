#pragma once

#include <stdexcept>
#include <string>

namespace fiberpinn {

enum class ErrorKind {
  Invalid,  // precondition or invariant violation
  Parse,    // malformed input file
  Config,   // configuration validation
  Numeric,  // non-finite loss / solver breakdown
  Io,       // unreadable or unwritable path
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

}  // namespace fiberpinn
