#pragma once

#include <stdexcept>
#include <string>

namespace pcout {

// Failure category. The CLI maps these onto process exit codes.
enum class ErrorKind {
  input,      // malformed or unreadable data
  numeric,    // degenerate data: zero scale, singular scatter, ...
  config      // invalid parameters
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& step, const std::string& what)
      : std::runtime_error(step.empty() ? what : step + ": " + what),
        kind_(kind),
        step_(step) {}

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& step() const noexcept { return step_; }

 private:
  ErrorKind kind_;
  std::string step_;
};

inline int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::input: return 2;
    case ErrorKind::numeric: return 3;
    case ErrorKind::config: return 4;
  }
  return 1;
}

[[noreturn]] inline void fail_input(const std::string& step, const std::string& what) {
  throw Error(ErrorKind::input, step, what);
}
[[noreturn]] inline void fail_numeric(const std::string& step, const std::string& what) {
  throw Error(ErrorKind::numeric, step, what);
}
[[noreturn]] inline void fail_config(const std::string& step, const std::string& what) {
  throw Error(ErrorKind::config, step, what);
}

} // namespace pcout
