#pragma once

#include <stdexcept>
#include <string>

namespace roadrank {

/// Broad failure categories. The CLI maps each one to its own exit code.
enum class ErrorKind {
  kUsage,         // bad flag or argument value
  kMissingInput,  // file absent or unreadable
  kInvalidInput,  // malformed file or violated data invariant
  kNumerical,     // divergence, non-convergence
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline Error invalid_input(const std::string& what) {
  return Error(ErrorKind::kInvalidInput, what);
}

inline Error missing_input(const std::string& what) {
  return Error(ErrorKind::kMissingInput, what);
}

inline Error usage_error(const std::string& what) {
  return Error(ErrorKind::kUsage, what);
}

inline Error numerical_error(const std::string& what) {
  return Error(ErrorKind::kNumerical, what);
}

}  // namespace roadrank
