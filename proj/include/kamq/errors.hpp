#pragma once

#include <stdexcept>
#include <string>

namespace kamq {

// Exit codes used by the command-line tool. Library errors carry one of these.
enum class ErrorKind : int {
  Config = 2,
  Divisor = 3,
  Coverage = 4,
  Invariant = 5,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const { return kind_; }
  int exit_code() const { return static_cast<int>(kind_); }

 private:
  ErrorKind kind_;
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& w) : Error(ErrorKind::Config, w) {}
};
struct DivisorError : Error {
  explicit DivisorError(const std::string& w) : Error(ErrorKind::Divisor, w) {}
};
struct CoverageError : Error {
  explicit CoverageError(const std::string& w) : Error(ErrorKind::Coverage, w) {}
};
struct InvariantError : Error {
  explicit InvariantError(const std::string& w) : Error(ErrorKind::Invariant, w) {}
};

}  // namespace kamq
