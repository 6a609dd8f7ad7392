#pragma once

#include <stdexcept>
#include <string>

namespace ess {

enum class ErrorCode {
  invalid_argument = 1,
  dimension_mismatch,
  validation,
  io,
  parse,
  solver,
  verification,
  limit,
};

// Library-wide exception; the C API maps `code()` onto ess_status values.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace ess
