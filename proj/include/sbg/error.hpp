#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace sbg {

// Error with a stable machine-parsable code. The CLI prints errors as a
// single line "error: <CODE>: <message>" and exits nonzero.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(code + ": " + message), code_(std::move(code)) {}

  const std::string& code() const { return code_; }

 private:
  std::string code_;
};

[[noreturn]] inline void fail(std::string code, const std::string& message) {
  throw Error(std::move(code), message);
}

}  // namespace sbg
