#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace sewkit {

// Every failure carries a short machine-readable code next to the message.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}

  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

struct Violation {
  std::string code;
  std::string detail;
};

// Thrown when input data breaks a documented invariant. The CLI maps this to
// exit status 2 and the service to HTTP 400.
class ValidationError : public Error {
 public:
  explicit ValidationError(std::vector<Violation> violations)
      : Error(violations.empty() ? "invalid" : violations.front().code,
              describe(violations)),
        violations_(std::move(violations)) {}

  const std::vector<Violation>& violations() const noexcept { return violations_; }

 private:
  static std::string describe(const std::vector<Violation>& v) {
    std::string out = "validation failed:";
    for (const auto& x : v) {
      out += " [" + x.code + "] " + x.detail + ";";
    }
    return out;
  }

  std::vector<Violation> violations_;
};

}  // namespace sewkit
