#pragma once

#include <stdexcept>
#include <string>

namespace ctxnorm {

// Domain error carrying a stable machine-readable code ("shape-mismatch",
// "empty-selection", ...) next to the human-readable message.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& what)
      : std::runtime_error(what), code_(std::move(code)) {}

  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

[[noreturn]] inline void fail(std::string code, const std::string& what) {
  throw Error(std::move(code), what);
}

}  // namespace ctxnorm
