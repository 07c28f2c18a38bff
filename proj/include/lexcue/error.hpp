#pragma once

#include <stdexcept>
#include <string>

namespace lexcue {

/// Base exception for every recoverable failure raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when an LLM provider cannot produce a response after retries.
class ProviderError : public Error {
 public:
  ProviderError(const std::string& what, int status = 0)
      : Error(what), status_(status) {}
  int status() const noexcept { return status_; }

 private:
  int status_;
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw Error(msg);
}

}  // namespace lexcue
