#pragma once

#include <stdexcept>
#include <string>

namespace physgen {

enum class ErrorCode {
  invalid_argument = 1,
  io = 2,
  checksum = 3,
  version = 4,
  solver = 5,
  diverged = 6,
  unsupported = 7,
  internal = 8,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

inline void require(bool cond, const std::string& what) {
  if (!cond) fail(ErrorCode::invalid_argument, what);
}

}  // namespace physgen
