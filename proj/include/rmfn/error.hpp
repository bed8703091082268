#pragma once

#include <stdexcept>
#include <string>

namespace rmfn {

enum class ErrorCode {
  kInvalidArgument = 1,
  kShape = 2,
  kIo = 3,
  kFormat = 4,
  kNumeric = 5,
  kState = 6,
  kBusy = 7,  // output directory locked by another run
};

// All library failures are reported through this type; the C API maps the
// code onto rmfn_status.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void throw_shape(const std::string& what) { throw Error(ErrorCode::kShape, what); }
[[noreturn]] inline void throw_invalid(const std::string& what) {
  throw Error(ErrorCode::kInvalidArgument, what);
}
[[noreturn]] inline void throw_io(const std::string& what) { throw Error(ErrorCode::kIo, what); }
[[noreturn]] inline void throw_format(const std::string& what) { throw Error(ErrorCode::kFormat, what); }
[[noreturn]] inline void throw_numeric(const std::string& what) { throw Error(ErrorCode::kNumeric, what); }
[[noreturn]] inline void throw_state(const std::string& what) { throw Error(ErrorCode::kState, what); }
[[noreturn]] inline void throw_busy(const std::string& what) { throw Error(ErrorCode::kBusy, what); }

}  // namespace rmfn
