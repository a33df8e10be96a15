#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace fbipose {

// Numeric values are part of the C API (fbi_status) and must not be reordered.
enum class ErrorCode : int {
  kOk = 0,
  kInvalidArgument = 1,
  kDegenerateBone = 2,
  kZeroScale = 3,
  kTopologyMismatch = 4,
  kCapExceeded = 5,
  kNumericFailure = 6,
  kUndefinedRatio = 7,
  kIo = 8,
  kParse = 9,
  kSchemaVersion = 10,
  kNotFound = 11,
  kConflict = 12,
  kEmptyDataset = 13,
  kDivergence = 14,
  kPoolExhausted = 15,
  kInternal = 16,
};

std::string_view to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace fbipose
