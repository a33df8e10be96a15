#include "fbipose/error.hpp"

namespace fbipose {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kOk: return "ok";
    case ErrorCode::kInvalidArgument: return "invalid argument";
    case ErrorCode::kDegenerateBone: return "degenerate bone";
    case ErrorCode::kZeroScale: return "zero scale";
    case ErrorCode::kTopologyMismatch: return "topology mismatch";
    case ErrorCode::kCapExceeded: return "cap exceeded";
    case ErrorCode::kNumericFailure: return "numeric failure";
    case ErrorCode::kUndefinedRatio: return "undefined ratio";
    case ErrorCode::kIo: return "i/o error";
    case ErrorCode::kParse: return "parse error";
    case ErrorCode::kSchemaVersion: return "schema version mismatch";
    case ErrorCode::kNotFound: return "not found";
    case ErrorCode::kConflict: return "conflict";
    case ErrorCode::kEmptyDataset: return "empty dataset";
    case ErrorCode::kDivergence: return "divergence";
    case ErrorCode::kPoolExhausted: return "pool exhausted";
    case ErrorCode::kInternal: return "internal error";
  }
  return "unknown";
}

}  // namespace fbipose
