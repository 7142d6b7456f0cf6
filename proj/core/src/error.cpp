#include "fedecg/error.hpp"

namespace fedecg {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid argument";
    case ErrorCode::kShapeMismatch: return "shape mismatch";
    case ErrorCode::kMissingCache: return "missing cache";
    case ErrorCode::kParse: return "parse error";
    case ErrorCode::kEmptyClass: return "empty class";
    case ErrorCode::kUnknownLayer: return "unknown layer";
    case ErrorCode::kBadMagic: return "bad magic";
    case ErrorCode::kUnsupportedVersion: return "unsupported version";
    case ErrorCode::kTruncated: return "truncated payload";
    case ErrorCode::kUnknownMessageType: return "unknown message type";
    case ErrorCode::kMalformed: return "malformed payload";
    case ErrorCode::kProtocol: return "protocol error";
    case ErrorCode::kIo: return "i/o error";
    case ErrorCode::kNumericFailure: return "numeric failure";
  }
  return "unknown error";
}

}  // namespace fedecg
