#include "navp/error.hpp"

namespace navp {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid-argument";
    case ErrorCode::kDimensionTooSmall: return "dimension-too-small";
    case ErrorCode::kMalformedHeader: return "malformed-header";
    case ErrorCode::kTruncatedPayload: return "truncated-payload";
    case ErrorCode::kUnsupportedFormat: return "unsupported-format";
    case ErrorCode::kUnsupportedMaxval: return "unsupported-maxval";
    case ErrorCode::kUnknownCodec: return "unknown-codec";
    case ErrorCode::kCorruptPayload: return "corrupt-payload";
    case ErrorCode::kEmptyWindow: return "empty-window";
    case ErrorCode::kChannelClosed: return "channel-closed";
    case ErrorCode::kBadMagic: return "bad-magic";
    case ErrorCode::kBadVersion: return "bad-version";
    case ErrorCode::kTruncation: return "truncation";
    case ErrorCode::kLengthMismatch: return "length-mismatch";
    case ErrorCode::kUnknownType: return "unknown-type";
    case ErrorCode::kProtocol: return "protocol-error";
    case ErrorCode::kDimensionMismatch: return "dimension-mismatch";
    case ErrorCode::kEmptyRun: return "empty-run";
    case ErrorCode::kUnknownScenario: return "unknown-scenario";
    case ErrorCode::kMismatchedScenarios: return "mismatched-scenarios";
    case ErrorCode::kIo: return "io-error";
  }
  return "unknown";
}

}  // namespace navp
