#pragma once

#include <stdexcept>
#include <string>

namespace navp {

enum class ErrorCode {
  kInvalidArgument,
  kDimensionTooSmall,
  kMalformedHeader,
  kTruncatedPayload,
  kUnsupportedFormat,
  kUnsupportedMaxval,
  kUnknownCodec,
  kCorruptPayload,
  kEmptyWindow,
  kChannelClosed,
  kBadMagic,
  kBadVersion,
  kTruncation,
  kLengthMismatch,
  kUnknownType,
  kProtocol,
  kDimensionMismatch,
  kEmptyRun,
  kUnknownScenario,
  kMismatchedScenarios,
  kIo,
};

const char* to_string(ErrorCode code);

// Single exception type for the library; callers switch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace navp
