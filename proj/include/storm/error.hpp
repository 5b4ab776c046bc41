#pragma once

#include <stdexcept>
#include <string>

namespace storm {

enum class ErrorCode {
  kZeroMass,
  kBadKernel,
  kBadRelation,
  kShapeMismatch,
  kNotConverged,
  kNonFinite,
  kTooLarge,
  kEmptyPairs,
  kOutOfWindow,
  kBadWindow,
  kBadGroupSize,
  kBadConfig,
  kParse,
};

const char* to_string(ErrorCode code);

// Every recoverable failure in the library is reported through this type.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace storm
