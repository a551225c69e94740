#pragma once

#include <stdexcept>
#include <string>

namespace gsched {

enum class ErrorCode {
  kNoReplicas,
  kBelowInitialBatch,
  kInfeasibleBatch,
  kMissingPgns,
  kInvalidArgument,
  kEmptyInput,
  kUnknownResource,
  kUnknownModel,
  kInfeasibleAllocation,
  kParse,
  kIo,
  kNonTerminating,
  kMissingIsolatedRun,
};

const char* to_string(ErrorCode code);

// Single exception type for the library; the code distinguishes failure
// classes, the message carries context for humans.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace gsched
