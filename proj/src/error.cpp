#include "gsched/error.hpp"

namespace gsched {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kNoReplicas: return "no replicas";
    case ErrorCode::kBelowInitialBatch: return "below initial batch size";
    case ErrorCode::kInfeasibleBatch: return "infeasible batch";
    case ErrorCode::kMissingPgns: return "missing pgns";
    case ErrorCode::kInvalidArgument: return "invalid argument";
    case ErrorCode::kEmptyInput: return "empty input";
    case ErrorCode::kUnknownResource: return "unknown resource";
    case ErrorCode::kUnknownModel: return "unknown model";
    case ErrorCode::kInfeasibleAllocation: return "infeasible allocation";
    case ErrorCode::kParse: return "parse error";
    case ErrorCode::kIo: return "io error";
    case ErrorCode::kNonTerminating: return "non-terminating run";
    case ErrorCode::kMissingIsolatedRun: return "missing isolated run";
  }
  return "unknown";
}

}  // namespace gsched
