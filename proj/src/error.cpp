#include "berknash/error.hpp"

namespace berknash {

const char* category_name(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::kValidation: return "validation";
    case ErrorCategory::kReducibleChain: return "reducible-chain";
    case ErrorCategory::kAbsoluteContinuity: return "absolute-continuity";
    case ErrorCategory::kConvergence: return "convergence";
    case ErrorCategory::kLpInfeasible: return "lp-infeasible";
    case ErrorCategory::kLpUnbounded: return "lp-unbounded";
    case ErrorCategory::kConfig: return "config";
    case ErrorCategory::kIo: return "io";
  }
  return "unknown";
}

ReducibleChainError::ReducibleChainError(int from, int to)
    : Error(ErrorCategory::kReducibleChain,
            "reducible chain: state " + std::to_string(to) + " is not reachable from state " +
                std::to_string(from)),
      from_(from),
      to_(to) {}

}  // namespace berknash
