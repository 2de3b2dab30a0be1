// SPDX-License-Identifier: Apache-2.0
#include "brw/error.hpp"

namespace brw {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::BudgetExceeded: return "BudgetExceeded";
    case ErrorCode::InternalInconsistency: return "InternalInconsistency";
    case ErrorCode::BoundViolated: return "BoundViolated";
    case ErrorCode::DepthTooShallowForLevel: return "DepthTooShallowForLevel";
  }
  return "Unknown";
}

void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

}  // namespace brw
