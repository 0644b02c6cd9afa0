#include "bxr/error.hpp"

namespace bxr {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::AxisPoint: return "AxisPoint";
    case ErrorCode::AxisUndefined: return "AxisUndefined";
    case ErrorCode::DegenerateSegment: return "DegenerateSegment";
    case ErrorCode::EmptyFiber: return "EmptyFiber";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::NonFiniteState: return "NonFiniteState";
    case ErrorCode::NonInvertibleProjection: return "NonInvertibleProjection";
    case ErrorCode::InconsistentData: return "InconsistentData";
    case ErrorCode::PreconditionViolated: return "PreconditionViolated";
    case ErrorCode::StepUnderflow: return "StepUnderflow";
    case ErrorCode::SingularBasis: return "SingularBasis";
    case ErrorCode::DivergentChain: return "DivergentChain";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::ParseError: return "ParseError";
  }
  return "Unknown";
}

}  // namespace bxr
