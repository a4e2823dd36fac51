#pragma once

#include <stdexcept>
#include <string>

namespace scatdeg {

enum class ErrorKind {
  InvalidArgument,
  EvaluationAtSingularity,
  NoVirialRadius,
  ResolutionTooCoarse,
  StepSizeUnderflow,
  EnergyDriftExceeded,
  NotRegularizable,
  NoPericentre,
  LaunchInsideInteractionZone,
  RefinementBudgetExceeded,
  DiscontinuityDetected,
  MeshTooCoarse,
  RootBudgetExceeded,
  SingularJacobian,
  BracketNotFound,
  PrecisionExhausted,
};

const char* to_string(ErrorKind kind);

// All library failures surface as this exception; `kind()` distinguishes them.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

  // Failures of the integration chain (as opposed to bad input).
  bool is_dynamics_failure() const noexcept {
    return kind_ != ErrorKind::InvalidArgument;
  }

 private:
  ErrorKind kind_;
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::EvaluationAtSingularity: return "EvaluationAtSingularity";
    case ErrorKind::NoVirialRadius: return "NoVirialRadius";
    case ErrorKind::ResolutionTooCoarse: return "ResolutionTooCoarse";
    case ErrorKind::StepSizeUnderflow: return "StepSizeUnderflow";
    case ErrorKind::EnergyDriftExceeded: return "EnergyDriftExceeded";
    case ErrorKind::NotRegularizable: return "NotRegularizable";
    case ErrorKind::NoPericentre: return "NoPericentre";
    case ErrorKind::LaunchInsideInteractionZone: return "LaunchInsideInteractionZone";
    case ErrorKind::RefinementBudgetExceeded: return "RefinementBudgetExceeded";
    case ErrorKind::DiscontinuityDetected: return "DiscontinuityDetected";
    case ErrorKind::MeshTooCoarse: return "MeshTooCoarse";
    case ErrorKind::RootBudgetExceeded: return "RootBudgetExceeded";
    case ErrorKind::SingularJacobian: return "SingularJacobian";
    case ErrorKind::BracketNotFound: return "BracketNotFound";
    case ErrorKind::PrecisionExhausted: return "PrecisionExhausted";
  }
  return "Unknown";
}

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

}  // namespace scatdeg
