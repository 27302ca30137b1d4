#pragma once

#include <stdexcept>
#include <string>

namespace bg2phs {

enum class ErrorCode {
  // expression engine
  Syntax,
  UnknownSymbol,
  DivisionByZero,
  DomainError,
  SampleExhausted,
  // matrices
  ShapeMismatch,
  PivotAmbiguity,
  Singular,
  // bond graph validation
  Json,
  DuplicateId,
  UnknownElement,
  SelfLoop,
  Payload,
  NotConnected,
  ExteriorAdjacency,
  Orientation,
  TwoPortArity,
  ModulationSymbol,
  CrossStorageCoupling,
  NonSymmetricResistor,
  RankDeficientModulation,
  // Dirac machinery
  NonOrthogonal,
  DegenerateInterconnection,
  InternalConsistency,
  // explicit representation
  ResistiveSplitting,
  // everything else
  StageUnreachable,
  Simulation,
  InvalidArgument,
  Io,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Domain/division failures while evaluating an expression numerically.
class EvalError : public Error {
 public:
  using Error::Error;
};

}  // namespace bg2phs
