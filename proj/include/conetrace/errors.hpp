#pragma once

#include <stdexcept>
#include <string>

namespace conetrace {

enum class ErrorCode {
  SyntaxError,
  NonConvexFace,
  DanglingEdge,
  UnknownBuiltin,
  NoConePoints,
  ConeHit,
  EventBudgetExceeded,
  InvalidScatter,
  NotALoop,
  OutOfWindow,
  ChartMismatch,
  ExceedsRadius,
  ConeOnRay,
  NoBracket,
  NullHomotopic,
  NoConvergence,
  NotConeFree,
  BudgetExhausted,
  EmptyCell,
  InvalidArgument,
};

inline const char* to_string(ErrorCode c) {
  switch (c) {
    case ErrorCode::SyntaxError: return "SyntaxError";
    case ErrorCode::NonConvexFace: return "NonConvexFace";
    case ErrorCode::DanglingEdge: return "DanglingEdge";
    case ErrorCode::UnknownBuiltin: return "UnknownBuiltin";
    case ErrorCode::NoConePoints: return "NoConePoints";
    case ErrorCode::ConeHit: return "ConeHitError";
    case ErrorCode::EventBudgetExceeded: return "EventBudgetExceeded";
    case ErrorCode::InvalidScatter: return "InvalidScatter";
    case ErrorCode::NotALoop: return "NotALoop";
    case ErrorCode::OutOfWindow: return "OutOfWindow";
    case ErrorCode::ChartMismatch: return "ChartMismatch";
    case ErrorCode::ExceedsRadius: return "ExceedsRadius";
    case ErrorCode::ConeOnRay: return "ConeOnRay";
    case ErrorCode::NoBracket: return "NoBracket";
    case ErrorCode::NullHomotopic: return "NullHomotopic";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::NotConeFree: return "NotConeFree";
    case ErrorCode::BudgetExhausted: return "BudgetExhausted";
    case ErrorCode::EmptyCell: return "EmptyCell";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

/// All library failures carry a machine-readable code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

class SyntaxError : public Error {
 public:
  SyntaxError(int line, const std::string& what)
      : Error(ErrorCode::SyntaxError, "line " + std::to_string(line) + ": " + what), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

}  // namespace conetrace
