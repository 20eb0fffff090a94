#pragma once

#include <stdexcept>
#include <string>

namespace resdmd {

// Every failure the toolkit reports deliberately carries one of these kinds.
// Kinds group into families; the CLI maps each family to a distinct exit code.
enum class ErrorKind {
  // container / format problems
  MalformedHeader,
  DimensionMismatch,
  NonMonotonicTimeAxis,
  // domain / argument problems
  GridMismatch,
  WindowOutOfRange,
  MissingCalendarMonth,
  EmptyMask,
  SizeMismatch,
  EmptyWindow,
  InsufficientSamples,
  InvalidArgument,
  // numeric problems
  RankDeficientData,
  UnpairedEigenvalue,
  TrainingDiverged,
  // filesystem problems
  IoError,
};

enum class ErrorFamily { Format, Domain, Numeric, Io };

constexpr ErrorFamily family_of(ErrorKind k) {
  switch (k) {
    case ErrorKind::MalformedHeader:
    case ErrorKind::DimensionMismatch:
    case ErrorKind::NonMonotonicTimeAxis:
      return ErrorFamily::Format;
    case ErrorKind::RankDeficientData:
    case ErrorKind::UnpairedEigenvalue:
    case ErrorKind::TrainingDiverged:
      return ErrorFamily::Numeric;
    case ErrorKind::IoError:
      return ErrorFamily::Io;
    default:
      return ErrorFamily::Domain;
  }
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const { return kind_; }
  ErrorFamily family() const { return family_of(kind_); }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

}  // namespace resdmd
