#pragma once

#include <stdexcept>
#include <string>

namespace gpground {

enum class ErrorKind {
  Io,
  MalformedInput,
  InvalidArgument,
  Domain,
  EmptyGrid,
  InsufficientData,
  AmbiguousOrientation,
  IllConditioned,
  LengthMismatch,
  UnknownSegment,
  MissingTruth,
  Config,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Io: return "io";
    case ErrorKind::MalformedInput: return "malformed-input";
    case ErrorKind::InvalidArgument: return "invalid-argument";
    case ErrorKind::Domain: return "domain";
    case ErrorKind::EmptyGrid: return "empty-grid";
    case ErrorKind::InsufficientData: return "insufficient-data";
    case ErrorKind::AmbiguousOrientation: return "ambiguous-orientation";
    case ErrorKind::IllConditioned: return "ill-conditioned";
    case ErrorKind::LengthMismatch: return "length-mismatch";
    case ErrorKind::UnknownSegment: return "unknown-segment";
    case ErrorKind::MissingTruth: return "missing-truth";
    case ErrorKind::Config: return "config";
  }
  return "unknown";
}

/// Single exception type for the library; `kind()` lets callers branch
/// without string matching (the CLI maps kinds onto exit codes).
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace gpground
