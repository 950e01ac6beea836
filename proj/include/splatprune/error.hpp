#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace splatprune {

enum class ErrorKind {
  MalformedHeader,
  TruncatedBody,
  NonFiniteValue,
  UnsupportedEncoding,
  IoFailure,
  LengthMismatch,
  UnsupportedCameraModel,
  MissingCamera,
  ParseError,
  NonOrthonormalRotation,
  NoMasksFound,
  UnpairedMask,
  AllBlackMask,
  DegenerateSelection,
  TooFewPoints,
  EmptyInput,
  InvalidCounts,
  InvalidArgument,
  StageGuard,
};

constexpr std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::MalformedHeader: return "MalformedHeader";
    case ErrorKind::TruncatedBody: return "TruncatedBody";
    case ErrorKind::NonFiniteValue: return "NonFiniteValue";
    case ErrorKind::UnsupportedEncoding: return "UnsupportedEncoding";
    case ErrorKind::IoFailure: return "IoFailure";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::UnsupportedCameraModel: return "UnsupportedCameraModel";
    case ErrorKind::MissingCamera: return "MissingCamera";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::NonOrthonormalRotation: return "NonOrthonormalRotation";
    case ErrorKind::NoMasksFound: return "NoMasksFound";
    case ErrorKind::UnpairedMask: return "UnpairedMask";
    case ErrorKind::AllBlackMask: return "AllBlackMask";
    case ErrorKind::DegenerateSelection: return "DegenerateSelection";
    case ErrorKind::TooFewPoints: return "TooFewPoints";
    case ErrorKind::EmptyInput: return "EmptyInput";
    case ErrorKind::InvalidCounts: return "InvalidCounts";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::StageGuard: return "StageGuard";
  }
  return "Unknown";
}

/// Every failure raised by the library. `kind()` is stable and meant for
/// programmatic dispatch; `what()` carries a one-line human diagnostic.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind), message_(message) {}

  ErrorKind kind() const noexcept { return kind_; }
  /// what() without the kind prefix.
  const std::string& message() const noexcept { return message_; }

 private:
  ErrorKind kind_;
  std::string message_;
};

}  // namespace splatprune
