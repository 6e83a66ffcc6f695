#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace sbh {

enum class ErrorCode {
  InvalidArgument,
  NoEvents,
  DegenerateVariance,
  NoPermissiblePairs,
  NoCandidates,
  ParseError,
  SchemaError,
  CalibrationFailure,
  Io,
  Internal,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::NoEvents: return "NoEvents";
    case ErrorCode::DegenerateVariance: return "DegenerateVariance";
    case ErrorCode::NoPermissiblePairs: return "NoPermissiblePairs";
    case ErrorCode::NoCandidates: return "NoCandidates";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::SchemaError: return "SchemaError";
    case ErrorCode::CalibrationFailure: return "CalibrationFailure";
    case ErrorCode::Io: return "Io";
    case ErrorCode::Internal: return "Internal";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Non-fatal condition recorded alongside a result.
struct Warning {
  std::string code;
  std::string message;

  bool operator==(const Warning&) const = default;
};

using Warnings = std::vector<Warning>;

inline void require(bool condition, ErrorCode code, const std::string& message) {
  if (!condition) throw Error(code, message);
}

}  // namespace sbh
