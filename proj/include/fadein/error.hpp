#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace fadein {

enum class ErrorCode {
  kInvalidBand,
  kInvalidWindow,
  kDegenerateInput,
  kDomain,
  kInsufficientData,
  kInvalidParameter,
  kShape,
  kNearSingular,
  kLookup,
  kIngestion,
  kValidation,
  kAlignment,
  kIo,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidBand: return "invalid-band";
    case ErrorCode::kInvalidWindow: return "invalid-window";
    case ErrorCode::kDegenerateInput: return "degenerate-input";
    case ErrorCode::kDomain: return "domain";
    case ErrorCode::kInsufficientData: return "insufficient-data";
    case ErrorCode::kInvalidParameter: return "invalid-parameter";
    case ErrorCode::kShape: return "shape";
    case ErrorCode::kNearSingular: return "near-singular";
    case ErrorCode::kLookup: return "lookup";
    case ErrorCode::kIngestion: return "ingestion";
    case ErrorCode::kValidation: return "validation";
    case ErrorCode::kAlignment: return "alignment";
    case ErrorCode::kIo: return "io";
  }
  return "unknown";
}

/// Library-wide exception. Every failure carries a machine-readable code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace fadein
