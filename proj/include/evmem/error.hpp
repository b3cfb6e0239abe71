#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace evmem {

enum class ErrorCode {
  validation,
  transport,
  dangling_endpoint,
  unknown_id,
  dimension_mismatch,
  zero_vector,
  parse,
  scripted_miss,
  unknown_template,
  unbound_placeholder,
  snapshot,
  version_mismatch,
  planning,
  precondition,
  batch_failed,
  config,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::validation: return "validation";
    case ErrorCode::transport: return "transport";
    case ErrorCode::dangling_endpoint: return "dangling_endpoint";
    case ErrorCode::unknown_id: return "unknown_id";
    case ErrorCode::dimension_mismatch: return "dimension_mismatch";
    case ErrorCode::zero_vector: return "zero_vector";
    case ErrorCode::parse: return "parse";
    case ErrorCode::scripted_miss: return "scripted_miss";
    case ErrorCode::unknown_template: return "unknown_template";
    case ErrorCode::unbound_placeholder: return "unbound_placeholder";
    case ErrorCode::snapshot: return "snapshot";
    case ErrorCode::version_mismatch: return "version_mismatch";
    case ErrorCode::planning: return "planning";
    case ErrorCode::precondition: return "precondition";
    case ErrorCode::batch_failed: return "batch_failed";
    case ErrorCode::config: return "config";
  }
  return "unknown";
}

/// Every failure the engine reports is an `Error` carrying a machine-checkable code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Network or provider failure. `status()` is the HTTP status, 0 when no response arrived.
class TransportError : public Error {
 public:
  TransportError(int status, const std::string& message)
      : Error(ErrorCode::transport, message + (status ? " (HTTP " + std::to_string(status) + ")" : "")),
        status_(status) {}

  int status() const noexcept { return status_; }

 private:
  int status_;
};

}  // namespace evmem
