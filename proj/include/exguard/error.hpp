// Copyright 2026 The exguard Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace exguard {

enum class ErrorCode {
  parse,
  validation,
  unknown_name,
  depth_too_shallow,
  precondition,
  backend,
  timeout,
  malformed_output,
  no_json,
  schema_mismatch,
  no_strategy,
  unbound_placeholder,
  unknown_template,
  unbalanced_braces,
  lexing,
  segment_outside_unit,
  overlapping_patches,
  mixed_unit,
  key_mismatch,
  io,
  config,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::parse: return "parse";
    case ErrorCode::validation: return "validation";
    case ErrorCode::unknown_name: return "unknown-name";
    case ErrorCode::depth_too_shallow: return "depth-too-shallow";
    case ErrorCode::precondition: return "precondition";
    case ErrorCode::backend: return "backend";
    case ErrorCode::timeout: return "timeout";
    case ErrorCode::malformed_output: return "malformed-output";
    case ErrorCode::no_json: return "no-json-found";
    case ErrorCode::schema_mismatch: return "schema-mismatch";
    case ErrorCode::no_strategy: return "no-strategy";
    case ErrorCode::unbound_placeholder: return "unbound-placeholder";
    case ErrorCode::unknown_template: return "unknown-template";
    case ErrorCode::unbalanced_braces: return "unbalanced-braces";
    case ErrorCode::lexing: return "lexing";
    case ErrorCode::segment_outside_unit: return "segment-outside-unit";
    case ErrorCode::overlapping_patches: return "overlapping-patches";
    case ErrorCode::mixed_unit: return "mixed-unit";
    case ErrorCode::key_mismatch: return "key-mismatch";
    case ErrorCode::io: return "io";
    case ErrorCode::config: return "config";
  }
  return "unknown";
}

/// Every failure raised by the library carries a machine-checkable code so
/// callers (and the CLI exit-code mapping) can dispatch without parsing text.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace exguard
