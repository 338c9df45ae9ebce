#pragma once

#include <stdexcept>
#include <string>

namespace causalslab {

enum class ErrorCode {
  InvalidArgument = 1,
  NotPositiveDefinite,
  DegenerateData,
  NumericalDegeneracy,
  WeakInstrument,
  InsufficientSamples,
  SamplerConfiguration,
  SamplerMaxIterations,
  Io,
};

/// Base exception for all library failures; carries a stable code that the
/// C API forwards to callers.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "invalid argument";
    case ErrorCode::NotPositiveDefinite: return "matrix not positive definite";
    case ErrorCode::DegenerateData: return "degenerate data";
    case ErrorCode::NumericalDegeneracy: return "numerical degeneracy";
    case ErrorCode::WeakInstrument: return "weak instrument";
    case ErrorCode::InsufficientSamples: return "insufficient samples";
    case ErrorCode::SamplerConfiguration: return "sampler configuration";
    case ErrorCode::SamplerMaxIterations: return "sampler exceeded max iterations";
    case ErrorCode::Io: return "i/o error";
  }
  return "unknown error";
}

}  // namespace causalslab
