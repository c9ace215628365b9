#pragma once

#include <stdexcept>
#include <string>

namespace procwass {

enum class Errc {
  NonFinite,
  NotPSD,
  DimensionMismatch,
  SingularCovariance,
  InfeasibleWeights,
  NotConverged,
  NumericalOverflow,
  Parse,
  InvalidArgument,
};

inline const char* to_string(Errc code) {
  switch (code) {
    case Errc::NonFinite: return "NonFinite";
    case Errc::NotPSD: return "NotPSD";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::SingularCovariance: return "SingularCovariance";
    case Errc::InfeasibleWeights: return "InfeasibleWeights";
    case Errc::NotConverged: return "NotConverged";
    case Errc::NumericalOverflow: return "NumericalOverflow";
    case Errc::Parse: return "Parse";
    case Errc::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

/// Single exception type for the library; `code()` tells callers what went wrong.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

inline void require_same_dim(long a, long b, const char* where) {
  if (a != b) {
    throw Error(Errc::DimensionMismatch, std::string(where) + ": " + std::to_string(a) +
                                             " vs " + std::to_string(b));
  }
}

}  // namespace procwass
