#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace rpl {

enum class Errc {
  DimensionMismatch,
  NotPositiveDefinite,
  NonFiniteState,
  NotFullColumnRank,
  UnstableReference,
  InvalidConstants,
  MissingGamma,
  StreamTooShort,
  InconsistentData,
  ParseError,
  ValidationError,
};

constexpr std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::NotPositiveDefinite: return "NotPositiveDefinite";
    case Errc::NonFiniteState: return "NonFiniteState";
    case Errc::NotFullColumnRank: return "NotFullColumnRank";
    case Errc::UnstableReference: return "UnstableReference";
    case Errc::InvalidConstants: return "InvalidConstants";
    case Errc::MissingGamma: return "MissingGamma";
    case Errc::StreamTooShort: return "StreamTooShort";
    case Errc::InconsistentData: return "InconsistentData";
    case Errc::ParseError: return "ParseError";
    case Errc::ValidationError: return "ValidationError";
  }
  return "Unknown";
}

/// Every failure in the library is reported as an Error carrying a code.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace rpl
