#pragma once

#include <stdexcept>
#include <string>

namespace wsca {

enum class Err {
  BadMagic,
  VersionUnsupported,
  TruncatedFile,
  DimMismatch,
  WindowTooLarge,
  OffsetTooLarge,
  EmptyGroup,
  SiteOutOfRange,
  RateMismatch,
  NonpositiveWavelength,
  TargetOutOfRange,
  EmptySet,
  UnknownBaseline,
  InsufficientKnowledge,
  BadRange,
  TruthNotInSpace,
  FewerThanTwoSites,
  DegenerateVariance,
  AllZeroBlock,
  SchemaMismatch,
  BadArgument,
};

inline const char* err_name(Err e) {
  switch (e) {
  case Err::BadMagic: return "BadMagic";
  case Err::VersionUnsupported: return "VersionUnsupported";
  case Err::TruncatedFile: return "TruncatedFile";
  case Err::DimMismatch: return "DimMismatch";
  case Err::WindowTooLarge: return "WindowTooLarge";
  case Err::OffsetTooLarge: return "OffsetTooLarge";
  case Err::EmptyGroup: return "EmptyGroup";
  case Err::SiteOutOfRange: return "SiteOutOfRange";
  case Err::RateMismatch: return "RateMismatch";
  case Err::NonpositiveWavelength: return "NonpositiveWavelength";
  case Err::TargetOutOfRange: return "TargetOutOfRange";
  case Err::EmptySet: return "EmptySet";
  case Err::UnknownBaseline: return "UnknownBaseline";
  case Err::InsufficientKnowledge: return "InsufficientKnowledge";
  case Err::BadRange: return "BadRange";
  case Err::TruthNotInSpace: return "TruthNotInSpace";
  case Err::FewerThanTwoSites: return "FewerThanTwoSites";
  case Err::DegenerateVariance: return "DegenerateVariance";
  case Err::AllZeroBlock: return "AllZeroBlock";
  case Err::SchemaMismatch: return "SchemaMismatch";
  case Err::BadArgument: return "BadArgument";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
public:
  Error(Err code, const std::string& what)
      : std::runtime_error(std::string(err_name(code)) + ": " + what), code_(code) {}
  Err code() const { return code_; }

private:
  Err code_;
};

[[noreturn]] inline void fail(Err code, const std::string& what) { throw Error(code, what); }

inline void require(bool cond, Err code, const std::string& what) {
  if (!cond) fail(code, what);
}

} // namespace wsca
