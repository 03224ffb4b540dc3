#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace qpos {

enum class ErrorKind {
  DimensionMismatch,
  NotHermitian,
  NotPositiveDefinite,
  QOutOfRange,
  BasisNotOrthonormal,
  AmbientMismatch,
  NearSingularResolvent,
  EigenvalueOnContour,
  InvalidArgument,
  HypothesisViolated,
  DenominatorNonpositive,
  NoSpectralGap,
  NotProjector,
  CertificateFailed,
  NotPositiveOnV,
  NoCommonDirection,
  LevelNotReached,
  FrameInvalid,
  ZqViolated,
  BoundNotFound,
  VanishingField,
  ZeroRepresentative,
  SchemaError,
};

std::string_view to_string(ErrorKind kind);

// Every failure raised by the library. Numeric failures tied to a sample
// carry its id.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message, std::string point_id = {});

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& point_id() const noexcept { return point_id_; }

 private:
  ErrorKind kind_;
  std::string point_id_;
};

}  // namespace qpos
