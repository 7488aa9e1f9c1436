#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace synaudit {

enum class Errc {
  // artifact model
  DimensionMismatch,
  EmptyQuerySet,
  KindMismatch,
  InvalidPosterior,
  BlackBoxAccess,
  IoError,
  SchemaError,
  // metrics
  IndexOutOfRange,
  EmptySequence,
  UnknownToken,
  UnsupportedMetric,
  // threshold audit
  UnsupportedCombination,
  EmptyFleet,
  FingerprintMismatch,
  MetricMismatch,
  // tuning audit
  BlackBoxMember,
  BlackBoxTarget,
  NonFiniteLoss,
  WidthMismatch,
  // plot audit
  TooFewPoints,
  PerplexityTooLarge,
  EmptyProjection,
  BadRasterShape,
  // testbed
  BadProportion,
  InsufficientData,
  InvalidConfig,
  UnbalancedLabels,
  // cli
  ConfigError,
  MissingArtifact,
};

std::string_view to_string(Errc code) noexcept;

/// Validation errors are caller mistakes (bad input, wrong access level);
/// everything else is a runtime failure. The CLI maps these to exit codes 2 and 3.
bool is_validation_error(Errc code) noexcept;

class AuditError : public std::runtime_error {
 public:
  AuditError(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) { throw AuditError(code, what); }

}  // namespace synaudit
