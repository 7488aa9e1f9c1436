#include "synaudit/error.hpp"

namespace synaudit {

std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::EmptyQuerySet: return "EmptyQuerySet";
    case Errc::KindMismatch: return "KindMismatch";
    case Errc::InvalidPosterior: return "InvalidPosterior";
    case Errc::BlackBoxAccess: return "BlackBoxAccess";
    case Errc::IoError: return "IoError";
    case Errc::SchemaError: return "SchemaError";
    case Errc::IndexOutOfRange: return "IndexOutOfRange";
    case Errc::EmptySequence: return "EmptySequence";
    case Errc::UnknownToken: return "UnknownToken";
    case Errc::UnsupportedMetric: return "UnsupportedMetric";
    case Errc::UnsupportedCombination: return "UnsupportedCombination";
    case Errc::EmptyFleet: return "EmptyFleet";
    case Errc::FingerprintMismatch: return "FingerprintMismatch";
    case Errc::MetricMismatch: return "MetricMismatch";
    case Errc::BlackBoxMember: return "BlackBoxMember";
    case Errc::BlackBoxTarget: return "BlackBoxTarget";
    case Errc::NonFiniteLoss: return "NonFiniteLoss";
    case Errc::WidthMismatch: return "WidthMismatch";
    case Errc::TooFewPoints: return "TooFewPoints";
    case Errc::PerplexityTooLarge: return "PerplexityTooLarge";
    case Errc::EmptyProjection: return "EmptyProjection";
    case Errc::BadRasterShape: return "BadRasterShape";
    case Errc::BadProportion: return "BadProportion";
    case Errc::InsufficientData: return "InsufficientData";
    case Errc::InvalidConfig: return "InvalidConfig";
    case Errc::UnbalancedLabels: return "UnbalancedLabels";
    case Errc::ConfigError: return "ConfigError";
    case Errc::MissingArtifact: return "MissingArtifact";
  }
  return "Unknown";
}

bool is_validation_error(Errc code) noexcept {
  switch (code) {
    case Errc::IoError:
    case Errc::NonFiniteLoss:
      return false;
    default:
      return true;
  }
}

}  // namespace synaudit
