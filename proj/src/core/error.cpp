#include "slamhive/error.hpp"

namespace slamhive {

std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::MalformedLine: return "MalformedLine";
    case Errc::NonMonotonicTimestamps: return "NonMonotonicTimestamps";
    case Errc::EmptyTrajectory: return "EmptyTrajectory";
    case Errc::NoMatches: return "NoMatches";
    case Errc::DegenerateGeometry: return "DegenerateGeometry";
    case Errc::TooFewPairs: return "TooFewPairs";
    case Errc::TrajectoryTooShort: return "TrajectoryTooShort";
    case Errc::EmptyItem: return "EmptyItem";
    case Errc::DuplicateValue: return "DuplicateValue";
    case Errc::InvalidSpec: return "InvalidSpec";
    case Errc::ProductTooLarge: return "ProductTooLarge";
    case Errc::DanglingReference: return "DanglingReference";
    case Errc::UnknownDriverValue: return "UnknownDriverValue";
    case Errc::RateAboveSource: return "RateAboveSource";
    case Errc::FactorOutOfRange: return "FactorOutOfRange";
    case Errc::MalformedLog: return "MalformedLog";
    case Errc::MissingDataset: return "MissingDataset";
    case Errc::ResultsDirNotEmpty: return "ResultsDirNotEmpty";
    case Errc::AdapterMissing: return "AdapterMissing";
    case Errc::SandboxSpawnFailure: return "SandboxSpawnFailure";
    case Errc::SandboxGone: return "SandboxGone";
    case Errc::NotFound: return "NotFound";
    case Errc::AlreadyIngested: return "AlreadyIngested";
    case Errc::CorruptResults: return "CorruptResults";
    case Errc::RunNotFinished: return "RunNotFinished";
    case Errc::AlreadyEvaluated: return "AlreadyEvaluated";
    case Errc::UnknownKey: return "UnknownKey";
    case Errc::TypeMismatch: return "TypeMismatch";
    case Errc::MalformedPredicate: return "MalformedPredicate";
    case Errc::EmptyQuery: return "EmptyQuery";
    case Errc::StorageFailure: return "StorageFailure";
    case Errc::UnknownMode: return "UnknownMode";
    case Errc::BadCombinationRule: return "BadCombinationRule";
    case Errc::MalformedSpec: return "MalformedSpec";
    case Errc::EmptySelection: return "EmptySelection";
    case Errc::MixedDatasetTrajectoryComparison: return "MixedDatasetTrajectoryComparison";
    case Errc::MissingSize: return "MissingSize";
    case Errc::InconsistentPlan: return "InconsistentPlan";
    case Errc::ModeViolation: return "ModeViolation";
    case Errc::BindFailure: return "BindFailure";
    case Errc::BadRequest: return "BadRequest";
  }
  return "Unknown";
}

}  // namespace slamhive
