#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace slamhive {

using Id = std::int64_t;

enum class Errc {
  // trajectories
  MalformedLine,
  NonMonotonicTimestamps,
  EmptyTrajectory,
  NoMatches,
  DegenerateGeometry,
  TooFewPairs,
  TrajectoryTooShort,
  // configurations
  EmptyItem,
  DuplicateValue,
  InvalidSpec,
  ProductTooLarge,
  DanglingReference,
  UnknownDriverValue,
  // dataset preparation
  RateAboveSource,
  FactorOutOfRange,
  MalformedLog,
  // execution
  MissingDataset,
  ResultsDirNotEmpty,
  AdapterMissing,
  SandboxSpawnFailure,
  SandboxGone,
  // store
  NotFound,
  AlreadyIngested,
  CorruptResults,
  RunNotFinished,
  AlreadyEvaluated,
  UnknownKey,
  TypeMismatch,
  MalformedPredicate,
  EmptyQuery,
  StorageFailure,
  // analysis
  UnknownMode,
  BadCombinationRule,
  MalformedSpec,
  EmptySelection,
  MixedDatasetTrajectoryComparison,
  // scheduler
  MissingSize,
  InconsistentPlan,
  // service
  ModeViolation,
  BindFailure,
  BadRequest,
};

std::string_view to_string(Errc code);

/// Every failure the library reports carries one of the codes above so callers
/// (and the HTTP layer) can branch on the kind without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace slamhive
