#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace pgki {

// Every failure the pipeline reports maps to exactly one code. The names are
// stable and appear verbatim in CLI error lines.
enum class Errc {
  // feature_store
  MalformedHeader,
  UnsupportedDtype,
  ShapeMismatch,
  TruncatedPayload,
  NonFiniteValue,
  MalformedRecord,
  DuplicateId,
  RowOutOfRange,
  UnknownLabel,
  UnknownSplit,
  // linear_head
  NonFiniteInput,
  LengthMismatch,
  EmptyBatch,
  SingleClassTrainingSet,
  EmptyValidationSet,
  InvalidConfig,
  // prompt_injection
  OutOfRange,
  MissingPrediction,
  DuplicatePrediction,
  // evaluation
  EmptyEvaluation,
  ZeroNormVector,
  DimensionMismatch,
  MissingReference,
  MisalignedEmbeddings,
  // orchestrator
  Timeout,
  TransportError,
  MalformedResponse,
  RateLimited,
  // io
  NotFound,
  IoError,
};

std::string_view to_string(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace pgki
