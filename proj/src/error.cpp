#include "pgki/error.hpp"

namespace pgki {

std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::MalformedHeader: return "MalformedHeader";
    case Errc::UnsupportedDtype: return "UnsupportedDtype";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::TruncatedPayload: return "TruncatedPayload";
    case Errc::NonFiniteValue: return "NonFiniteValue";
    case Errc::MalformedRecord: return "MalformedRecord";
    case Errc::DuplicateId: return "DuplicateId";
    case Errc::RowOutOfRange: return "RowOutOfRange";
    case Errc::UnknownLabel: return "UnknownLabel";
    case Errc::UnknownSplit: return "UnknownSplit";
    case Errc::NonFiniteInput: return "NonFiniteInput";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::EmptyBatch: return "EmptyBatch";
    case Errc::SingleClassTrainingSet: return "SingleClassTrainingSet";
    case Errc::EmptyValidationSet: return "EmptyValidationSet";
    case Errc::InvalidConfig: return "InvalidConfig";
    case Errc::OutOfRange: return "OutOfRange";
    case Errc::MissingPrediction: return "MissingPrediction";
    case Errc::DuplicatePrediction: return "DuplicatePrediction";
    case Errc::EmptyEvaluation: return "EmptyEvaluation";
    case Errc::ZeroNormVector: return "ZeroNormVector";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::MissingReference: return "MissingReference";
    case Errc::MisalignedEmbeddings: return "MisalignedEmbeddings";
    case Errc::Timeout: return "Timeout";
    case Errc::TransportError: return "TransportError";
    case Errc::MalformedResponse: return "MalformedResponse";
    case Errc::RateLimited: return "RateLimited";
    case Errc::NotFound: return "NotFound";
    case Errc::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace pgki
