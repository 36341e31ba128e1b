#include "obstinate/error.hpp"

namespace obstinate {

const char* errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::EmptyCorpus: return "EmptyCorpus";
    case Errc::EmptySentence: return "EmptySentence";
    case Errc::IdOutOfRange: return "IdOutOfRange";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::LabelOutOfRange: return "LabelOutOfRange";
    case Errc::FormatVersionMismatch: return "FormatVersionMismatch";
    case Errc::VocabFingerprintMismatch: return "VocabFingerprintMismatch";
    case Errc::CorruptFile: return "CorruptFile";
    case Errc::KTooLarge: return "KTooLarge";
    case Errc::InvalidTargets: return "InvalidTargets";
    case Errc::InvalidConfig: return "InvalidConfig";
    case Errc::RemoteUnreachable: return "RemoteUnreachable";
    case Errc::MalformedInput: return "MalformedInput";
    case Errc::IoFailure: return "IoFailure";
  }
  return "Unknown";
}

}  // namespace obstinate
