#include "artemis/error.hpp"

namespace artemis {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::Range: return "RANGE";
    case ErrorCode::EncodingContract: return "ENCODING_CONTRACT";
    case ErrorCode::Config: return "CONFIG";
    case ErrorCode::Domain: return "DOMAIN";
    case ErrorCode::Contract: return "CONTRACT";
    case ErrorCode::Schedule: return "SCHEDULE";
    case ErrorCode::Parse: return "PARSE";
    case ErrorCode::Io: return "IO";
  }
  return "UNKNOWN";
}

}  // namespace artemis
