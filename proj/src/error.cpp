#include "postercrit/error.hpp"

namespace postercrit {

const char* to_string(ErrorCode code) noexcept {
    switch (code) {
    case ErrorCode::Parse: return "parse";
    case ErrorCode::Validation: return "validation";
    case ErrorCode::NotFound: return "not-found";
    case ErrorCode::KindMismatch: return "kind-mismatch";
    case ErrorCode::Generation: return "generation";
    case ErrorCode::Schema: return "schema";
    case ErrorCode::State: return "state";
    case ErrorCode::Backend: return "backend";
    case ErrorCode::Io: return "io";
    }
    return "unknown";
}

} // namespace postercrit
