#include "dcorr/core/error.hpp"

namespace dcorr {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::Argument: return "argument";
    case ErrorKind::Data: return "data";
    case ErrorKind::Format: return "format";
    case ErrorKind::Configuration: return "configuration";
    case ErrorKind::Computation: return "computation";
    case ErrorKind::Invariant: return "invariant";
    case ErrorKind::Training: return "training";
  }
  return "unknown";
}

}  // namespace dcorr
