#include "ustat/error.hpp"

namespace ustat {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidMeasure: return "InvalidMeasure";
    case ErrorKind::NotProbability: return "NotProbability";
    case ErrorKind::TooLarge: return "TooLarge";
    case ErrorKind::BadAxis: return "BadAxis";
    case ErrorKind::BadLevel: return "BadLevel";
    case ErrorKind::BadSpec: return "BadSpec";
    case ErrorKind::NotNonnegative: return "NotNonnegative";
    case ErrorKind::HigherLevelsPresent: return "HigherLevelsPresent";
    case ErrorKind::NotADecomposition: return "NotADecomposition";
    case ErrorKind::BadThreshold: return "BadThreshold";
    case ErrorKind::NotCanonical: return "NotCanonical";
    case ErrorKind::Undefined: return "Undefined";
    case ErrorKind::BadCheck: return "BadCheck";
    case ErrorKind::BadInstance: return "BadInstance";
    case ErrorKind::BadConfig: return "BadConfig";
    case ErrorKind::NonFinite: return "NonFinite";
    case ErrorKind::Parse: return "Parse";
  }
  return "Unknown";
}

Error::Error(ErrorKind kind, const std::string& what)
    : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

void raise(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

}  // namespace ustat
