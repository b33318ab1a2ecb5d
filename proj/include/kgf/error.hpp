#pragma once

#include <stdexcept>
#include <string>

namespace kgf {

enum class ErrorKind {
  EmptyGraph,
  MalformedTriple,
  IdOutOfRange,
  FileNotFound,
  MalformedRow,
  CorruptDataset,
  DimensionMismatch,
  NumericalFault,
  EmptyBatch,
  EmptyEvaluation,
  InsufficientNegatives,
  DegenerateLabels,
  InsufficientData,
  UnsupportedDimension,
  InvalidConfig,
  Io,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::EmptyGraph: return "EmptyGraph";
    case ErrorKind::MalformedTriple: return "MalformedTriple";
    case ErrorKind::IdOutOfRange: return "IdOutOfRange";
    case ErrorKind::FileNotFound: return "FileNotFound";
    case ErrorKind::MalformedRow: return "MalformedRow";
    case ErrorKind::CorruptDataset: return "CorruptDataset";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::NumericalFault: return "NumericalFault";
    case ErrorKind::EmptyBatch: return "EmptyBatch";
    case ErrorKind::EmptyEvaluation: return "EmptyEvaluation";
    case ErrorKind::InsufficientNegatives: return "InsufficientNegatives";
    case ErrorKind::DegenerateLabels: return "DegenerateLabels";
    case ErrorKind::InsufficientData: return "InsufficientData";
    case ErrorKind::UnsupportedDimension: return "UnsupportedDimension";
    case ErrorKind::InvalidConfig: return "InvalidConfig";
    case ErrorKind::Io: return "Io";
  }
  return "Unknown";
}

/// Every failure raised by the library carries a machine-checkable kind.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace kgf
