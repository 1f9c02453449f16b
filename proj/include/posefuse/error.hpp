#pragma once

#include <stdexcept>
#include <string>

namespace posefuse {

enum class ErrorKind {
  kInvalidArgument,
  kInvalidInput,
  kParse,
  kFormat,
  kInsufficientData,
  kInsufficientCorrespondences,
  kRegistrationFailure,
  kUnanchoredGraph,
  kGap,
  kNumericalFailure,
  kOptimizationFailure,
  kInvalidSpec,
  kInvalidModel,
  kIo,
};

const char* to_string(ErrorKind kind);

/// Library-wide exception. The kind decides the CLI exit code: numerical
/// kinds map to 2, everything else to 1.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const { return kind_; }
  bool is_numerical() const {
    return kind_ == ErrorKind::kNumericalFailure || kind_ == ErrorKind::kOptimizationFailure;
  }

 private:
  ErrorKind kind_;
};

}  // namespace posefuse
