#pragma once

#include <stdexcept>
#include <string>

namespace r2s {

/// Base of every error raised by the toolkit. `kind()` is a stable,
/// machine-readable tag used by the CLI error line.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error(message), kind_(std::move(kind)) {}

  const std::string& kind() const noexcept { return kind_; }

  /// Usage errors map to exit code 2, everything else to 1.
  virtual bool is_usage() const noexcept { return false; }

 private:
  std::string kind_;
};

#define R2S_DEFINE_ERROR(Name)                                  \
  class Name : public Error {                                   \
   public:                                                      \
    explicit Name(const std::string& message) : Error(#Name, message) {} \
  }

R2S_DEFINE_ERROR(ParseError);
R2S_DEFINE_ERROR(ValidationError);
R2S_DEFINE_ERROR(FormatError);
R2S_DEFINE_ERROR(TruncationError);
R2S_DEFINE_ERROR(IoError);
R2S_DEFINE_ERROR(UnknownClassError);
R2S_DEFINE_ERROR(DomainError);
R2S_DEFINE_ERROR(DegenerateError);
R2S_DEFINE_ERROR(FrameMismatchError);
R2S_DEFINE_ERROR(SizeError);
R2S_DEFINE_ERROR(ShapeMismatchError);
R2S_DEFINE_ERROR(TooSmallError);
R2S_DEFINE_ERROR(DimMismatchError);
R2S_DEFINE_ERROR(InsufficientSamplesError);
R2S_DEFINE_ERROR(EmptySceneError);
R2S_DEFINE_ERROR(MissingBaselineError);
R2S_DEFINE_ERROR(EmptyInputError);

#undef R2S_DEFINE_ERROR

class UsageError : public Error {
 public:
  explicit UsageError(const std::string& message) : Error("UsageError", message) {}
  bool is_usage() const noexcept override { return true; }
};

}  // namespace r2s
