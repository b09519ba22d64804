#pragma once

#include <stdexcept>
#include <string>

namespace newsrec {

enum class ErrorKind {
  kDimension,
  kConfiguration,
  kDegenerateInput,
  kData,
  kFormat,
  kUsage,
  kDivergence,
  kArtifactMismatch,
  kAlignment,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

#define NEWSREC_DEFINE_ERROR(Name, Kind)                   \
  class Name : public Error {                              \
   public:                                                 \
    explicit Name(const std::string& what)                 \
        : Error(ErrorKind::Kind, what) {}                  \
  };

NEWSREC_DEFINE_ERROR(DimensionError, kDimension)
NEWSREC_DEFINE_ERROR(ConfigError, kConfiguration)
NEWSREC_DEFINE_ERROR(DegenerateInputError, kDegenerateInput)
NEWSREC_DEFINE_ERROR(DataError, kData)
NEWSREC_DEFINE_ERROR(FormatError, kFormat)
NEWSREC_DEFINE_ERROR(UsageError, kUsage)
NEWSREC_DEFINE_ERROR(DivergenceError, kDivergence)
NEWSREC_DEFINE_ERROR(ArtifactMismatchError, kArtifactMismatch)
NEWSREC_DEFINE_ERROR(AlignmentError, kAlignment)

#undef NEWSREC_DEFINE_ERROR

/// Throws an error of the same concrete type with `prefix` prepended.
[[noreturn]] inline void rethrow_with_context(const Error& e, const std::string& prefix) {
  const std::string what = prefix + e.what();
  switch (e.kind()) {
    case ErrorKind::kDimension: throw DimensionError(what);
    case ErrorKind::kConfiguration: throw ConfigError(what);
    case ErrorKind::kDegenerateInput: throw DegenerateInputError(what);
    case ErrorKind::kData: throw DataError(what);
    case ErrorKind::kFormat: throw FormatError(what);
    case ErrorKind::kUsage: throw UsageError(what);
    case ErrorKind::kDivergence: throw DivergenceError(what);
    case ErrorKind::kArtifactMismatch: throw ArtifactMismatchError(what);
    case ErrorKind::kAlignment: throw AlignmentError(what);
  }
  throw Error(e.kind(), what);
}

}  // namespace newsrec
