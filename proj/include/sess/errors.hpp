#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace sess {

/// Root of every error thrown by the library. `category()` gives a stable
/// short tag used by the CLI for exit-code mapping and diagnostics.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual const char* category() const noexcept { return "Error"; }
};

#define SESS_DECLARE_ERROR(Name, Base)                                  \
  class Name : public Base {                                            \
   public:                                                              \
    using Base::Base;                                                   \
    const char* category() const noexcept override { return #Name; }   \
  }

// Caller supplied something out of contract (sizes, ranges, parameters).
SESS_DECLARE_ERROR(InvalidArgument, Error);
SESS_DECLARE_ERROR(FileNotFound, Error);
SESS_DECLARE_ERROR(ImageDecodeError, Error);
SESS_DECLARE_ERROR(ShapeMismatch, Error);

// Model loading and inference.
SESS_DECLARE_ERROR(ModelError, Error);
SESS_DECLARE_ERROR(UnsupportedModel, ModelError);
SESS_DECLARE_ERROR(InvalidModelFile, ModelError);
SESS_DECLARE_ERROR(MissingMetadata, ModelError);
SESS_DECLARE_ERROR(InferenceError, ModelError);

// Third-party saliency adapters.
SESS_DECLARE_ERROR(ExternalMethodFailed, Error);
SESS_DECLARE_ERROR(NonFiniteOutput, Error);

// Broken internal invariant, e.g. a negative channel weight in softmax mode.
SESS_DECLARE_ERROR(InternalConsistencyError, Error);

#undef SESS_DECLARE_ERROR

// A per-patch failure, annotated with the patch provenance. Keeps the
// category of the underlying error so callers can still classify it.
class PatchError : public Error {
 public:
  PatchError(const std::string& what, std::string cause_category)
      : Error(what), cause_category_(std::move(cause_category)) {}
  const char* category() const noexcept override { return "PatchError"; }
  const std::string& cause_category() const noexcept { return cause_category_; }

 private:
  std::string cause_category_;
};

}  // namespace sess
