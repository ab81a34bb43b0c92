#pragma once

#include <stdexcept>
#include <string>

namespace lut {

// Base of every error thrown by the library. The CLI maps the concrete type
// to a stable name in its diagnostics.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual const char* kind() const noexcept { return "error"; }
};

#define LUT_DEFINE_ERROR(Name, tag)                        \
  class Name : public Error {                              \
   public:                                                 \
    using Error::Error;                                    \
    const char* kind() const noexcept override { return tag; } \
  };

LUT_DEFINE_ERROR(DimensionError, "dimension-error")
LUT_DEFINE_ERROR(ConfigError, "config-error")
LUT_DEFINE_ERROR(UsageError, "usage-error")
LUT_DEFINE_ERROR(NumericError, "numeric-error")
LUT_DEFINE_ERROR(InfeasibleAlignmentError, "infeasible-alignment")
LUT_DEFINE_ERROR(EmptyInputError, "empty-input")
LUT_DEFINE_ERROR(FormatError, "format-error")
LUT_DEFINE_ERROR(HashMismatchError, "hash-mismatch")
LUT_DEFINE_ERROR(UndefinedCorrelationError, "undefined-correlation")
LUT_DEFINE_ERROR(SearchSpaceError, "search-space-too-large")

#undef LUT_DEFINE_ERROR

}  // namespace lut
