#pragma once

#include <stdexcept>
#include <string>

namespace blcm {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define BLCM_DEFINE_ERROR(Name)          \
  class Name : public Error {            \
   public:                               \
    using Error::Error;                  \
  }

BLCM_DEFINE_ERROR(DimensionError);
BLCM_DEFINE_ERROR(PreconditionError);
BLCM_DEFINE_ERROR(ParamError);
BLCM_DEFINE_ERROR(UnsupportedItemKind);
BLCM_DEFINE_ERROR(StructureError);
BLCM_DEFINE_ERROR(SubsetViolation);
BLCM_DEFINE_ERROR(MonotoneViolation);
BLCM_DEFINE_ERROR(SearchError);
BLCM_DEFINE_ERROR(DegenerateInput);
BLCM_DEFINE_ERROR(SchemaError);
BLCM_DEFINE_ERROR(IoError);

#undef BLCM_DEFINE_ERROR

/// Malformed text input; carries the 1-based row/column of the offending cell
/// (0 when the location does not apply).
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t row = 0, std::size_t col = 0)
      : Error(row == 0 ? what
                       : what + " (row " + std::to_string(row) + ", column " +
                             std::to_string(col) + ")"),
        row_(row),
        col_(col) {}

  std::size_t row() const noexcept { return row_; }
  std::size_t col() const noexcept { return col_; }

 private:
  std::size_t row_;
  std::size_t col_;
};

}  // namespace blcm
