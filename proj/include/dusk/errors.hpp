#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dusk {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ShapeError : Error { using Error::Error; };
struct ArgumentError : Error { using Error::Error; };
struct RankError : Error { using Error::Error; };
struct DegenerateInputError : Error { using Error::Error; };
struct NumericalError : Error { using Error::Error; };

// File-format errors carry the byte offset where parsing stopped.
struct ParseError : Error {
  ParseError(const std::string& msg, std::size_t byte_offset)
      : Error(msg + " (byte offset " + std::to_string(byte_offset) + ")"),
        offset(byte_offset) {}
  std::size_t offset;
};

struct MagicError : ParseError { using ParseError::ParseError; };
struct TruncationError : ParseError { using ParseError::ParseError; };
struct LabelError : ParseError { using ParseError::ParseError; };
struct ValueError : ParseError { using ParseError::ParseError; };

}  // namespace dusk
