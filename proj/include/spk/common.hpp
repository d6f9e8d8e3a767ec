#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace spk {

inline constexpr const char* kVersion = "0.1.0";
inline constexpr const char* kSchemaVersion = "1";

// Label index into a dictionary. 0 is reserved for unlabeled/void pixels
// and doubles as the "no part" value in part masks.
using LabelId = std::uint32_t;
inline constexpr LabelId kVoidLabel = 0;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed bytes in one of the raster formats; carries the byte offset
// at which parsing failed.
class FormatError : public Error {
 public:
  FormatError(const std::string& message, std::size_t offset)
      : Error(message + " (byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}

  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

// Violated precondition or inconsistent domain data.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Filesystem-level failure (missing file, short write, ...).
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace spk
