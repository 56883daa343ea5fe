#pragma once

#include <stdexcept>
#include <string>

namespace hairedit {

enum class ErrorKind {
  kShapeMismatch,
  kInvalidArgument,
  kUnknownStage,
  kIo,
  kDecode,
  kConfig,
  kValidation,
  kUnavailable,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& message);

inline void require(bool condition, ErrorKind kind, const std::string& message) {
  if (!condition) fail(kind, message);
}

}  // namespace hairedit
