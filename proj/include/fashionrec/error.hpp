#pragma once

#include <stdexcept>
#include <string>

namespace fashionrec {

enum class ErrorCode {
  kInput,            // bad argument or unreadable input
  kParse,            // malformed line / payload
  kNotFound,         // unknown id
  kDanglingReference,
  kDuplicateId,
  kDimensionMismatch,
  kZeroNorm,
  kOutOfRange,
  kBackend,          // remote endpoint failure
  kConfig,
  kContract,         // violated precondition that upstream code should have prevented
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Parse failure that keeps the offending text (remote LLM output, a JSONL line).
class ParseError : public Error {
 public:
  ParseError(const std::string& message, std::string raw, std::size_t line = 0)
      : Error(ErrorCode::kParse, message), raw_(std::move(raw)), line_(line) {}

  const std::string& raw() const noexcept { return raw_; }
  // 1-based line number, 0 when not applicable.
  std::size_t line() const noexcept { return line_; }

 private:
  std::string raw_;
  std::size_t line_;
};

}  // namespace fashionrec
