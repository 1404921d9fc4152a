#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace xraydet {

/// Malformed input data (files, records, numeric ranges).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A parse failure tied to a 1-based line of a text file.
class ParseError : public DataError {
 public:
  ParseError(std::size_t line, const std::string& what)
      : DataError("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace xraydet
