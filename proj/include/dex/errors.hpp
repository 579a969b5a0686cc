#pragma once

#include <stdexcept>
#include <string>

namespace dex {

// Invalid values or states reachable through correct API use (bad files, bad
// parameters, degenerate inputs). CLI maps these to exit status 1.
class DomainError : public std::runtime_error {
 public:
  explicit DomainError(const std::string& what) : std::runtime_error(what) {}
};

// Malformed input text; carries the 1-based line number.
class ParseError : public DomainError {
 public:
  ParseError(const std::string& what, long line)
      : DomainError(what + " (line " + std::to_string(line) + ")"), line_(line) {}
  long line() const { return line_; }

 private:
  long line_;
};

// A broken internal invariant; reaching this is a bug, not a usage error.
class InternalError : public std::logic_error {
 public:
  explicit InternalError(const std::string& what) : std::logic_error(what) {}
};

}  // namespace dex
