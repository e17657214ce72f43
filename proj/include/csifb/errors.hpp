#pragma once

#include <stdexcept>
#include <string>

namespace csifb {

// Data that does not belong together: wrong frame for a model, corrupt
// payload, artifact fingerprints that disagree. CLI exit code 2.
class MismatchError : public std::runtime_error {
 public:
  explicit MismatchError(const std::string& what) : std::runtime_error(what) {}
};

// Numerical failure inside an otherwise valid computation. CLI exit code 3.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

// Gram-Schmidt found a (near-)zero column. Carries the offending column so
// callers can retry with a shorter component prefix.
class RankCollapseError : public NumericalError {
 public:
  RankCollapseError(int column, const std::string& what)
      : NumericalError(what), column_(column) {}
  int column() const { return column_; }

 private:
  int column_;
};

}  // namespace csifb
