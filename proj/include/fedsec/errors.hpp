#pragma once

#include <stdexcept>
#include <string>

namespace fedsec {

// Candidate presented out of arrival order.
class SequencingError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Operation not valid in the current selection state (e.g. stream exhausted).
class StateError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Matrix / parameter-layout dimension mismatch.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Malformed input file or record.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace fedsec
