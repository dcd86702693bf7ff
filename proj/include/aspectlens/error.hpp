#pragma once

#include <stdexcept>
#include <string>

namespace aspectlens {

// Raised for malformed input files and violated data invariants.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace aspectlens
