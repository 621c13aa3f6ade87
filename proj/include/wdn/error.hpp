#pragma once

#include <stdexcept>
#include <string>

namespace wdn {

/// Raised when a caller violates a documented precondition (shape, channel
/// count, divisibility, ...).
class ContractError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Reflective padding needs at least two samples along the padded axis.
class InputTooSmallError : public ContractError {
 public:
  using ContractError::ContractError;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UnsupportedFormatError : public IoError {
 public:
  using IoError::IoError;
};

#define WDN_REQUIRE(cond, msg)                                   \
  do {                                                           \
    if (!(cond)) throw ::wdn::ContractError(std::string(msg));   \
  } while (0)

}  // namespace wdn
