#pragma once

#include <stdexcept>
#include <string>

namespace nope {

// Operand shapes do not compose. The message names every shape involved.
class ShapeError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// An operation was requested that the current configuration does not support.
class StateError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace nope
