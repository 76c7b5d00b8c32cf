#pragma once

#include <stdexcept>
#include <string>

namespace ecodrive {

/// Raised for precondition and data errors across the library.
class Error : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

}  // namespace ecodrive
