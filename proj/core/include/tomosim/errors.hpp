#pragma once

#include <stdexcept>
#include <string>

namespace tomosim {

// Raised for malformed files, schema violations and out-of-contract data.
// The CLI maps this to its data-error exit code.
class data_error : public std::runtime_error {
 public:
  explicit data_error(const std::string& msg) : std::runtime_error(msg) {}
};

}
