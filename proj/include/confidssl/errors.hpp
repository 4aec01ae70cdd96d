#pragma once

#include <stdexcept>

namespace confidssl {

// Bad configuration: option values, spec files, dimension mismatches. Exit code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad or missing data files. Exit code 3.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace confidssl
