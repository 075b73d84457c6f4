#pragma once

#include <stdexcept>
#include <string>

namespace descatter {

// Maps to process exit code 1.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Maps to process exit code 2.
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace descatter
