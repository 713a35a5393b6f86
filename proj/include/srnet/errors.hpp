#pragma once

#include <stdexcept>
#include <string>

namespace srnet {

// Error categories map onto CLI exit codes (2 config, 3 data, 4 numeric).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Shape disagreement between a genotype/model and the data it is fed.
struct DimensionError : DataError {
  using DataError::DataError;
};

// Malformed or version-mismatched JSON artifact.
struct SchemaError : DataError {
  using DataError::DataError;
};

struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace srnet
