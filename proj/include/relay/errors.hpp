#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace relay {

/// Base class for all errors raised by this library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Tensor shapes do not line up for the requested operation.
struct DimensionError : Error {
  using Error::Error;
};

/// A run or model configuration is internally inconsistent.
struct ConfigError : Error {
  using Error::Error;
};

/// An API precondition was violated (non-scalar loss, empty input, ...).
struct ContractError : Error {
  using Error::Error;
};

/// An attention query row has no allowed position to attend to.
struct MaskingError : Error {
  using Error::Error;
};

/// An index (class label, token id, ...) is out of range.
struct IndexError : Error {
  using Error::Error;
};

/// A perception or communication budget would be exceeded.
/// Carries machine-readable fields so callers and tests can inspect
/// exactly which constraint failed and by how much.
struct BudgetExceeded : Error {
  enum class Resource { Pixels, Tokens };

  BudgetExceeded(Resource r, std::int64_t req, std::int64_t lim,
                 const std::string& what)
      : Error(what), resource(r), required(req), limit(lim) {}

  Resource resource;
  std::int64_t required;
  std::int64_t limit;
};

/// Scene construction could not satisfy its constraints after bounded retries.
struct GenerationError : Error {
  using Error::Error;
};

/// A dataset file is malformed or violates the documented schema.
struct DatasetError : Error {
  using Error::Error;
};

/// File I/O failure; message always includes the offending path.
struct IoError : Error {
  using Error::Error;
};

/// Training aborted (non-finite loss, out-of-order stage resumption, ...).
struct TrainingError : Error {
  using Error::Error;
};

/// Two runs being compared are not comparable (different datasets, ...).
struct ComparisonError : Error {
  using Error::Error;
};

}  // namespace relay
