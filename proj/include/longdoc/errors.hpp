#pragma once

#include <stdexcept>
#include <string>

namespace longdoc {

/// Bad configuration, arguments, or missing inputs. Maps to CLI exit code 2.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Data that violates a stage's preconditions (empty documents, OOV input,
/// malformed files). Maps to CLI exit code 3.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Numerical failure during training (non-finite loss). Maps to exit code 4.
class TrainingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace longdoc
