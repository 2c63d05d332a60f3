#pragma once

#include <stdexcept>
#include <string>

namespace qunet {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid configuration value (kernel sizes, image sizes, hyperparameters).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Input data violates a documented invariant.
class ValidationError : public Error {
public:
    using Error::Error;
};

class ShapeError : public Error {
public:
    using Error::Error;
};

/// File could not be read or decoded.
class LoadError : public Error {
public:
    using Error::Error;
};

class TrainingError : public Error {
public:
    using Error::Error;
};

}  // namespace qunet
