#pragma once

#include <stdexcept>
#include <string>

namespace hopmix {

// Shape/dimension violations. Messages always name the offending shapes.
class DimensionError : public std::runtime_error {
public:
    explicit DimensionError(const std::string& what) : std::runtime_error(what) {}
};

// Non-finite values, singular normalizations, diverging integrations.
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

// A model was asked to do something its configuration does not define
// (e.g. pseudo energy with activations that have no primitive).
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace hopmix
