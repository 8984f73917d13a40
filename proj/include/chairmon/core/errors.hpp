#pragma once

#include <stdexcept>
#include <string>

namespace chairmon {

/// Input failed a domain invariant. `field()` names the offending field.
class ValidationError : public std::invalid_argument {
public:
    ValidationError(std::string field, const std::string& what)
        : std::invalid_argument(field + ": " + what), field_(std::move(field)) {}

    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

/// A message reached a handler that does not own its chair.
class RoutingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad static configuration (profiles, thresholds, config files).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class StorageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class BusError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace chairmon
