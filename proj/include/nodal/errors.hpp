#pragma once

#include <stdexcept>
#include <string>

namespace nodal {

struct InvalidSpec : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct DomainError : std::domain_error {
    using std::domain_error::domain_error;
};

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Requested work exceeds the configured memory or time budget.
/// `required_level` is the budget parameter that would be needed (grid level, vertex count).
struct ResourceError : std::runtime_error {
    ResourceError(const std::string& what, int required) : std::runtime_error(what), required_level(required) {}
    int required_level;
};

}  // namespace nodal
