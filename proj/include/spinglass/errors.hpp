#pragma once

#include <stdexcept>
#include <string>

namespace spinglass {

// Argument outside the documented domain of an operation.
struct domain_error : std::invalid_argument {
    explicit domain_error(const std::string& msg) : std::invalid_argument(msg) {}
};

// Size/cost guard tripped (enumeration too large, replica count too high, ...).
struct guard_error : std::runtime_error {
    explicit guard_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Numerical failure: covariance not PSD, scheme instability, weight underflow.
struct numerical_error : std::runtime_error {
    explicit numerical_error(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace spinglass
