#pragma once

#include <stdexcept>
#include <string>

namespace prbgan {

// Shape disagreement between operands (message carries both shapes).
struct DimensionError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Input outside the mathematical domain of an operation (log of a
// non-positive value, BCE target outside {0,1}, ...).
struct DomainError : std::domain_error {
    using std::domain_error::domain_error;
};

// Numeric guard tripped: near-zero denominator, non-finite value produced
// or consumed where finiteness is required.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// API contract violation (backward on a non-scalar, mismatched list
// lengths, ...).
struct ContractError : std::logic_error {
    using std::logic_error::logic_error;
};

// Invalid configuration value or unparseable config file.
struct ConfigError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

} // namespace prbgan
