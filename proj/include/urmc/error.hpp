#pragma once

#include <stdexcept>
#include <string>

namespace urmc {

// Malformed or inconsistent caller input (lengths, non-finite values, missing groups).
class InputError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Argument outside the mathematical domain of an operation (probabilities, grid points).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

// Tuning or model parameter outside its admissible range.
class ParameterError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// The estimator could not produce a value from the data it was given.
class EstimationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace urmc
