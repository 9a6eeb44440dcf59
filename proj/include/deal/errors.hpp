#pragma once

#include <stdexcept>
#include <string>

namespace deal {

/// Invalid or inconsistent configuration (bad sizes, fractions, counts).
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Operands whose spatial or channel dimensions disagree.
class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Label access or annotation request that violates the pool partition.
class InvalidQueryError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

class NumericError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// A loss or score whose normalizer is zero (e.g. every pixel ignored).
class UndefinedValueError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

class InferenceError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class AggregationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace deal
