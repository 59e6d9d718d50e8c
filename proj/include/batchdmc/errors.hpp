#pragma once

#include <stdexcept>
#include <string>

namespace batchdmc {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A parameter or precondition is outside its valid domain.
class InvalidParameter : public Error {
public:
    using Error::Error;
};

/// A computation produced non-finite values or failed to converge.
class NumericError : public Error {
public:
    using Error::Error;
};

/// An index, time or horizon falls outside the available data.
class RangeError : public Error {
public:
    using Error::Error;
};

/// Inconsistent configuration (mismatched horizons, sampling periods, missing fields).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// G+'QG+ + R is not positive definite.
class SingularGainError : public NumericError {
public:
    using NumericError::NumericError;
};

namespace detail {

inline void require(bool condition, const std::string& message)
{
    if (!condition)
        throw InvalidParameter(message);
}

} // namespace detail

} // namespace batchdmc
