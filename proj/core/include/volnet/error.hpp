#pragma once

#include <stdexcept>
#include <string>

namespace volnet {

// Base for every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed input, bad configuration, or a violated precondition.
class InputError : public Error {
public:
    using Error::Error;
};

// A numerical step (standardisation, least squares, glasso) could not proceed.
class EstimationError : public Error {
public:
    using Error::Error;
};

}  // namespace volnet
