#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace kst {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A parameter set violates one of the construction's inequalities.
class ConstraintError : public Error {
public:
    using Error::Error;
};

/// An argument lies outside the domain of the operation.
class DomainError : public Error {
public:
    using Error::Error;
};

/// An enumeration or grid would exceed its configured budget.
class BudgetError : public Error {
public:
    using Error::Error;
};

/// Malformed or unusable input (bad files, missing fields, bad flags).
class InputError : public Error {
public:
    using Error::Error;
};

class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t offset)
        : Error(what + " at offset " + std::to_string(offset)), offset_(offset) {}

    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

/// A self-check of the construction failed; indicates a bug, not bad input.
class InternalError : public Error {
public:
    using Error::Error;
};

}  // namespace kst
