#pragma once

#include <stdexcept>
#include <string>

namespace tzsl {

// Base class for all errors raised by the library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Malformed text input (bad row, unparseable number). Messages name the
// 1-based line number when one is known.
class ParseError : public Error {
public:
    using Error::Error;
};

// Vector/matrix length disagreement, in files or between components.
class DimensionError : public Error {
public:
    using Error::Error;
};

// A class id that is not present in the semantic table.
class ReferenceError : public Error {
public:
    using Error::Error;
};

// A class id listed in both the seen and unseen partitions.
class PartitionError : public Error {
public:
    using Error::Error;
};

// A domain invariant does not hold (non-finite value, duplicate id, ...).
class ValidationError : public Error {
public:
    using Error::Error;
};

// An operation was called with arguments outside its contract.
class ArgumentError : public Error {
public:
    using Error::Error;
};

// Missing, unreadable or unwritable files.
class IoError : public Error {
public:
    using Error::Error;
};

// A non-finite value appeared during numeric computation.
class NumericError : public Error {
public:
    using Error::Error;
};

}  // namespace tzsl
