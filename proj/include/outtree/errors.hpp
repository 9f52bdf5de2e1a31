#pragma once

#include <stdexcept>
#include <string>

namespace outtree {

/// Base of every error raised by the library. `exit_code()` is the process
/// status the command-line tool reports for this class of failure.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    virtual int exit_code() const noexcept { return 1; }
    virtual const char* kind() const noexcept { return "error"; }
};

/// Invalid options, flags or argument combinations.
class ConfigError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 2; }
    const char* kind() const noexcept override { return "config"; }
};

/// Malformed or out-of-contract input data.
class DataError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 3; }
    const char* kind() const noexcept override { return "data"; }
};

/// Arithmetic that cannot be completed (singular factor, negative cofactor...).
class NumericalFault : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 4; }
    const char* kind() const noexcept override { return "numerical"; }
};

/// No out-tree carries positive weight, so the partition function is zero.
class ZeroPartition : public NumericalFault {
public:
    using NumericalFault::NumericalFault;
    const char* kind() const noexcept override { return "zero-partition"; }
};

/// A rank-1 edit would cross a singularity of the factored matrix.
class CapacitanceFault : public NumericalFault {
public:
    using NumericalFault::NumericalFault;
    const char* kind() const noexcept override { return "capacitance"; }
};

}  // namespace outtree
