#pragma once

#include <stdexcept>
#include <string>

namespace lms {

// Base for everything thrown by the library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad configuration (missing keys, out-of-range settings). CLI exit code 2.
class ConfigError : public Error {
public:
    using Error::Error;
};

// Input data failed validation (malformed rows, constraint violations).
// CLI exit code 3.
class DataError : public Error {
public:
    using Error::Error;
};

// A pipeline stage could not run (missing upstream artifact, I/O failure).
// CLI exit code 4.
class StageError : public Error {
public:
    using Error::Error;
};

}  // namespace lms
