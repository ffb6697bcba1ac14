#pragma once

#include <stdexcept>
#include <string>

namespace mtmc {

// Bad configuration or malformed input that violates a documented contract.
// The CLI maps this to exit code 1.
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Runtime data problem (missing file, I/O failure, inconsistent scene data).
// The CLI maps this to exit code 2.
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace mtmc
