#pragma once

#include <stdexcept>
#include <string>

namespace degbench {

// Exit-code-bearing error categories used across the toolkit.
// usage -> 1, data -> 2, numeric -> 3 (mapped in the CLI).

struct UsageError : std::runtime_error {
    explicit UsageError(const std::string& msg) : std::runtime_error(msg) {}
};

struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace degbench
