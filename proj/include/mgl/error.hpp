#pragma once

#include <functional>
#include <iostream>
#include <stdexcept>
#include <string>
#include <string_view>

namespace mgl {

// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Invalid parameters or configuration (maps to CLI exit code 2).
class ConfigError : public Error {
public:
    using Error::Error;
};

// Malformed or non-finite input data, bad file formats.
class DataError : public Error {
public:
    using Error::Error;
};

// Divergence or non-convergence of a numerical routine (CLI exit code 3).
class NumericalError : public Error {
public:
    using Error::Error;
};

// Caller violated a precondition (mismatched sizes, bad indices).
class ContractError : public Error {
public:
    using Error::Error;
};

using WarningHandler = std::function<void(std::string_view)>;

namespace detail {
inline WarningHandler& warning_handler() {
    static WarningHandler handler = [](std::string_view msg) {
        std::cerr << "warning: " << msg << '\n';
    };
    return handler;
}
} // namespace detail

// Replaces the warning sink; returns the previous one.
inline WarningHandler set_warning_handler(WarningHandler handler) {
    auto previous = std::move(detail::warning_handler());
    detail::warning_handler() = std::move(handler);
    return previous;
}

inline void warn(std::string_view message) {
    if (auto& h = detail::warning_handler()) h(message);
}

} // namespace mgl
