#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace anovats {

/// Error raised when input data violates a module check. The message is
/// prefixed with the module name so the CLI can print it as a one-line
/// diagnostic.
class Error : public std::runtime_error {
public:
    Error(std::string_view module, const std::string& message)
        : std::runtime_error(std::string(module) + ": " + message), module_(module), message_(message) {}

    [[nodiscard]] const std::string& module() const noexcept { return module_; }
    /// The message without the module prefix.
    [[nodiscard]] const std::string& message() const noexcept { return message_; }

private:
    std::string module_;
    std::string message_;
};

/// The requested analysis cannot be carried out on this input (too few
/// groups, too short a series, unsupported dimension, ...).
class InapplicableError : public Error {
public:
    using Error::Error;
};

}  // namespace anovats
