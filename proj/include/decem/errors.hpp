#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace decem {

/// Malformed problem or policy input. Carries a 1-based source location when
/// one is known (line 0 means "no location").
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::size_t line = 0, std::size_t column = 0)
        : std::runtime_error(line == 0 ? what
                                       : "line " + std::to_string(line) + ", column " +
                                             std::to_string(column) + ": " + what),
          line_(line), column_(column) {}

    std::size_t line() const noexcept { return line_; }
    std::size_t column() const noexcept { return column_; }

private:
    std::size_t line_;
    std::size_t column_;
};

/// Tables that do not fit together (policy vs. model, message lengths, ...).
class DimensionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// NaN/Inf or an unrecoverable zero normalizer during optimization.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace decem
