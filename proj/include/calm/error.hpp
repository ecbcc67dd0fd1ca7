#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace calm {

// Malformed input or a violated call contract. The CLI maps this to exit code 1.
class InputError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// A malformed line in a text input, carrying its 1-based line number.
class ParseError : public InputError {
public:
    ParseError(std::string source, std::size_t line, const std::string& message)
        : InputError(source + ":" + std::to_string(line) + ": " + message),
          source_(std::move(source)),
          line_(line) {}

    const std::string& source() const noexcept { return source_; }
    std::size_t line() const noexcept { return line_; }

private:
    std::string source_;
    std::size_t line_;
};

// Well-formed data that cannot be evaluated (empty sets, degenerate splits,
// rank-deficient designs, non-convergence). The CLI maps this to exit code 2.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// The calibration set holds a single class, so the optimal shift diverges.
class CalibrationUnbounded : public NumericalError {
public:
    CalibrationUnbounded() : NumericalError("calibration unbounded") {}
};

}  // namespace calm
