#pragma once

// Error hierarchy shared by all flowagg components. Every error names the
// component it came from so CLI output and exit codes can report it.

#include <stdexcept>
#include <string>

namespace flowagg {

class Error : public std::runtime_error {
public:
    Error(std::string component, const std::string& message)
        : std::runtime_error(component + ": " + message),
          component_(std::move(component)) {}

    const std::string& component() const noexcept { return component_; }

private:
    std::string component_;
};

// Mismatched or invalid tensor shapes.
class ShapeError : public Error {
public:
    using Error::Error;
};

// Element counts that overflow or cannot be allocated.
class SizeError : public Error {
public:
    using Error::Error;
};

// Arguments outside their documented range (levels, radii, window sizes).
class RangeError : public Error {
public:
    using Error::Error;
};

// Non-finite values where finite ones are required.
class NumericError : public Error {
public:
    using Error::Error;
};

// Caller violated a documented precondition (empty masks, all-invalid input).
class ContractError : public Error {
public:
    using Error::Error;
};

// Malformed file content (bad magic, truncated body, invalid header).
class FormatError : public Error {
public:
    using Error::Error;
};

}  // namespace flowagg
