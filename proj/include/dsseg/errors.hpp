#pragma once

#include <stdexcept>
#include <string>

namespace dsseg {

// Input violates a documented precondition (bad shape, out-of-range value, ...).
class ValidationError : public std::invalid_argument {
public:
    explicit ValidationError(const std::string& what) : std::invalid_argument(what) {}
};

// Two parameter trees do not share names, order and shapes.
class CongruenceError : public ValidationError {
public:
    explicit CongruenceError(const std::string& what) : ValidationError(what) {}
};

// On-disk data does not match its header.
class FormatError : public std::runtime_error {
public:
    explicit FormatError(const std::string& what) : std::runtime_error(what) {}
};

class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace dsseg
