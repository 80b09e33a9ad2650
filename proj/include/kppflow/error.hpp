#pragma once

#include <stdexcept>
#include <string>

namespace kppflow {

/// Raised when an input violates an operation's precondition.
class InputError : public std::invalid_argument {
 public:
    using std::invalid_argument::invalid_argument;
};

/// Raised when a numerical procedure cannot produce a meaningful result.
class NumericalError : public std::runtime_error {
 public:
    using std::runtime_error::runtime_error;
};

namespace detail {

inline void require(bool cond, const std::string& msg) {
    if (!cond)
        throw InputError(msg);
}

}  // namespace detail
}  // namespace kppflow
