#pragma once

#include <stdexcept>
#include <string>

namespace rhs {

/// Argument outside the domain of an operation (bad threshold, empty beam list, ...).
class InvalidArgument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Element or feed index outside the surface.
class InvalidIndex : public std::out_of_range {
public:
    using std::out_of_range::out_of_range;
};

/// Effective channel is rank deficient (or too badly conditioned) for zero forcing.
class SingularChannel : public std::runtime_error {
public:
    SingularChannel(const std::string& what, double condition)
        : std::runtime_error(what), condition_(condition) {}

    double condition() const noexcept { return condition_; }

private:
    double condition_;
};

}  // namespace rhs
