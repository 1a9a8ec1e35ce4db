#pragma once

#include <stdexcept>
#include <string>

namespace misspec {

// Argument outside the mathematical domain of an operation (x <= 0 for K_nu,
// |y| > 1 for P_l, non-unit vectors on the sphere, ...).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

// Invalid parameters, mismatched sizes, malformed designs.
class InvalidArgument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// A computation that is well posed mathematically but failed in floating point.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IllConditionedDesign : public NumericalError {
public:
    IllConditionedDesign(const std::string& what, long leading_minor)
        : NumericalError(what), leading_minor_(leading_minor) {}

    [[nodiscard]] long leading_minor() const { return leading_minor_; }

private:
    long leading_minor_;
};

}  // namespace misspec
