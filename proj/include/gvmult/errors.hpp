#pragma once

#include <stdexcept>
#include <string>

namespace gvmult {

/// Argument outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// A numerical procedure (quadrature, BVP solve, table lookup) failed.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Operation called on an object that does not satisfy its standing assumptions.
class PreconditionError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Input data failed a structural or growth validation.
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Requested problem size exceeds a hard resource cap.
class ResourceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace gvmult
