#ifndef CABLE_ERROR_HPP
#define CABLE_ERROR_HPP

#include <stdexcept>
#include <string>

namespace cable {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A domain or table would exceed its configured size budget.
class CapacityError : public Error {
public:
    using Error::Error;
};

/// An iterative solve stopped at its iteration cap.
class ConvergenceError : public Error {
public:
    using Error::Error;
};

/// Input violates a documented precondition (unknown vertex, bad box, ...).
class DomainError : public Error {
public:
    using Error::Error;
};

/// Numerical inconsistency in derived data (e.g. a Green table ratio outside [0,1]).
class NumericalError : public Error {
public:
    using Error::Error;
};

/// The edge-coupling constant failed its exact oracle.
class CalibrationError : public Error {
public:
    using Error::Error;
};

} // namespace cable

#endif
