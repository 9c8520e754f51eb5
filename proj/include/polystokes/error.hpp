#pragma once

#include <stdexcept>
#include <string>

namespace polystokes {

/// Base class of every exception thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid mesh data: bad topology, orientation, malformed files.
class MeshError : public Error {
public:
    using Error::Error;
};

/// Invalid user input (out-of-range order, incompatible boundary data, ...).
class InputError : public Error {
public:
    using Error::Error;
};

/// Iterative solver failure or a basis verification failure.
class SolverError : public Error {
public:
    using Error::Error;
};

} // namespace polystokes
