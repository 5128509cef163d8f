#pragma once

#include <stdexcept>
#include <string>

namespace fbsde {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Noise weights fail the zero-mean / unit-second-moment conditions.
struct MomentError : Error {
    using Error::Error;
};

// Lattice construction would exceed the configured node cap.
struct SizeError : Error {
    using Error::Error;
};

// A level variable was handed to an operator expecting another level.
struct LevelMismatchError : Error {
    using Error::Error;
};

// Vector or matrix dimensions disagree.
struct ShapeError : Error {
    using Error::Error;
};

// Requested horizon exceeds the available levels.
struct HorizonError : Error {
    using Error::Error;
};

// Discount exponent lies outside the admissible window.
struct WindowError : Error {
    using Error::Error;
};

struct NonFiniteError : Error {
    using Error::Error;
};

// Successive fixed-point iterates stopped shrinking; the caller should
// reduce the continuation step.
struct NonContractionError : Error {
    using Error::Error;
};

// Continuation step length collapsed below the hard floor.
struct StepCollapseError : Error {
    using Error::Error;
};

struct DivergenceError : Error {
    using Error::Error;
};

// Certificate fields are inconsistent with the declared case.
struct CaseMismatchError : Error {
    using Error::Error;
};

struct ConfigError : Error {
    using Error::Error;
};

}  // namespace fbsde
