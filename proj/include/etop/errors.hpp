#pragma once

#include <stdexcept>
#include <string>

namespace etop {

/// Thrown when an argument of a theta-quotient lands within the pole guard
/// of the period lattice (or of a shifted pole set). The message names the
/// offending argument.
struct PoleProximity : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Thrown when a twisted section is requested at the zero mode with a
/// vanishing spectral shift.
struct ZeroArgument : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Thrown when a state violates a constraint it is flagged to satisfy.
struct ConstraintViolation : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Thrown by the identity verifier for an id outside the catalogue, or for
/// an id requested at a (N, M) combination where it is not defined.
struct UnknownIdentity : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Thrown by integrators when a step would evaluate coefficients at a
/// pole-adjacent configuration.
struct StepRejected : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace etop
