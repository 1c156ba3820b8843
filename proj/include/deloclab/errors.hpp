#pragma once

#include <stdexcept>
#include <string>

namespace deloclab {

// Invalid field in a user-supplied spec; message names the field.
struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Matrix/vector dimensions incompatible with the operation.
struct ShapeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Scalar argument outside the documented domain.
struct ParameterError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Input required to be unit-norm (or normalized) is not.
struct NormalizationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Combinatorial or sample budget exceeded.
struct BudgetError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A numeric backend failed to converge or produced non-finite output.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Rank-deficient input where full rank is required.
struct SingularityError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Bad experiment configuration; message carries a dotted key path.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace deloclab
