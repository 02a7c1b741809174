#pragma once

#include "vfl/types.hpp"

namespace vfl {

// Matrix product with an explicit conformance check; throws ShapeError naming
// both operand shapes on mismatch.
Matrix matmul(const Matrix& a, const Matrix& b);

// Elementwise logistic 1/(1+e^-x), evaluated branch-wise so large |x| cannot
// overflow.
Matrix sigmoid(const Matrix& x);

// Elementwise hyperbolic tangent.
Matrix tanh(const Matrix& x);

// Max-subtracted softmax; the output sums to 1 for entries up to ~700 in
// magnitude. Throws std::invalid_argument on an empty input.
Vector softmax(const Vector& logits);

// Index of the largest entry; ties resolve to the lowest index.
Index argmax(const Vector& v);

}  // namespace vfl
