#pragma once

#include <stdexcept>

namespace vfl {

// Dimension or conformance violation between in-memory operands.
struct ShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed on-disk data: NPY files, manifests, checkpoints.
struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace vfl
