#pragma once

#include <filesystem>

#include "vfl/types.hpp"

namespace vfl {

// Minimal NPY (format v1.0) support for 2-D little-endian float arrays in C
// order. Values stored as '<f4' are widened to double exactly on read; the
// writer always emits '<f8'.

// Throws ParseError on bad magic, unsupported version, fortran order,
// non-float dtype, non-2-D shape, or payload size mismatch.
Matrix read_npy(const std::filesystem::path& path);

// NPY v1.0 header, space-padded so the header block is a multiple of 64
// bytes and newline-terminated, followed by the row-major f8 payload.
void write_npy(const std::filesystem::path& path, const Matrix& m);

}  // namespace vfl
