#pragma once

#include <cstdint>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace gpa {

// Shape/domain violations (bad dimensions, incompatible operands).
struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Malformed files, headers, or config text.
struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Missing/unreadable/unwritable files.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Non-finite values where finite ones are required.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

using Shape = std::vector<int64_t>;

inline int64_t numel(const Shape& shape) {
  int64_t n = 1;
  for (int64_t e : shape) n *= e;
  return n;
}

inline std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

inline void check_shape(bool ok, const std::string& msg) {
  if (!ok) throw ShapeError(msg);
}

// Extents of one 3D grid (depth, height, width order everywhere).
struct GridDims {
  int64_t d = 0, h = 0, w = 0;
  int64_t count() const { return d * h * w; }
  bool operator==(const GridDims&) const = default;
};

inline std::string grid_str(const GridDims& g) {
  std::ostringstream os;
  os << g.d << "x" << g.h << "x" << g.w;
  return os.str();
}

}  // namespace gpa
