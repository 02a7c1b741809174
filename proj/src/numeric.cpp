#include "vfl/numeric.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "vfl/error.hpp"

namespace vfl {

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    std::ostringstream msg;
    msg << "matmul: inner dimensions differ, " << a.rows() << "x" << a.cols()
        << " * " << b.rows() << "x" << b.cols();
    throw ShapeError(msg.str());
  }
  return a * b;
}

Matrix sigmoid(const Matrix& x) {
  return x.unaryExpr([](double v) {
    if (v >= 0.0) {
      return 1.0 / (1.0 + std::exp(-v));
    }
    const double e = std::exp(v);
    return e / (1.0 + e);
  });
}

Matrix tanh(const Matrix& x) { return x.array().tanh(); }

Vector softmax(const Vector& logits) {
  if (logits.size() == 0) {
    throw std::invalid_argument("softmax: empty input");
  }
  const double m = logits.maxCoeff();
  Vector e = (logits.array() - m).exp();
  return e / e.sum();
}

Index argmax(const Vector& v) {
  if (v.size() == 0) {
    throw std::invalid_argument("argmax: empty input");
  }
  Index best = 0;
  for (Index i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

}  // namespace vfl
