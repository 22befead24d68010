#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace microt {

/// Raised whenever tensor extents do not line up (layer wiring, file I/O,
/// classifier/feature dimension mismatches).
class ShapeError : public std::runtime_error {
 public:
  explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

using Shape = std::vector<int>;

inline std::int64_t numel(const Shape& shape) {
  std::int64_t n = 1;
  for (int e : shape) {
    if (e <= 0) throw ShapeError("nonpositive extent in shape");
    n *= e;
  }
  return n;
}

inline std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << "x";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

/// Dense row-major tensor over an Eigen array. Rank-1 carries vectors
/// (features, logits), rank-3 carries channel-first images.
template <typename Scalar>
struct TensorT {
  Shape shape;
  Eigen::Array<Scalar, Eigen::Dynamic, 1> data;

  TensorT() = default;
  explicit TensorT(Shape s) : shape(std::move(s)) {
    data = Eigen::Array<Scalar, Eigen::Dynamic, 1>::Zero(numel(shape));
  }
  TensorT(Shape s, Eigen::Array<Scalar, Eigen::Dynamic, 1> d)
      : shape(std::move(s)), data(std::move(d)) {
    if (data.size() != numel(shape))
      throw ShapeError("tensor data length " + std::to_string(data.size()) +
                       " does not match shape " + shape_str(shape));
  }
  TensorT(Shape s, std::initializer_list<Scalar> values) : shape(std::move(s)) {
    if (static_cast<std::int64_t>(values.size()) != numel(shape))
      throw ShapeError("initializer length does not match shape " + shape_str(shape));
    data.resize(static_cast<Eigen::Index>(values.size()));
    Eigen::Index i = 0;
    for (Scalar v : values) data[i++] = v;
  }

  std::int64_t size() const { return data.size(); }
  int rank() const { return static_cast<int>(shape.size()); }

  Scalar& operator[](std::int64_t i) { return data[i]; }
  Scalar operator[](std::int64_t i) const { return data[i]; }

  bool all_finite() const { return data.isFinite().all(); }
};

using Tensor = TensorT<double>;
using TensorF = TensorT<float>;

template <typename To, typename From>
TensorT<To> tensor_cast(const TensorT<From>& t) {
  return TensorT<To>(t.shape, t.data.template cast<To>());
}

inline Tensor zeros_like(const Tensor& t) { return Tensor(t.shape); }

inline bool same_shape(const Shape& a, const Shape& b) { return a == b; }

inline void require_shape(const Shape& got, const Shape& want, const std::string& what) {
  if (!same_shape(got, want))
    throw ShapeError(what + ": expected " + shape_str(want) + ", got " + shape_str(got));
}

}  // namespace microt
