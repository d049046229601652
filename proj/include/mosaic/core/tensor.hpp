#pragma once

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <cstring>
#include <initializer_list>
#include <memory>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "mosaic/core/errors.hpp"
#include "mosaic/core/rng.hpp"

namespace mosaic {

// Fixed-capacity shape; tensors here never exceed 5 axes [B, T, H, W, C].
class Shape {
 public:
  static constexpr int kMaxRank = 6;

  Shape() = default;
  Shape(std::initializer_list<int64_t> dims) {
    check(dims.size() <= kMaxRank, "shape rank too large");
    rank_ = static_cast<int>(dims.size());
    int i = 0;
    for (int64_t d : dims) dims_[i++] = d;
  }

  int rank() const { return rank_; }
  int64_t operator[](int i) const { return dims_[i]; }
  int64_t& operator[](int i) { return dims_[i]; }

  int64_t numel() const {
    int64_t n = 1;
    for (int i = 0; i < rank_; ++i) n *= dims_[i];
    return n;
  }

  bool operator==(const Shape& o) const {
    if (rank_ != o.rank_) return false;
    for (int i = 0; i < rank_; ++i)
      if (dims_[i] != o.dims_[i]) return false;
    return true;
  }
  bool operator!=(const Shape& o) const { return !(*this == o); }

  std::string str() const {
    std::ostringstream os;
    os << "[";
    for (int i = 0; i < rank_; ++i) os << (i ? "," : "") << dims_[i];
    os << "]";
    return os.str();
  }

 private:
  std::array<int64_t, kMaxRank> dims_{};
  int rank_ = 0;
};

// Contiguous row-major tensor with shared immutable-by-convention storage.
// reshaped() is free (aliases the buffer); all mutation goes through data()
// and is confined to freshly allocated tensors and gradient accumulators.
template <class T>
class Tensor {
 public:
  using Scalar = T;
  using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using MatMap = Eigen::Map<RowMat>;
  using ConstMatMap = Eigen::Map<const RowMat>;
  using VecMap = Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>>;
  using ConstVecMap = Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>>;

  Tensor() = default;
  explicit Tensor(Shape shape) : shape_(shape) {
    store_ = std::make_shared<std::vector<T>>(static_cast<size_t>(shape_.numel()), T(0));
  }

  static Tensor zeros(Shape s) { return Tensor(s); }

  static Tensor full(Shape s, T v) {
    Tensor t(s);
    std::fill(t.data(), t.data() + t.numel(), v);
    return t;
  }

  static Tensor from_vector(Shape s, std::vector<T> v) {
    Tensor t;
    check(static_cast<int64_t>(v.size()) == s.numel(), "from_vector size mismatch");
    t.shape_ = s;
    t.store_ = std::make_shared<std::vector<T>>(std::move(v));
    return t;
  }

  static Tensor randn(Shape s, Rng& rng, T stddev = T(1)) {
    Tensor t(s);
    T* p = t.data();
    for (int64_t i = 0; i < t.numel(); ++i) p[i] = static_cast<T>(rng.normal()) * stddev;
    return t;
  }

  static Tensor uniform(Shape s, Rng& rng, T lo, T hi) {
    Tensor t(s);
    T* p = t.data();
    for (int64_t i = 0; i < t.numel(); ++i) p[i] = static_cast<T>(rng.uniform(lo, hi));
    return t;
  }

  bool defined() const { return store_ != nullptr; }
  const Shape& shape() const { return shape_; }
  int64_t dim(int i) const { return shape_[i]; }
  int rank() const { return shape_.rank(); }
  int64_t numel() const { return shape_.numel(); }

  T* data() { return store_->data(); }
  const T* data() const { return store_->data(); }

  T& at(int64_t i) { return (*store_)[static_cast<size_t>(i)]; }
  T at(int64_t i) const { return (*store_)[static_cast<size_t>(i)]; }

  Tensor reshaped(Shape s) const {
    check(s.numel() == numel(), "reshape numel mismatch " + shape_.str() + " -> " + s.str());
    Tensor t = *this;
    t.shape_ = s;
    return t;
  }

  Tensor clone() const {
    Tensor t;
    t.shape_ = shape_;
    t.store_ = std::make_shared<std::vector<T>>(*store_);
    return t;
  }

  bool same_storage(const Tensor& o) const { return store_ == o.store_; }

  // 2-D Eigen views; rows*cols must cover the buffer exactly.
  MatMap mat(int64_t rows, int64_t cols) {
    check(rows * cols == numel(), "mat view size mismatch");
    return MatMap(data(), rows, cols);
  }
  ConstMatMap mat(int64_t rows, int64_t cols) const {
    check(rows * cols == numel(), "mat view size mismatch");
    return ConstMatMap(data(), rows, cols);
  }
  // Leading dims collapsed, last dim as columns.
  MatMap mat2d() { return mat(numel() / shape_[rank() - 1], shape_[rank() - 1]); }
  ConstMatMap mat2d() const { return mat(numel() / shape_[rank() - 1], shape_[rank() - 1]); }

  VecMap vec() { return VecMap(data(), numel()); }
  ConstVecMap vec() const { return ConstVecMap(data(), numel()); }

  void add_(const Tensor& o) {
    check(o.numel() == numel(), "add_ size mismatch");
    vec() += o.vec();
  }
  void fill_(T v) { std::fill(data(), data() + numel(), v); }

 private:
  Shape shape_;
  std::shared_ptr<std::vector<T>> store_;
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

}  // namespace mosaic
