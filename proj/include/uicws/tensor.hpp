#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <vector>

#include "uicws/errors.hpp"

namespace uicws {

/// Dense row-major tensor. Every value on the tape is rank 2; higher ranks
/// appear only in traces (e.g. the n x 7 x d subword feature map).
template <class Real>
class Tensor {
 public:
  using Matrix = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using MatrixMap = Eigen::Map<Matrix>;
  using ConstMatrixMap = Eigen::Map<const Matrix>;

  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape, Real fill = Real(0))
      : shape_(std::move(shape)), data_(element_count(shape_), fill) {}
  Tensor(std::size_t rows, std::size_t cols, Real fill = Real(0)) : Tensor(std::vector<std::size_t>{rows, cols}, fill) {}
  Tensor(std::vector<std::size_t> shape, std::vector<Real> data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != element_count(shape_)) {
      throw ShapeMismatch("Tensor: " + std::to_string(data_.size()) + " values for shape " +
                          detail::shape_string(shape_));
    }
  }

  static Tensor scalar(Real v) { return Tensor({1, 1}, std::vector<Real>{v}); }

  const std::vector<std::size_t>& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  /// Last dimension.
  std::size_t cols() const noexcept { return shape_.empty() ? 1 : shape_.back(); }
  /// Product of all leading dimensions.
  std::size_t rows() const noexcept { return cols() == 0 ? 0 : data_.size() / cols(); }

  Real* data() noexcept { return data_.data(); }
  const Real* data() const noexcept { return data_.data(); }
  std::span<Real> values() noexcept { return data_; }
  std::span<const Real> values() const noexcept { return data_; }
  const std::vector<Real>& storage() const noexcept { return data_; }

  Real& operator[](std::size_t i) { return data_[i]; }
  Real operator[](std::size_t i) const { return data_[i]; }
  Real& operator()(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  Real operator()(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

  MatrixMap mat() {
    return MatrixMap(data_.data(), static_cast<Eigen::Index>(rows()), static_cast<Eigen::Index>(cols()));
  }
  ConstMatrixMap mat() const {
    return ConstMatrixMap(data_.data(), static_cast<Eigen::Index>(rows()), static_cast<Eigen::Index>(cols()));
  }

  void fill(Real v) { std::fill(data_.begin(), data_.end(), v); }

  /// Same data, new shape; element count must match.
  Tensor reshaped(std::vector<std::size_t> shape) const {
    if (element_count(shape) != data_.size()) throw ShapeMismatch("reshape", shape_, shape);
    Tensor out;
    out.shape_ = std::move(shape);
    out.data_ = data_;
    return out;
  }

  friend bool operator==(const Tensor& a, const Tensor& b) { return a.shape_ == b.shape_ && a.data_ == b.data_; }

 private:
  static std::size_t element_count(const std::vector<std::size_t>& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
  }

  std::vector<std::size_t> shape_;
  std::vector<Real> data_;
};

}  // namespace uicws
