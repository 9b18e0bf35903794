#pragma once

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace hpo {

using Index = Eigen::Index;

/// Thrown when a stage receives an input it cannot process (shape underflow,
/// channel mismatch, out-of-range parameter).
class PipelineError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

template <class Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <class Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// H x W x C tensor. Stored as an (H*W) x C row-major matrix, so the flat
/// layout is (row, column, channel) with channel fastest.
template <class Scalar>
class FeatureMap {
 public:
  using Storage = RowMatrix<Scalar>;

  FeatureMap() = default;
  FeatureMap(Index rows, Index cols, Index channels) : rows_(rows), cols_(cols) {
    if (rows < 1 || cols < 1 || channels < 1) throw PipelineError("feature map dimensions must be >= 1");
    data_ = Storage::Zero(rows * cols, channels);
  }
  FeatureMap(Index rows, Index cols, Storage data) : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (rows < 1 || cols < 1 || data_.cols() < 1 || data_.rows() != rows * cols)
      throw PipelineError("feature map storage does not match its dimensions");
  }

  Index rows() const { return rows_; }
  Index cols() const { return cols_; }
  Index channels() const { return data_.cols(); }
  Index size() const { return data_.size(); }

  Scalar& operator()(Index i, Index j, Index k) { return data_(i * cols_ + j, k); }
  Scalar operator()(Index i, Index j, Index k) const { return data_(i * cols_ + j, k); }

  /// One row per pixel, one column per channel.
  Storage& pixels() { return data_; }
  const Storage& pixels() const { return data_; }

  Eigen::Map<const Vector<Scalar>> flat() const { return {data_.data(), data_.size()}; }

  bool operator==(const FeatureMap& o) const {
    return rows_ == o.rows_ && cols_ == o.cols_ && data_.cols() == o.data_.cols() && data_ == o.data_;
  }

 private:
  Index rows_ = 0;
  Index cols_ = 0;
  Storage data_;
};

/// Flattened size x size x channels patches at every valid position with the
/// given stride, one patch per row in (di, dj, channel) order.
template <class Scalar>
RowMatrix<Scalar> im2col(const FeatureMap<Scalar>& x, Index size, Index stride = 1) {
  if (size < 1 || stride < 1 || size > x.rows() || size > x.cols())
    throw PipelineError("patch size " + std::to_string(size) + " does not fit a " + std::to_string(x.rows()) + "x" +
                        std::to_string(x.cols()) + " map");
  const Index C = x.channels();
  const Index oh = (x.rows() - size) / stride + 1;
  const Index ow = (x.cols() - size) / stride + 1;
  const Index run = size * C;  // one patch row is contiguous in storage
  RowMatrix<Scalar> out(oh * ow, size * run);
  const Scalar* src = x.pixels().data();
  for (Index i = 0; i < oh; ++i)
    for (Index j = 0; j < ow; ++j) {
      Scalar* dst = out.row(i * ow + j).data();
      for (Index di = 0; di < size; ++di)
        std::copy_n(src + ((i * stride + di) * x.cols() + j * stride) * C, run, dst + di * run);
    }
  return out;
}

enum class FilterStrategy { random_uniform, zca_projection, zca_patches };

inline const char* strategy_name(FilterStrategy s) {
  switch (s) {
    case FilterStrategy::random_uniform: return "random_uniform";
    case FilterStrategy::zca_projection: return "zca_projection";
    case FilterStrategy::zca_patches: return "zca_patches";
  }
  return "?";
}

/// K filters of shape size x size x channels, one flattened filter per row in
/// the same order as im2col patches.
template <class Scalar>
struct FilterBank {
  RowMatrix<Scalar> weights;
  Index size = 0;
  Index channels = 0;
  FilterStrategy strategy = FilterStrategy::random_uniform;
  std::uint64_t seed = 0;

  Index count() const { return weights.rows(); }
};

}  // namespace hpo
