#pragma once

#include <algorithm>
#include <array>
#include <cmath>

#include "hpo/pipeline/tensor.hpp"

namespace hpo {

using Shape = std::array<Index, 3>;  // rows, cols, channels

template <class Scalar>
struct FbnccParams {
  Scalar beta = 1;   // low-variance cutoff
  bool rho = false;  // hard cutoff max(|u|^2, beta) instead of |u|^2 + beta
  bool eps = true;   // subtract the patch mean
};

template <class Scalar>
struct LpoolParams {
  Index size = 2;
  Index stride = 1;
  Scalar p = 2;
};

template <class Scalar>
struct LnormParams {
  Scalar tau = 1;
  Index size = 2;  // all-channel neighborhood side
};

enum class DihistMode { grid, box };

template <class Scalar>
struct DihistParams {
  Scalar alpha = 0;
  DihistMode mode = DihistMode::grid;
  Index grid = 2;       // grid mode: grid x grid cells
  Index subsample = 1;  // box mode: window stride
  Index side = 2;       // box mode: window side
};

namespace detail {

inline void require(bool ok, const std::string& what) {
  if (!ok) throw PipelineError(what);
}

inline std::string dims(Index h, Index w) { return std::to_string(h) + "x" + std::to_string(w); }

// Sums of every size x size window (per channel) at the given stride;
// separable, so each output costs 2*size additions.
template <class Scalar>
RowMatrix<Scalar> box_sums(const RowMatrix<Scalar>& v, Index H, Index W, Index size, Index stride) {
  const Index oh = (H - size) / stride + 1;
  const Index ow = (W - size) / stride + 1;
  RowMatrix<Scalar> horiz = RowMatrix<Scalar>::Zero(H * ow, v.cols());
  for (Index i = 0; i < H; ++i)
    for (Index j = 0; j < ow; ++j)
      for (Index d = 0; d < size; ++d) horiz.row(i * ow + j) += v.row(i * W + j * stride + d);
  RowMatrix<Scalar> out = RowMatrix<Scalar>::Zero(oh * ow, v.cols());
  for (Index i = 0; i < oh; ++i)
    for (Index d = 0; d < size; ++d) out.middleRows(i * ow, ow) += horiz.middleRows((i * stride + d) * ow, ow);
  return out;
}

inline Index grid_edge(Index cell, Index extent, Index cells) { return cell * extent / cells; }

}  // namespace detail

// Shape rules

inline Shape fbncc_shape(const Shape& in, Index filter_size, Index filters) {
  detail::require(filter_size >= 1 && filter_size <= std::min(in[0], in[1]),
                  "fbncc: filter size " + std::to_string(filter_size) + " exceeds " + detail::dims(in[0], in[1]) + " map");
  return {in[0] - filter_size + 1, in[1] - filter_size + 1, filters};
}

template <class Scalar>
Shape lpool_shape(const Shape& in, const LpoolParams<Scalar>& p) {
  detail::require(p.size >= 2 && p.size <= 8, "lpool: size must be in [2, 8]");
  detail::require(p.stride == 1 || p.stride == 2, "lpool: stride must be 1 or 2");
  detail::require(p.p > 0 && std::isfinite(p.p), "lpool: p must be positive");
  detail::require(p.size <= std::min(in[0], in[1]),
                  "lpool: patch " + std::to_string(p.size) + " exceeds " + detail::dims(in[0], in[1]) + " map");
  return {(in[0] - p.size) / p.stride + 1, (in[1] - p.size) / p.stride + 1, in[2]};
}

template <class Scalar>
Shape lnorm_shape(const Shape& in, const LnormParams<Scalar>& p) {
  detail::require(p.tau > 0 && std::isfinite(p.tau), "lnorm: tau must be positive");
  detail::require(p.size >= 2, "lnorm: neighborhood must be >= 2");
  detail::require(p.size <= std::min(in[0], in[1]),
                  "lnorm: neighborhood " + std::to_string(p.size) + " exceeds " + detail::dims(in[0], in[1]) + " map");
  return {in[0] - p.size + 1, in[1] - p.size + 1, in[2]};
}

template <class Scalar>
Shape dihist_shape(const Shape& in, const DihistParams<Scalar>& p) {
  detail::require(p.alpha >= 0 && std::isfinite(p.alpha), "dihist: alpha must be >= 0");
  if (p.mode == DihistMode::grid) {
    detail::require(p.grid == 2 || p.grid == 3, "dihist: grid must be 2 or 3");
    detail::require(p.grid <= std::min(in[0], in[1]),
                    "dihist: grid " + std::to_string(p.grid) + " exceeds " + detail::dims(in[0], in[1]) + " map");
    return {p.grid, p.grid, 2 * in[2]};
  }
  detail::require(p.subsample >= 1 && p.subsample <= 3, "dihist: subsample must be 1, 2 or 3");
  detail::require(p.side >= 2 && p.side <= 8, "dihist: side must be in [2, 8]");
  detail::require(p.side <= std::min(in[0], in[1]),
                  "dihist: box " + std::to_string(p.side) + " exceeds " + detail::dims(in[0], in[1]) + " map");
  return {(in[0] - p.side) / p.subsample + 1, (in[1] - p.side) / p.subsample + 1, 2 * in[2]};
}

template <class Scalar>
Shape shape_of(const FeatureMap<Scalar>& x) {
  return {x.rows(), x.cols(), x.channels()};
}

// Operators

/// Filter bank normalized cross-correlation, valid region, no filter flip.
template <class Scalar>
FeatureMap<Scalar> fbncc(const FeatureMap<Scalar>& x, const FilterBank<Scalar>& f, const FbnccParams<Scalar>& p) {
  detail::require(p.beta > 0 && std::isfinite(p.beta), "fbncc: beta must be positive");
  detail::require(f.channels == x.channels(), "fbncc: filter has " + std::to_string(f.channels) + " channels, input has " +
                                                  std::to_string(x.channels()));
  detail::require(f.weights.cols() == f.size * f.size * f.channels, "fbncc: malformed filter bank");
  const Shape out = fbncc_shape(shape_of(x), f.size, f.count());

  RowMatrix<Scalar> u = im2col(x, f.size);
  if (p.eps) u.colwise() -= u.rowwise().mean();
  RowMatrix<Scalar> y = u * f.weights.transpose();
  const Vector<Scalar> n2 = u.rowwise().squaredNorm();
  for (Index r = 0; r < y.rows(); ++r) {
    const Scalar d = std::sqrt(p.rho ? std::max(n2(r), p.beta) : n2(r) + p.beta);
    if (d > 0)
      y.row(r) /= d;
    else
      y.row(r).setZero();
  }
  return {out[0], out[1], std::move(y)};
}

/// Strided per-channel patch p-norm.
template <class Scalar>
FeatureMap<Scalar> lpool(const FeatureMap<Scalar>& x, const LpoolParams<Scalar>& p) {
  const Shape out = lpool_shape(shape_of(x), p);
  RowMatrix<Scalar> powered = x.pixels().array().abs().pow(p.p).matrix();
  RowMatrix<Scalar> sums = detail::box_sums(powered, x.rows(), x.cols(), p.size, p.stride);
  sums = sums.array().pow(Scalar(1) / p.p).matrix();
  return {out[0], out[1], std::move(sums)};
}

/// Divides x_ij by the norm of the all-channel neighborhood whose top-left
/// corner is (i, j) when that norm exceeds tau.
template <class Scalar>
FeatureMap<Scalar> lnorm(const FeatureMap<Scalar>& x, const LnormParams<Scalar>& p) {
  const Shape out = lnorm_shape(shape_of(x), p);
  RowMatrix<Scalar> energy = x.pixels().rowwise().squaredNorm();
  const RowMatrix<Scalar> sums = detail::box_sums(energy, x.rows(), x.cols(), p.size, 1);
  RowMatrix<Scalar> y(out[0] * out[1], out[2]);
  for (Index i = 0; i < out[0]; ++i)
    for (Index j = 0; j < out[1]; ++j) {
      const Scalar norm = std::sqrt(sums(i * out[1] + j, 0));
      auto src = x.pixels().row(i * x.cols() + j);
      if (norm > p.tau)
        y.row(i * out[1] + j) = src / norm;
      else
        y.row(i * out[1] + j) = src;
    }
  return {out[0], out[1], std::move(y)};
}

/// Half-rectified L1 pooling. Output channel 2k holds the positive part of
/// input channel k, channel 2k+1 the negative part.
template <class Scalar>
FeatureMap<Scalar> dihist(const FeatureMap<Scalar>& x, const DihistParams<Scalar>& p) {
  const Shape out = dihist_shape(shape_of(x), p);
  const Index C = x.channels();
  RowMatrix<Scalar> rect(x.pixels().rows(), 2 * C);
  rect.leftCols(C) = (x.pixels().array() - p.alpha).max(Scalar(0)).matrix();
  rect.rightCols(C) = (-x.pixels().array() - p.alpha).max(Scalar(0)).matrix();

  RowMatrix<Scalar> sums;
  if (p.mode == DihistMode::grid) {
    sums = RowMatrix<Scalar>::Zero(p.grid * p.grid, 2 * C);
    for (Index gi = 0; gi < p.grid; ++gi)
      for (Index gj = 0; gj < p.grid; ++gj)
        for (Index i = detail::grid_edge(gi, x.rows(), p.grid); i < detail::grid_edge(gi + 1, x.rows(), p.grid); ++i)
          for (Index j = detail::grid_edge(gj, x.cols(), p.grid); j < detail::grid_edge(gj + 1, x.cols(), p.grid); ++j)
            sums.row(gi * p.grid + gj) += rect.row(i * x.cols() + j);
  } else {
    sums = detail::box_sums(rect, x.rows(), x.cols(), p.side, p.subsample);
  }

  RowMatrix<Scalar> y(sums.rows(), 2 * C);
  for (Index k = 0; k < C; ++k) {
    y.col(2 * k) = sums.col(k);
    y.col(2 * k + 1) = sums.col(C + k);
  }
  return {out[0], out[1], std::move(y)};
}

}  // namespace hpo
