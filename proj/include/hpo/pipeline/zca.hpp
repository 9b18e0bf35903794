#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <span>

#include "hpo/pipeline/tensor.hpp"

namespace hpo {

template <class Scalar>
struct Whitening {
  Vector<Scalar> mean;
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> transform;  // symmetric
  Vector<Scalar> eigenvalues;                                        // of the patch covariance, ascending

  /// Whitens one patch per row.
  RowMatrix<Scalar> apply(const RowMatrix<Scalar>& patches) const {
    return (patches.rowwise() - mean.transpose()) * transform;
  }
};

/// ZCA transform of the rows of `patches`: E diag(1/sqrt(lambda + bandpass)) E^T
/// from the eigendecomposition of the unbiased patch covariance.
template <class Scalar>
Whitening<Scalar> zca_fit(const RowMatrix<Scalar>& patches, Scalar bandpass) {
  const Index N = patches.rows(), D = patches.cols();
  if (N < 2 || D < 1) throw PipelineError("zca: need at least 2 patches of dimension >= 1");
  if (!(bandpass >= 0) || !std::isfinite(bandpass)) throw PipelineError("zca: bandpass must be >= 0");
  if (!patches.allFinite()) throw PipelineError("zca: non-finite patch entries");

  Whitening<Scalar> w;
  w.mean = patches.colwise().mean().transpose();
  const RowMatrix<Scalar> centered = patches.rowwise() - w.mean.transpose();
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> cov =
      Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>::Zero(D, D);
  cov.template selfadjointView<Eigen::Lower>().rankUpdate(centered.transpose(), Scalar(1) / Scalar(N - 1));
  cov = cov.template selfadjointView<Eigen::Lower>();

  Eigen::SelfAdjointEigenSolver<Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>> es(cov);
  if (es.info() != Eigen::Success) throw PipelineError("zca: eigendecomposition failed");
  w.eigenvalues = es.eigenvalues();
  const Scalar top = w.eigenvalues.maxCoeff();
  const Scalar tol = std::max(top, Scalar(1)) * Scalar(D) * std::numeric_limits<Scalar>::epsilon();
  const Index rank = (w.eigenvalues.array() > tol).count();
  if (rank == 0 || (bandpass == 0 && rank < D))
    throw PipelineError("zca: patch covariance is rank deficient (rank " + std::to_string(rank) + " of " +
                        std::to_string(D) + ")");

  const Vector<Scalar> scale = (w.eigenvalues.array().max(Scalar(0)) + bandpass).rsqrt().matrix();
  w.transform = es.eigenvectors() * scale.asDiagonal() * es.eigenvectors().transpose();
  w.transform = Scalar(0.5) * (w.transform + w.transform.transpose()).eval();
  return w;
}

/// `n` patches of side `size` drawn uniformly over maps and positions.
template <class Scalar>
RowMatrix<Scalar> sample_patches(std::span<const FeatureMap<Scalar>> maps, Index size, Index n, std::uint64_t seed) {
  if (maps.empty()) throw PipelineError("sample_patches: no maps");
  const FeatureMap<Scalar>& first = maps.front();
  if (size < 1 || size > first.rows() || size > first.cols()) throw PipelineError("sample_patches: patch exceeds map");
  const Index C = first.channels(), run = size * C;
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, maps.size() - 1);
  std::uniform_int_distribution<Index> row(0, first.rows() - size), col(0, first.cols() - size);
  RowMatrix<Scalar> out(n, size * run);
  for (Index r = 0; r < n; ++r) {
    const FeatureMap<Scalar>& m = maps[pick(rng)];
    const Index i = row(rng), j = col(rng);
    for (Index di = 0; di < size; ++di)
      std::copy_n(m.pixels().data() + ((i + di) * m.cols() + j) * C, run, out.row(r).data() + di * run);
  }
  return out;
}

struct FilterSpec {
  FilterStrategy strategy = FilterStrategy::random_uniform;
  Index count = 16;
  Index size = 3;
  double bandpass = 0.0;  // ZCA strategies only
  std::uint64_t seed = 0;
};

/// random_uniform: U(0,1) entries, then each filter centred and scaled to unit
/// norm. zca_projection: W r for random unit directions r. zca_patches:
/// W (x - mean) for randomly chosen rows x of `patches`.
template <class Scalar>
FilterBank<Scalar> generate_filters(const FilterSpec& spec, Index channels, const RowMatrix<Scalar>* patches = nullptr) {
  if (spec.count < 1) throw PipelineError("generate_filters: filter count must be >= 1");
  if (spec.size < 2) throw PipelineError("generate_filters: filter size must be >= 2");
  if (channels < 1) throw PipelineError("generate_filters: channels must be >= 1");
  const Index D = spec.size * spec.size * channels;

  FilterBank<Scalar> bank;
  bank.size = spec.size;
  bank.channels = channels;
  bank.strategy = spec.strategy;
  bank.seed = spec.seed;
  bank.weights.resize(spec.count, D);
  std::mt19937_64 rng(spec.seed);

  if (spec.strategy == FilterStrategy::random_uniform) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (Index k = 0; k < spec.count; ++k) {
      auto f = bank.weights.row(k);
      for (Index d = 0; d < D; ++d) f(d) = static_cast<Scalar>(u(rng));
      f.array() -= f.mean();
      const Scalar n = f.norm();
      if (n > 0) f /= n;
    }
    return bank;
  }

  if (!patches) throw PipelineError(std::string("generate_filters: ") + strategy_name(spec.strategy) + " needs patch data");
  if (patches->cols() != D) throw PipelineError("generate_filters: patch dimension does not match filter shape");
  const Whitening<Scalar> w = zca_fit(*patches, static_cast<Scalar>(spec.bandpass));

  if (spec.strategy == FilterStrategy::zca_projection) {
    std::normal_distribution<double> g(0.0, 1.0);
    Vector<Scalar> r(D);
    for (Index k = 0; k < spec.count; ++k) {
      for (Index d = 0; d < D; ++d) r(d) = static_cast<Scalar>(g(rng));
      r /= r.norm();
      bank.weights.row(k) = (w.transform * r).transpose();
    }
  } else {
    std::uniform_int_distribution<Index> pick(0, patches->rows() - 1);
    for (Index k = 0; k < spec.count; ++k)
      bank.weights.row(k) = (patches->row(pick(rng)) - w.mean.transpose()) * w.transform;
  }
  return bank;
}

}  // namespace hpo
