#pragma once

#include <cmath>
#include <deque>
#include <limits>
#include <vector>

#include "hpo/pipeline/tensor.hpp"

namespace hpo {

template <class Scalar>
struct SvmParams {
  Scalar C = 1;           // objective is squared hinge + (1/C)|w|^2
  Scalar var_cutoff = 0;  // columns with variance below this are dropped
  int max_iterations = 300;
  Scalar grad_tol = Scalar(1e-5);
  int memory = 10;  // L-BFGS history pairs
};

/// One-vs-rest linear classifier over column-normalised features.
template <class Scalar>
struct LinearModel {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  Matrix weights;              // kept features x classes
  Vector<Scalar> bias;         // classes
  Vector<Scalar> mean, scale;  // per kept column
  std::vector<bool> keep;      // per input column
  std::vector<Scalar> objective;  // initial value, then one entry per solver iteration
  Scalar gradient_norm = 0;

  Index classes() const { return weights.cols(); }

  template <class Derived>
  Matrix normalise(const Eigen::MatrixBase<Derived>& X) const {
    if (X.cols() != static_cast<Index>(keep.size())) throw PipelineError("svm: feature width does not match the model");
    Matrix Z(X.rows(), weights.rows());
    for (Index c = 0, out = 0; c < X.cols(); ++c)
      if (keep[static_cast<std::size_t>(c)]) {
        Z.col(out) = (X.col(c).array() - mean(out)) / scale(out);
        ++out;
      }
    return Z;
  }

  template <class Derived>
  Matrix decision(const Eigen::MatrixBase<Derived>& X) const {
    return (normalise(X) * weights).rowwise() + bias.transpose();
  }

  template <class Derived>
  std::vector<int> predict(const Eigen::MatrixBase<Derived>& X) const {
    const Matrix s = decision(X);
    std::vector<int> out(static_cast<std::size_t>(s.rows()));
    for (Index r = 0; r < s.rows(); ++r) {
      Index best;
      s.row(r).maxCoeff(&best);
      out[static_cast<std::size_t>(r)] = static_cast<int>(best);
    }
    return out;
  }
};

namespace detail {

// Squared hinge one-vs-rest objective over theta = [W; b^T] ((F+1) x K).
template <class Scalar>
struct SvmObjective {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  const Matrix& Z;
  const Matrix& Y;  // +1 / -1
  Scalar inv_c;

  Scalar operator()(const Matrix& theta, Matrix* grad) const {
    const Index F = Z.cols();
    const Matrix s = (Z * theta.topRows(F)).rowwise() + theta.row(F);
    const Matrix m = (Scalar(1) - (Y.array() * s.array())).max(Scalar(0)).matrix();
    const Scalar f = m.squaredNorm() + inv_c * theta.topRows(F).squaredNorm();
    if (grad) {
      const Matrix g = Scalar(-2) * (Y.array() * m.array()).matrix();
      grad->resize(theta.rows(), theta.cols());
      grad->topRows(F) = Z.transpose() * g + Scalar(2) * inv_c * theta.topRows(F);
      grad->row(F) = g.colwise().sum();
    }
    return f;
  }
};

}  // namespace detail

/// Trains with L-BFGS and an Armijo backtracking line search, so the recorded
/// objective never increases. Labels are 0..n-1 and every class needs an example.
template <class Scalar, class Derived>
LinearModel<Scalar> train_linear_svm(const Eigen::MatrixBase<Derived>& X, const std::vector<int>& labels,
                                     const SvmParams<Scalar>& params) {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  if (!(params.C > 0) || !std::isfinite(params.C)) throw PipelineError("svm: C must be positive");
  if (!(params.var_cutoff >= 0)) throw PipelineError("svm: variance cutoff must be >= 0");
  if (X.rows() != static_cast<Index>(labels.size()) || X.rows() == 0) throw PipelineError("svm: one label per row required");
  if (!X.allFinite()) throw PipelineError("svm: non-finite features");

  int K = 0;
  for (int y : labels) {
    if (y < 0) throw PipelineError("svm: labels must be >= 0");
    K = std::max(K, y + 1);
  }
  std::vector<int> per_class(static_cast<std::size_t>(K), 0);
  for (int y : labels) ++per_class[static_cast<std::size_t>(y)];
  if (K < 2) throw PipelineError("svm: need at least 2 classes, got a single class");
  for (int c = 0; c < K; ++c)
    if (per_class[static_cast<std::size_t>(c)] == 0) throw PipelineError("svm: class " + std::to_string(c) + " has no examples");

  LinearModel<Scalar> model;
  const Index N = X.rows();
  const Vector<Scalar> mu = X.colwise().mean().transpose().template cast<Scalar>();
  const Vector<Scalar> var = ((X.rowwise() - mu.transpose()).array().square().colwise().sum() / Scalar(N)).transpose();
  model.keep.resize(static_cast<std::size_t>(X.cols()));
  std::vector<Index> kept;
  for (Index c = 0; c < X.cols(); ++c) {
    const bool k = !(var(c) < params.var_cutoff);
    model.keep[static_cast<std::size_t>(c)] = k;
    if (k) kept.push_back(c);
  }
  if (kept.empty()) throw PipelineError("svm: every feature column fell below the variance cutoff");
  const Index F = static_cast<Index>(kept.size());
  model.mean.resize(F);
  model.scale.resize(F);
  for (Index i = 0; i < F; ++i) {
    model.mean(i) = mu(kept[static_cast<std::size_t>(i)]);
    const Scalar sd = std::sqrt(var(kept[static_cast<std::size_t>(i)]));
    model.scale(i) = sd > 0 ? sd : Scalar(1);
  }
  model.weights.resize(F, K);
  const Matrix Z = model.normalise(X);
  Matrix Y = -Matrix::Ones(N, K);
  for (Index r = 0; r < N; ++r) Y(r, labels[static_cast<std::size_t>(r)]) = 1;

  const detail::SvmObjective<Scalar> obj{Z, Y, Scalar(1) / params.C};
  Matrix theta = Matrix::Zero(F + 1, K), grad, trial_grad;
  Scalar f = obj(theta, &grad);
  model.objective.push_back(f);
  std::deque<std::pair<Matrix, Matrix>> history;  // (s, y) pairs, newest last

  for (int it = 0; it < params.max_iterations; ++it) {
    const Scalar gnorm = grad.norm();
    if (gnorm <= params.grad_tol) break;

    // Two-loop recursion.
    Matrix d = -grad;
    std::vector<Scalar> alpha(history.size());
    for (std::size_t h = history.size(); h-- > 0;) {
      const auto& [s, y] = history[h];
      alpha[h] = s.cwiseProduct(d).sum() / y.cwiseProduct(s).sum();
      d -= alpha[h] * y;
    }
    if (!history.empty()) {
      const auto& [s, y] = history.back();
      d *= s.cwiseProduct(y).sum() / y.squaredNorm();
    }
    for (std::size_t h = 0; h < history.size(); ++h) {
      const auto& [s, y] = history[h];
      const Scalar beta = y.cwiseProduct(d).sum() / y.cwiseProduct(s).sum();
      d += (alpha[h] - beta) * s;
    }
    Scalar slope = grad.cwiseProduct(d).sum();
    if (!(slope < 0)) {
      history.clear();
      d = -grad;
      slope = -gnorm * gnorm;
    }

    Scalar step = history.empty() ? std::min(Scalar(1), Scalar(1) / gnorm) : Scalar(1);
    Matrix next;
    Scalar f_next = std::numeric_limits<Scalar>::infinity();
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls, step *= Scalar(0.5)) {
      next = theta + step * d;
      f_next = obj(next, &trial_grad);
      if (f_next <= f + Scalar(1e-4) * step * slope) {
        accepted = true;
        break;
      }
    }
    if (!accepted) break;  // no further decrease at working precision

    Matrix s = next - theta, y = trial_grad - grad;
    if (s.cwiseProduct(y).sum() > std::numeric_limits<Scalar>::epsilon() * y.squaredNorm()) {
      history.emplace_back(std::move(s), std::move(y));
      if (static_cast<int>(history.size()) > params.memory) history.pop_front();
    }
    theta = std::move(next);
    grad = trial_grad;
    f = f_next;
    model.objective.push_back(f);
  }

  model.gradient_norm = grad.norm();
  model.weights = theta.topRows(F);
  model.bias = theta.row(F).transpose();
  return model;
}

}  // namespace hpo
