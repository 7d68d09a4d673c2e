#pragma once

#include <cmath>
#include <numbers>

#include "blr/common.hpp"
#include "blr/data.hpp"

namespace blr {

/// Logistic function, evaluated so that exp never overflows.
template <typename S>
S sigmoid(S z) {
  using std::exp;
  if (z >= 0) return S(1) / (S(1) + exp(-z));
  S e = exp(z);
  return e / (S(1) + e);
}

/// log(sigmoid(z)) without cancellation or overflow.
template <typename S>
S log_sigmoid(S z) {
  using std::exp;
  using std::log1p;
  if (z >= 0) return -log1p(exp(-z));
  return z - log1p(exp(z));
}

/// Independent Gaussian prior on each coefficient.
template <typename S>
struct ModelSpec {
  Vec<S> prior_mean;
  Vec<S> prior_variance;

  static ModelSpec weakly_informative(Eigen::Index dim, S variance = S(1000)) {
    return {Vec<S>::Zero(dim), Vec<S>::Constant(dim, variance)};
  }

  Eigen::Index dim() const { return prior_mean.size(); }

  void validate(Eigen::Index expected_dim) const {
    if (prior_mean.size() != expected_dim || prior_variance.size() != expected_dim) {
      throw config_error("model.spec", "prior dimension does not match the design matrix");
    }
    if (!(prior_variance.array() > S(0)).all()) {
      throw config_error("model.spec", "prior variances must be positive");
    }
  }
};

namespace detail {
inline void check_dims(Eigen::Index theta, Eigen::Index cols, Eigen::Index rows, Eigen::Index y) {
  if (theta != cols || rows != y) throw numeric_error("model", "dimension mismatch");
}
}  // namespace detail

template <typename DT, typename DX, typename DY>
typename DT::Scalar log_likelihood(const Eigen::MatrixBase<DT>& theta,
                                   const Eigen::MatrixBase<DX>& X,
                                   const Eigen::MatrixBase<DY>& y) {
  using S = typename DT::Scalar;
  detail::check_dims(theta.size(), X.cols(), X.rows(), y.size());
  const Vec<S> eta = X * theta;
  S total = 0;
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    total += y(i) * log_sigmoid(eta(i)) + (S(1) - y(i)) * log_sigmoid(-eta(i));
  }
  return total;
}

template <typename DT>
typename DT::Scalar log_likelihood(const Eigen::MatrixBase<DT>& theta, const Dataset& ds) {
  return log_likelihood(theta, ds.X, ds.y);
}

template <typename DT, typename S>
S log_prior(const Eigen::MatrixBase<DT>& theta, const ModelSpec<S>& spec) {
  if (theta.size() != spec.dim()) throw numeric_error("model", "dimension mismatch");
  const auto& v = spec.prior_variance.array();
  return (-S(0.5) * (S(2) * std::numbers::pi_v<S> * v).log() -
          (theta.derived().array() - spec.prior_mean.array()).square() / (S(2) * v))
      .sum();
}

/// Unnormalized log posterior: log likelihood plus log prior.
template <typename DT, typename DX, typename DY, typename S>
S log_posterior(const Eigen::MatrixBase<DT>& theta, const Eigen::MatrixBase<DX>& X,
                const Eigen::MatrixBase<DY>& y, const ModelSpec<S>& spec) {
  return log_likelihood(theta, X, y) + log_prior(theta, spec);
}

template <typename DT, typename S>
S log_posterior(const Eigen::MatrixBase<DT>& theta, const Dataset& ds, const ModelSpec<S>& spec) {
  return log_posterior(theta, ds.X, ds.y, spec);
}

/// X^T (y - sigmoid(X theta)) - (theta - m) / v
template <typename DT, typename DX, typename DY, typename S>
Vec<S> grad_log_posterior(const Eigen::MatrixBase<DT>& theta, const Eigen::MatrixBase<DX>& X,
                          const Eigen::MatrixBase<DY>& y, const ModelSpec<S>& spec) {
  detail::check_dims(theta.size(), X.cols(), X.rows(), y.size());
  if (theta.size() != spec.dim()) throw numeric_error("model", "dimension mismatch");
  Vec<S> resid = (X * theta).unaryExpr([](S z) { return sigmoid(z); });
  resid = y - resid;
  Vec<S> grad = X.transpose() * resid;
  grad.array() -= (theta.derived().array() - spec.prior_mean.array()) / spec.prior_variance.array();
  return grad;
}

template <typename DT, typename S>
Vec<S> grad_log_posterior(const Eigen::MatrixBase<DT>& theta, const Dataset& ds,
                          const ModelSpec<S>& spec) {
  return grad_log_posterior(theta, ds.X, ds.y, spec);
}

/**
 * Log posterior of a logistic regression as a sampler target.
 *
 * Calling the object evaluates the log density and writes its gradient,
 * sharing one pass over the linear predictor.
 */
template <typename S>
class LogisticPosterior {
 public:
  LogisticPosterior(Mat<S> X, Vec<S> y, ModelSpec<S> spec)
      : X_(std::move(X)), y_(std::move(y)), spec_(std::move(spec)) {
    detail::check_dims(spec_.dim(), X_.cols(), X_.rows(), y_.size());
    spec_.validate(X_.cols());
  }

  S operator()(const Vec<S>& theta, Vec<S>& grad) const {
    const Vec<S> eta = X_ * theta;
    Vec<S> resid(eta.size());
    S logp = 0;
    using std::abs;
    using std::exp;
    using std::log1p;
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
      const S z = eta(i);
      const S e = exp(-abs(z));
      const S l = log1p(e);
      const S log_p = z >= 0 ? -l : z - l;   // log sigmoid(z)
      const S log_q = z >= 0 ? -z - l : -l;  // log sigmoid(-z)
      logp += y_(i) * log_p + (S(1) - y_(i)) * log_q;
      resid(i) = y_(i) - (z >= 0 ? S(1) / (S(1) + e) : e / (S(1) + e));
    }
    grad.noalias() = X_.transpose() * resid;
    const auto diff = (theta.array() - spec_.prior_mean.array()).eval();
    grad.array() -= diff / spec_.prior_variance.array();
    logp += log_prior(theta, spec_);
    return logp;
  }

  Eigen::Index dim() const { return X_.cols(); }

 private:
  Mat<S> X_;
  Vec<S> y_;
  ModelSpec<S> spec_;
};

/// Posterior mode by Newton's method; the log posterior is strictly concave.
template <typename S>
Vec<S> posterior_mode(const Mat<S>& X, const Vec<S>& y, const ModelSpec<S>& spec,
                      int max_iter = 100, S tol = S(1e-10)) {
  Vec<S> theta = spec.prior_mean;
  for (int it = 0; it < max_iter; ++it) {
    const Vec<S> grad = grad_log_posterior(theta, X, y, spec);
    const Vec<S> p = (X * theta).unaryExpr([](S z) { return sigmoid(z); });
    const Vec<S> w = (p.array() * (S(1) - p.array())).matrix();
    Mat<S> hess = X.transpose() * w.asDiagonal() * X;
    hess.diagonal().array() += S(1) / spec.prior_variance.array();
    const Vec<S> step = hess.ldlt().solve(grad);
    theta += step;
    if (step.norm() < tol) break;
  }
  return theta;
}

}  // namespace blr
