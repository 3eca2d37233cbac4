#pragma once

#include <cmath>

#include "robreg/data.hpp"
#include "robreg/penalty.hpp"

namespace robreg {

inline constexpr double kTwoPi = 6.283185307179586476925286766559;

/// Divergence tuning parameter alpha in [0, 1]. alpha = 0 is the
/// maximum-likelihood limit; larger alpha trades efficiency for robustness.
template <typename Scalar>
struct DpdConfig {
  Scalar alpha{0};

  DpdConfig() = default;
  explicit DpdConfig(Scalar a) : alpha(a) {
    if (!(a >= Scalar(0) && a <= Scalar(1)))
      throw InvalidArgument("alpha must lie in [0, 1]");
  }
};

/// Penalized objective split into its additive parts;
/// value = unpenalized + penalty_part.
template <typename Scalar>
struct LossReport {
  Scalar value{0};
  Scalar unpenalized{0};
  Scalar penalty_part{0};
};

/// Normal density of y given a predictor row x under theta.
template <typename Scalar, typename Derived>
Scalar density_f(const Theta<Scalar>& theta,
                 const Eigen::MatrixBase<Derived>& x, Scalar y) {
  const Scalar r = y - x.dot(theta.beta);
  const Scalar s2 = theta.sigma * theta.sigma;
  return std::exp(-r * r / (2 * s2)) / std::sqrt(Scalar(kTwoPi) * s2);
}

namespace detail {

/// (2 pi)^(-alpha/2) sigma^(-alpha) (1+alpha)^(-1/2), the y-free term of the
/// per-observation loss (the alpha-power integral of the model density).
template <typename Scalar>
Scalar density_power_integral(Scalar alpha, Scalar sigma) {
  return std::pow(Scalar(kTwoPi), -alpha / 2) * std::pow(sigma, -alpha) /
         std::sqrt(1 + alpha);
}

/// f_i^alpha for all observations, computed in log space.
template <typename Scalar>
Vector<Scalar> density_pow_alpha(const Vector<Scalar>& residuals, Scalar sigma,
                                 Scalar alpha) {
  const Scalar s2 = sigma * sigma;
  const Scalar log_norm = -Scalar(0.5) * std::log(Scalar(kTwoPi) * s2);
  return (alpha * (log_norm - residuals.array().square() / (2 * s2)))
      .exp()
      .matrix();
}

}  // namespace detail

/// Per-observation loss term for alpha > 0:
/// (2 pi)^(-alpha/2) sigma^(-alpha) (1+alpha)^(-1/2) - ((1+alpha)/alpha) f^alpha.
/// Callers on the alpha = 0 branch use -log f instead.
template <typename Scalar, typename Derived>
Scalar v_term(const Theta<Scalar>& theta, const Eigen::MatrixBase<Derived>& x,
              Scalar y, Scalar alpha) {
  if (!(alpha > Scalar(0)))
    throw AlphaZero("v_term undefined at alpha = 0; use -log f");
  const Scalar f = density_f(theta, x, y);
  return detail::density_power_integral(alpha, theta.sigma) -
         (1 + alpha) / alpha * std::pow(f, alpha);
}

/// Penalized divergence objective: mean per-observation loss plus the
/// penalty over non-intercept coefficients. The theta-free constant of the
/// divergence is dropped, so values are comparable across theta at fixed
/// alpha only.
template <typename Scalar>
LossReport<Scalar> dpd_loss(const Theta<Scalar>& theta,
                            const Dataset<Scalar>& d,
                            const DpdConfig<Scalar>& cfg,
                            const PenaltySpec<Scalar>& pen) {
  if (theta.beta.size() != d.X.cols())
    throw DimensionMismatch("beta length " + std::to_string(theta.beta.size()) +
                            " vs X cols " + std::to_string(d.X.cols()));
  const Index n = d.n();
  const Scalar alpha = cfg.alpha;
  const Vector<Scalar> r = d.y - d.X * theta.beta;
  const Scalar s2 = theta.sigma * theta.sigma;

  LossReport<Scalar> report;
  if (alpha > Scalar(0)) {
    const Vector<Scalar> fa = detail::density_pow_alpha(r, theta.sigma, alpha);
    report.unpenalized = detail::density_power_integral(alpha, theta.sigma) -
                         (1 + alpha) / alpha * fa.mean();
  } else {
    report.unpenalized = Scalar(0.5) * std::log(Scalar(kTwoPi) * s2) +
                         r.squaredNorm() / (2 * Scalar(n) * s2);
  }
  report.penalty_part = penalty_total(pen, theta.beta);
  report.value = report.unpenalized + report.penalty_part;
  return report;
}

/// Gradient in beta of the unpenalized mean loss:
/// -((1+alpha)/n) sum_i u_i f_i^alpha with u_i = (r_i / sigma^2) x_i.
/// At alpha = 0 this is the negative mean score -X^T r / (n sigma^2).
template <typename Scalar>
Vector<Scalar> grad_beta(const Theta<Scalar>& theta, const Dataset<Scalar>& d,
                         const DpdConfig<Scalar>& cfg) {
  const Scalar alpha = cfg.alpha;
  const Vector<Scalar> r = d.y - d.X * theta.beta;
  const Scalar s2 = theta.sigma * theta.sigma;
  const Vector<Scalar> fa = detail::density_pow_alpha(r, theta.sigma, alpha);
  const Vector<Scalar> w = (r.array() * fa.array()).matrix();
  return -(1 + alpha) / (Scalar(d.n()) * s2) * (d.X.transpose() * w);
}

/// Hessian in beta of the unpenalized mean loss:
/// ((1+alpha)/(n sigma^2)) sum_i (1 - alpha r_i^2 / sigma^2) f_i^alpha x_i x_i^T.
template <typename Scalar>
Matrix<Scalar> hessian_beta(const Theta<Scalar>& theta, const Dataset<Scalar>& d,
                            const DpdConfig<Scalar>& cfg) {
  const Scalar alpha = cfg.alpha;
  const Vector<Scalar> r = d.y - d.X * theta.beta;
  const Scalar s2 = theta.sigma * theta.sigma;
  const Vector<Scalar> fa = detail::density_pow_alpha(r, theta.sigma, alpha);
  const Vector<Scalar> w =
      ((1 - alpha * r.array().square() / s2) * fa.array()).matrix();
  Matrix<Scalar> H = d.X.transpose() * w.asDiagonal() * d.X;
  H *= (1 + alpha) / (Scalar(d.n()) * s2);
  return Scalar(0.5) * (H + H.transpose());  // enforce exact symmetry
}

/// Left-hand side of the sigma estimating equation at fixed beta:
/// -alpha (2 pi)^(-alpha/2) sigma^(-alpha) (1+alpha)^(-1/2)
///   + ((1+alpha)/n) sum_i (1 - r_i^2/sigma^2) f_i^alpha.
template <typename Scalar>
Scalar sigma_equation(const Theta<Scalar>& theta, const Dataset<Scalar>& d,
                      const DpdConfig<Scalar>& cfg) {
  if (!(theta.sigma > Scalar(0)))
    throw NonpositiveArgument("sigma must be positive");
  const Scalar alpha = cfg.alpha;
  const Vector<Scalar> r = d.y - d.X * theta.beta;
  const Scalar s2 = theta.sigma * theta.sigma;
  const Vector<Scalar> fa = detail::density_pow_alpha(r, theta.sigma, alpha);
  const Scalar sum =
      ((1 - r.array().square() / s2) * fa.array()).sum() / Scalar(d.n());
  return -alpha * detail::density_power_integral(alpha, theta.sigma) +
         (1 + alpha) * sum;
}

/// xi_alpha = (2 pi)^(-alpha/2) sigma^(-(alpha+2)) (1+alpha)^(-3/2).
template <typename Scalar>
Scalar xi_alpha(Scalar alpha, Scalar sigma) {
  if (!(sigma > Scalar(0)))
    throw NonpositiveArgument("sigma must be positive");
  return std::pow(Scalar(kTwoPi), -alpha / 2) * std::pow(sigma, -(alpha + 2)) *
         std::pow(1 + alpha, Scalar(-1.5));
}

/// eta_alpha = (1/4) (2 pi)^(-alpha/2) sigma^(-(alpha+4)) (2+alpha^2) (1+alpha)^(-5/2).
template <typename Scalar>
Scalar eta_alpha(Scalar alpha, Scalar sigma) {
  if (!(sigma > Scalar(0)))
    throw NonpositiveArgument("sigma must be positive");
  return Scalar(0.25) * std::pow(Scalar(kTwoPi), -alpha / 2) *
         std::pow(sigma, -(alpha + 4)) * (2 + alpha * alpha) *
         std::pow(1 + alpha, Scalar(-2.5));
}

/// Upper-triangular factor Z with Z^T Z = H for a (near) PSD matrix H.
/// If the factorization fails, escalating diagonal jitter
/// 10^-8 .. 10^-2 times (1 + max diagonal) is applied before giving up.
template <typename Scalar>
Matrix<Scalar> jittered_cholesky_factor(Matrix<Scalar> H) {
  const Scalar base = 1 + H.diagonal().maxCoeff();
  Scalar jitter(0);
  for (int attempt = 0; attempt <= 7; ++attempt) {
    Eigen::LLT<Matrix<Scalar>> llt(H +
                                   jitter * Matrix<Scalar>::Identity(H.rows(), H.cols()));
    if (llt.info() == Eigen::Success)
      return llt.matrixU();
    jitter = (attempt == 0) ? Scalar(1e-8) * base : jitter * 10;
    if (jitter > Scalar(1e-2) * base * Scalar(1.0000001)) break;
  }
  throw IndefiniteSurrogate("loss curvature not positive definite after jitter");
}

}  // namespace robreg
