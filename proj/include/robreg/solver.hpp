#pragma once

#include <cmath>
#include <iostream>
#include <limits>
#include <utility>

#include "robreg/model.hpp"

namespace robreg {

/// Quadratic model of the unpenalized mean loss around theta: an
/// upper-triangular Z with Z^T Z equal to the (jittered) beta-Hessian and a
/// pseudo-response Ystar with Z^T Ystar = Hessian * beta - gradient, so that
/// (1/2) ||Ystar - Z b||^2 reproduces the loss gradient and curvature at
/// theta.beta.
template <typename Scalar>
std::pair<Matrix<Scalar>, Vector<Scalar>> quadratic_surrogate(
    const Theta<Scalar>& theta, const Dataset<Scalar>& d,
    const DpdConfig<Scalar>& cfg) {
  const Matrix<Scalar> H = hessian_beta(theta, d, cfg);
  const Vector<Scalar> g = grad_beta(theta, d, cfg);
  Matrix<Scalar> Z = jittered_cholesky_factor(H);
  // Solve Z^T Ystar = (Z^T Z) beta - g by forward substitution.
  Vector<Scalar> rhs = Z.transpose() * (Z * theta.beta) - g;
  Vector<Scalar> ystar =
      Z.transpose().template triangularView<Eigen::Lower>().solve(rhs);
  return {std::move(Z), std::move(ystar)};
}

template <typename Scalar>
struct InnerResult {
  Vector<Scalar> beta;
  int sweeps{0};
  bool converged{false};
};

namespace detail {

/// Minimizer of (d/2)(b - z)^2 + P(|b|) over b for one coordinate with
/// curvature d > 0. For SCAD the three branch candidates are compared by
/// objective value, which stays correct when d(a-1) <= 1.
template <typename Scalar>
Scalar coordinate_minimizer(const PenaltySpec<Scalar>& pen, Scalar z, Scalar d) {
  const Scalar lam = pen.lambda;
  switch (pen.family) {
    case PenaltyFamily::kNone:
      return z;
    case PenaltyFamily::kL1: {
      const Scalar t = lam / d;
      if (z > t) return z - t;
      if (z < -t) return z + t;
      return Scalar(0);
    }
    case PenaltyFamily::kScad: {
      if (lam == Scalar(0)) return z;
      const Scalar a = pen.scad_a;
      const Scalar az = std::abs(z);
      const Scalar sign = z >= Scalar(0) ? Scalar(1) : Scalar(-1);
      auto objective = [&](Scalar b) {
        return d / 2 * (b - z) * (b - z) + penalty_value(pen, std::abs(b));
      };
      // Candidate per branch, clamped into that branch's region.
      Scalar best = Scalar(0);
      Scalar best_obj = objective(Scalar(0));
      {  // |b| <= lam: soft threshold
        Scalar b = sign * std::min(std::max(az - lam / d, Scalar(0)), lam);
        if (objective(b) < best_obj) { best = b; best_obj = objective(b); }
      }
      if (d * (a - 1) != Scalar(1)) {  // lam < |b| <= a lam
        Scalar mag = (d * (a - 1) * az - a * lam) / (d * (a - 1) - 1);
        mag = std::min(std::max(mag, lam), a * lam);
        Scalar b = sign * mag;
        if (objective(b) < best_obj) { best = b; best_obj = objective(b); }
      }
      {  // |b| > a lam: penalty flat
        Scalar b = sign * std::max(az, a * lam);
        if (objective(b) < best_obj) { best = b; best_obj = objective(b); }
      }
      return best;
    }
  }
  return z;
}

}  // namespace detail

/// Cyclic coordinate descent for
///   min_b (1/(2 n_obs)) ||Ystar - Z b||^2 + sum_{j>=1} P_lambda(|b_j|),
/// with the intercept coordinate unpenalized. Returns the iterate with a
/// convergence flag; the flag is false when max_sweeps is exhausted.
template <typename Scalar>
InnerResult<Scalar> inner_pls_solve(const Matrix<Scalar>& Z,
                                    const Vector<Scalar>& ystar,
                                    const PenaltySpec<Scalar>& penalty,
                                    Vector<Scalar> warm_start, Index n_obs,
                                    const InnerConfig<Scalar>& inner = {}) {
  const Index q = Z.cols();
  if (warm_start.size() != q)
    throw DimensionMismatch("warm start length does not match Z columns");
  const Matrix<Scalar> G = Z.transpose() * Z;
  const Vector<Scalar> c = Z.transpose() * ystar;
  const Scalar n = Scalar(n_obs);

  Vector<Scalar> b = std::move(warm_start);
  Vector<Scalar> Gb = G * b;

  InnerResult<Scalar> result;
  for (int sweep = 0; sweep < inner.max_sweeps; ++sweep) {
    Scalar max_change(0);
    for (Index j = 0; j < q; ++j) {
      const Scalar gjj = G(j, j);
      Scalar bj_new;
      if (gjj <= std::numeric_limits<Scalar>::min()) {
        bj_new = Scalar(0);  // coordinate carries no information
      } else {
        const Scalar z = (c[j] - (Gb[j] - gjj * b[j])) / gjj;
        if (j == 0) {
          bj_new = z;
        } else {
          bj_new = detail::coordinate_minimizer(penalty, z, gjj / n);
        }
      }
      const Scalar delta = bj_new - b[j];
      if (delta != Scalar(0)) {
        Gb += delta * G.col(j);
        b[j] = bj_new;
        max_change = std::max(max_change, std::abs(delta));
      }
    }
    result.sweeps = sweep + 1;
    if (max_change < inner.tol) {
      result.converged = true;
      break;
    }
  }
  result.beta = std::move(b);
  return result;
}

/// Largest penalty level that keeps every penalized coordinate at zero:
/// the max over j >= 1 of |grad_j| at the intercept-only fit.
template <typename Scalar>
Scalar lambda_max(const Theta<Scalar>& intercept_only, const Dataset<Scalar>& d,
                  const DpdConfig<Scalar>& cfg) {
  const Vector<Scalar> g = grad_beta(intercept_only, d, cfg);
  Scalar bound(0);
  for (Index j = 1; j < g.size(); ++j) bound = std::max(bound, std::abs(g[j]));
  return bound;
}

namespace detail {

template <typename Scalar>
Scalar unpenalized_loss_at_sigma(const Vector<Scalar>& residuals, Scalar sigma,
                                 Scalar alpha) {
  const Index n = residuals.size();
  const Scalar s2 = sigma * sigma;
  if (alpha > Scalar(0)) {
    const Vector<Scalar> fa = density_pow_alpha(residuals, sigma, alpha);
    return density_power_integral(alpha, sigma) -
           (1 + alpha) / alpha * fa.mean();
  }
  return Scalar(0.5) * std::log(Scalar(kTwoPi) * s2) +
         residuals.squaredNorm() / (2 * Scalar(n) * s2);
}

}  // namespace detail

/// Scale update: minimizes the unpenalized loss over sigma at fixed beta by
/// golden-section search on log sigma. The bracket defaults to
/// [1e-3 s, 1e3 s] around the robust residual scale s and is expanded up to
/// three times if the coarse scan puts the minimum at an endpoint.
template <typename Scalar>
Scalar update_sigma(const Vector<Scalar>& beta, const Dataset<Scalar>& d,
                    const DpdConfig<Scalar>& cfg,
                    std::pair<Scalar, Scalar> bracket = {Scalar(0), Scalar(0)}) {
  const Vector<Scalar> r = d.y - d.X * beta;
  const Scalar alpha = cfg.alpha;
  Scalar lo = bracket.first;
  Scalar hi = bracket.second;
  if (!(lo > Scalar(0)) || !(hi > lo)) {
    Scalar s = robust_scale(r);
    if (!(s > Scalar(0))) s = std::max(r.cwiseAbs().maxCoeff(), Scalar(1e-12));
    lo = Scalar(1e-3) * s;
    hi = Scalar(1e3) * s;
  }

  auto loss = [&](Scalar log_sigma) {
    return detail::unpenalized_loss_at_sigma(r, std::exp(log_sigma), alpha);
  };

  // Coarse scan to certify an interior minimum; expand on endpoint hits.
  constexpr int kScanPoints = 33;
  Scalar a = std::log(lo), bnd = std::log(hi);
  int expansions = 0;
  Index best = 0;
  Vector<Scalar> grid(kScanPoints), vals(kScanPoints);
  while (true) {
    for (int i = 0; i < kScanPoints; ++i) {
      grid[i] = a + (bnd - a) * Scalar(i) / Scalar(kScanPoints - 1);
      vals[i] = loss(grid[i]);
    }
    vals.minCoeff(&best);
    if (best > 0 && best < kScanPoints - 1) break;
    if (expansions == 3)
      throw BracketFailure("no interior sigma minimum after 3 expansions");
    ++expansions;
    const Scalar width = bnd - a;
    if (best == 0) a -= width;
    else bnd += width;
  }

  // Golden-section search inside the bracketing triple.
  constexpr Scalar kInvPhi = Scalar(0.61803398874989484820458683436564);
  Scalar x_lo = grid[best - 1], x_hi = grid[best + 1];
  Scalar x1 = x_hi - kInvPhi * (x_hi - x_lo);
  Scalar x2 = x_lo + kInvPhi * (x_hi - x_lo);
  Scalar f1 = loss(x1), f2 = loss(x2);
  while (x_hi - x_lo > Scalar(1e-14) + Scalar(1e-10) * std::abs(x_lo + x_hi) / 2) {
    if (f1 < f2) {
      x_hi = x2; x2 = x1; f2 = f1;
      x1 = x_hi - kInvPhi * (x_hi - x_lo);
      f1 = loss(x1);
    } else {
      x_lo = x1; x1 = x2; f1 = f2;
      x2 = x_lo + kInvPhi * (x_hi - x_lo);
      f2 = loss(x2);
    }
  }
  return std::exp((x_lo + x_hi) / 2);
}

namespace detail {

template <typename Scalar>
FittedModel<Scalar> finalize_model(Theta<Scalar> theta, const Dataset<Scalar>& d,
                                   const FitConfig<Scalar>& cfg, bool converged,
                                   int iters) {
  for (Index j = 0; j < theta.beta.size(); ++j)
    if (std::abs(theta.beta[j]) <= cfg.zero_threshold) theta.beta[j] = Scalar(0);

  const DpdConfig<Scalar> dpd(cfg.alpha);
  FittedModel<Scalar> model;
  model.loss = dpd_loss(theta, d, dpd, cfg.penalty);
  model.sigma_equation_residual = sigma_equation(theta, d, dpd);
  model.active = active_set_of(theta.beta, cfg.zero_threshold);
  model.theta = std::move(theta);
  model.converged = converged;
  model.outer_iters = iters;
  model.alpha = cfg.alpha;
  model.penalty = cfg.penalty;
  return model;
}

}  // namespace detail

/// Ordinary least squares with maximum-likelihood scale. Throws
/// SingularDesign when X is column-rank deficient.
template <typename Scalar>
FittedModel<Scalar> fit_ols(const Dataset<Scalar>& d) {
  d.validate();
  Eigen::ColPivHouseholderQR<Matrix<Scalar>> qr(d.X);
  if (qr.rank() < d.X.cols())
    throw SingularDesign("design matrix is rank deficient");
  Theta<Scalar> theta;
  theta.beta = qr.solve(d.y);
  const Vector<Scalar> r = d.y - d.X * theta.beta;
  theta.sigma = std::max(std::sqrt(r.squaredNorm() / Scalar(d.n())),
                         Scalar(1e-12));
  FitConfig<Scalar> cfg;  // alpha 0, no penalty
  return detail::finalize_model(std::move(theta), d, cfg, true, 1);
}

/// Huber M-estimator via iteratively reweighted least squares
/// (tuning constant 1.345, MAD residual scale). Scale in the returned model
/// is the final robust residual scale.
template <typename Scalar>
FittedModel<Scalar> fit_huber_pilot(const Dataset<Scalar>& d) {
  d.validate();
  constexpr Scalar kTuning = Scalar(1.345);
  FittedModel<Scalar> ols = fit_ols(d);
  Vector<Scalar> beta = ols.theta.beta;
  Scalar scale = ols.theta.sigma;
  int iters = 0;
  bool converged = false;
  for (; iters < 50; ++iters) {
    const Vector<Scalar> r = d.y - d.X * beta;
    scale = std::max(robust_scale(r), Scalar(1e-12));
    Vector<Scalar> w(d.n());
    for (Index i = 0; i < d.n(); ++i) {
      const Scalar az = std::abs(r[i]) / scale;
      w[i] = az <= kTuning ? Scalar(1) : kTuning / az;
    }
    const Matrix<Scalar> Xw = w.asDiagonal() * d.X;
    Matrix<Scalar> G = d.X.transpose() * Xw;
    Vector<Scalar> rhs = Xw.transpose() * d.y;
    Vector<Scalar> beta_new = G.ldlt().solve(rhs);
    const Scalar change = (beta_new - beta).template lpNorm<Eigen::Infinity>() /
                          (1 + beta.template lpNorm<Eigen::Infinity>());
    beta = std::move(beta_new);
    if (change < Scalar(1e-8)) {
      converged = true;
      ++iters;
      break;
    }
  }
  Theta<Scalar> theta;
  theta.beta = std::move(beta);
  theta.sigma = std::max(robust_scale(Vector<Scalar>(d.y - d.X * theta.beta)),
                         Scalar(1e-12));
  FitConfig<Scalar> cfg;
  return detail::finalize_model(std::move(theta), d, cfg, converged, iters);
}

/// Intercept-plus-scale fit (all slopes zero): alternates a 1-D search for
/// the intercept with the sigma update. Used as the null model anchoring
/// grid tops.
template <typename Scalar>
Theta<Scalar> fit_intercept_only(const Dataset<Scalar>& d,
                                 const DpdConfig<Scalar>& cfg) {
  Theta<Scalar> theta;
  theta.beta = Vector<Scalar>::Zero(d.X.cols());
  theta.beta[0] = median<Scalar>(d.y);
  theta.sigma =
      std::max(robust_scale(Vector<Scalar>(d.y.array() - theta.beta[0])),
               Scalar(1e-12));
  for (int iter = 0; iter < 50; ++iter) {
    const Theta<Scalar> prev = theta;
    // Newton-bisection hybrid via the surrogate on the intercept coordinate.
    const Vector<Scalar> r = d.y.array() - theta.beta[0];
    const Vector<Scalar> fa =
        detail::density_pow_alpha(r, theta.sigma, cfg.alpha);
    const Scalar s2 = theta.sigma * theta.sigma;
    const Scalar g = -(1 + cfg.alpha) / (Scalar(d.n()) * s2) *
                     (r.array() * fa.array()).sum();
    const Scalar h = (1 + cfg.alpha) / (Scalar(d.n()) * s2) *
                     ((1 - cfg.alpha * r.array().square() / s2) * fa.array())
                         .sum();
    if (h > Scalar(0)) theta.beta[0] -= g / h;
    theta.sigma = update_sigma(theta.beta, d, cfg);
    const Scalar change =
        std::max(std::abs(theta.beta[0] - prev.beta[0]),
                 std::abs(theta.sigma - prev.sigma)) /
        (1 + std::abs(prev.beta[0]) + prev.sigma);
    if (change < Scalar(1e-10)) break;
  }
  return theta;
}

/// Penalized minimum-divergence fit: alternates the quadratic-surrogate
/// beta step (penalized least squares by coordinate descent) with the 1-D
/// sigma step until the parameter vector stabilizes. Step-halving toward
/// the previous beta keeps the penalized objective non-increasing.
template <typename Scalar>
FittedModel<Scalar> fit_mdpde(const Dataset<Scalar>& d,
                              const FitConfig<Scalar>& cfg) {
  d.validate();
  cfg.validate();
  const DpdConfig<Scalar> dpd(cfg.alpha);

  Theta<Scalar> theta;
  switch (cfg.init) {
    case InitKind::kOls:
      theta = fit_ols(d).theta;
      break;
    case InitKind::kHuberPilot:
      theta = fit_huber_pilot(d).theta;
      break;
    case InitKind::kProvided:
      theta = cfg.provided_init;
      if (theta.beta.size() != d.X.cols())
        throw DimensionMismatch("provided init has wrong length");
      if (!(theta.sigma > Scalar(0)))
        throw InvalidArgument("provided init needs sigma > 0");
      break;
  }

  const Scalar sqrt_n = std::sqrt(Scalar(d.n()));
  Scalar objective = dpd_loss(theta, d, dpd, cfg.penalty).value;
  bool converged = false;
  int iters = 0;
  for (; iters < cfg.max_outer_iters; ++iters) {
    const Theta<Scalar> prev = theta;
    const Scalar prev_objective = objective;

    auto [Z, ystar] = quadratic_surrogate(theta, d, dpd);
    InnerResult<Scalar> inner = inner_pls_solve<Scalar>(
        sqrt_n * Z, sqrt_n * ystar, cfg.penalty, theta.beta, d.n(), cfg.inner);

    // Step-halving toward the previous iterate if the true objective rose.
    Vector<Scalar> candidate = std::move(inner.beta);
    Theta<Scalar> trial = theta;
    for (int halving = 0; halving < 40; ++halving) {
      trial.beta = candidate;
      if (dpd_loss(trial, d, dpd, cfg.penalty).value <=
          prev_objective + Scalar(1e-12))
        break;
      candidate = (candidate + theta.beta) / 2;
      if (halving == 39) candidate = theta.beta;
    }
    theta.beta = candidate;

    theta.sigma = update_sigma(theta.beta, d, dpd);
    objective = dpd_loss(theta, d, dpd, cfg.penalty).value;
    if (objective > prev_objective + Scalar(1e-12)) {
      // sigma step can only lower the sigma-section; a rise means the beta
      // trial was accepted on slack. Fall back to the previous iterate.
      theta = prev;
      objective = prev_objective;
      converged = true;
      ++iters;
      break;
    }

    const Scalar beta_change =
        (theta.beta - prev.beta).template lpNorm<Eigen::Infinity>();
    const Scalar sigma_change = std::abs(theta.sigma - prev.sigma);
    const Scalar denom = 1 + std::max(prev.beta.template lpNorm<Eigen::Infinity>(),
                                      prev.sigma);
    if (std::max(beta_change, sigma_change) / denom < cfg.tol) {
      converged = true;
      ++iters;
      break;
    }
  }

  if (log_level() >= LogLevel::kDebug)
    std::cerr << "[robreg] fit_mdpde alpha=" << cfg.alpha
              << " lambda=" << cfg.penalty.lambda << " iters=" << iters
              << " converged=" << converged << "\n";
  return detail::finalize_model(std::move(theta), d, cfg, converged, iters);
}

}  // namespace robreg
