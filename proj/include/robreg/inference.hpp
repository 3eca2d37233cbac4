#pragma once

#include <cmath>
#include <utility>
#include <vector>

#include "robreg/model.hpp"

namespace robreg {

/// Large-sample distribution summary of an active-set fit: covariance and
/// bias of sqrt(n) * beta_hat restricted to the active set, plus the
/// variance of sqrt(n) * (sigma_hat^2 - sigma^2).
template <typename Scalar>
struct AsymptoticSummary {
  std::vector<Index> active;
  Matrix<Scalar> cov_beta;      // (xi_2a / xi_a^2) Sigma_A^{-1}
  Vector<Scalar> bias;          // b; zero when lambda = 0
  Vector<Scalar> debiased_beta; // beta_A - b / sqrt(n)
  Scalar sigma2_var{0};         // (eta_2a - (a^2/4) xi_a^2) / eta_a^2
  Scalar xi_a{0}, xi_2a{0}, eta_a{0}, eta_2a{0};
};

namespace detail {

template <typename Scalar>
Matrix<Scalar> submatrix(const Matrix<Scalar>& X,
                         const std::vector<Index>& cols) {
  Matrix<Scalar> out(X.rows(), static_cast<Index>(cols.size()));
  for (std::size_t k = 0; k < cols.size(); ++k) out.col(k) = X.col(cols[k]);
  return out;
}

template <typename Scalar>
Vector<Scalar> subvector(const Vector<Scalar>& v,
                         const std::vector<Index>& idx) {
  Vector<Scalar> out(static_cast<Index>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) out[k] = v[idx[k]];
  return out;
}

/// Symmetric inverse square root via eigendecomposition.
template <typename Scalar>
Matrix<Scalar> inverse_sqrt(const Matrix<Scalar>& S, const char* err) {
  Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> eig(S);
  const auto& vals = eig.eigenvalues();
  if (!(vals.minCoeff() > vals.maxCoeff() * Scalar(1e-12)))
    throw SingularGram(err);
  return eig.eigenvectors() *
         vals.array().rsqrt().matrix().asDiagonal() *
         eig.eigenvectors().transpose();
}

}  // namespace detail

template <typename Scalar>
AsymptoticSummary<Scalar> asymptotic_summary(const FittedModel<Scalar>& model,
                                             const Dataset<Scalar>& d,
                                             Scalar alpha) {
  std::vector<Index> active = model.active.indices;
  if (active.empty()) active.push_back(0);
  const Index n = d.n();
  const Matrix<Scalar> XA = detail::submatrix(d.X, active);
  const Matrix<Scalar> sigma_gram = XA.transpose() * XA / Scalar(n);

  AsymptoticSummary<Scalar> out;
  out.active = active;
  const Scalar s = model.theta.sigma;
  out.xi_a = xi_alpha(alpha, s);
  out.xi_2a = xi_alpha(2 * alpha, s);
  out.eta_a = eta_alpha(alpha, s);
  out.eta_2a = eta_alpha(2 * alpha, s);
  out.sigma2_var =
      (out.eta_2a - alpha * alpha / 4 * out.xi_a * out.xi_a) /
      (out.eta_a * out.eta_a);

  Eigen::LDLT<Matrix<Scalar>> ldlt(sigma_gram);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
    throw SingularGram("active-set Gram matrix is singular");
  const Matrix<Scalar> gram_inv = ldlt.solve(
      Matrix<Scalar>::Identity(sigma_gram.rows(), sigma_gram.cols()));
  out.cov_beta = (out.xi_2a / (out.xi_a * out.xi_a)) * gram_inv;

  const Vector<Scalar> pgrad =
      detail::subvector(penalty_grad_vector(model.penalty, model.theta.beta),
                        active);
  if (pgrad.isZero()) {
    out.bias = Vector<Scalar>::Zero(pgrad.size());
  } else {
    const Matrix<Scalar> gram_inv_sqrt =
        detail::inverse_sqrt(sigma_gram, "active-set Gram matrix is singular");
    out.bias = std::sqrt(out.xi_2a) / out.xi_a * (gram_inv_sqrt * pgrad);
  }
  out.debiased_beta =
      detail::subvector(model.theta.beta, active) -
      out.bias / std::sqrt(Scalar(n));
  return out;
}

/// Influence of point contamination at t = (t_1..t_n) on the estimator of
/// (beta, sigma^2); requires alpha > 0 for boundedness. Entries 0..p are the
/// beta components, entry p+1 the sigma^2 component.
template <typename Scalar>
Vector<Scalar> influence_function(const Theta<Scalar>& theta_g,
                                  const Dataset<Scalar>& d,
                                  const Vector<Scalar>& t, Scalar alpha,
                                  const PenaltySpec<Scalar>& pen) {
  if (!(alpha > Scalar(0)))
    throw InvalidArgument("influence function requires alpha > 0");
  if (t.size() != d.n())
    throw DimensionMismatch("probe vector length must equal n");
  const Index q = d.X.cols();
  const Index n = d.n();
  const Scalar s = theta_g.sigma;
  const Scalar s2 = s * s;
  const Scalar xi = xi_alpha(alpha, s);
  const Scalar eta = eta_alpha(alpha, s);

  Matrix<Scalar> psi = Matrix<Scalar>::Zero(q + 1, q + 1);
  psi.topLeftCorner(q, q) = xi / Scalar(n) * (d.X.transpose() * d.X);
  psi(q, q) = eta;
  psi.topLeftCorner(q, q) +=
      penalty_second_deriv_matrix(pen, theta_g.beta) / (1 + alpha);

  const Vector<Scalar> rt = t - d.X * theta_g.beta;
  const Vector<Scalar> fa = detail::density_pow_alpha(rt, s, alpha);
  Vector<Scalar> numerator = Vector<Scalar>::Zero(q + 1);
  numerator.head(q) =
      d.X.transpose() * (rt.array() * fa.array()).matrix() / (Scalar(n) * s2);
  numerator[q] =
      ((rt.array().square() - s2) * fa.array()).sum() /
          (Scalar(n) * 2 * s2 * s2) +
      alpha / 2 * xi;

  Eigen::LDLT<Matrix<Scalar>> ldlt(psi);
  if (ldlt.info() != Eigen::Success)
    throw SingularPsi("information matrix is singular");
  Vector<Scalar> result = ldlt.solve(numerator);
  if (!result.allFinite())
    throw SingularPsi("information matrix is singular");
  return result;
}

/// Influence curve over a scalar probe grid (all observations contaminated
/// at the same value).
template <typename Scalar>
struct InfluenceAssessment {
  Vector<Scalar> points;
  Matrix<Scalar> if_values;  // (p+2) x grid
  Scalar sup_norm{0};
};

template <typename Scalar>
InfluenceAssessment<Scalar> influence_curve(const FittedModel<Scalar>& model,
                                            const Dataset<Scalar>& d,
                                            Scalar alpha,
                                            const Vector<Scalar>& probe_grid) {
  InfluenceAssessment<Scalar> out;
  out.points = probe_grid;
  out.if_values.resize(d.X.cols() + 1, probe_grid.size());
  out.sup_norm = Scalar(0);
  for (Index k = 0; k < probe_grid.size(); ++k) {
    const Vector<Scalar> t =
        Vector<Scalar>::Constant(d.n(), probe_grid[k]);
    const Vector<Scalar> v =
        influence_function(model.theta, d, t, alpha, model.penalty);
    out.if_values.col(k) = v;
    out.sup_norm =
        std::max(out.sup_norm, v.template lpNorm<Eigen::Infinity>());
  }
  return out;
}

}  // namespace robreg
