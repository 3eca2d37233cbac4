#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "robreg/inference.hpp"
#include "robreg/solver.hpp"

namespace robreg {

enum class CriterionKind { kRCp, kRaic, kClassicalCp, kClassicalAic };

inline std::string to_string(CriterionKind k) {
  switch (k) {
    case CriterionKind::kRCp: return "rcp";
    case CriterionKind::kRaic: return "raic";
    case CriterionKind::kClassicalCp: return "cp";
    case CriterionKind::kClassicalAic: return "aic";
  }
  return "rcp";
}

inline bool criterion_is_cp(CriterionKind k) {
  return k == CriterionKind::kRCp || k == CriterionKind::kClassicalCp;
}

template <typename Scalar>
struct CriterionValue {
  CriterionKind kind{CriterionKind::kRCp};
  Scalar value{0};
  Scalar df{0};
  Scalar lambda{0};
};

/// How the residual sum of squares of a sub-model enters the Cp statistic:
/// kSquared uses n sigma_hat^2 (dimensionally consistent default), kLiteral
/// uses n sigma_hat.
enum class RcpVariant { kSquared, kLiteral };

/// Whether the penalty curvature inside the AIC trace carries the
/// 1/(1+alpha) factor (derivation form, default) or not (displayed form).
enum class RaicVariant { kDerivation, kDisplayed };

namespace detail {

inline std::vector<Index> active_with_intercept(const ActiveSet& a) {
  std::vector<Index> idx = a.indices;
  if (idx.empty() || idx.front() != 0) idx.insert(idx.begin(), 0);
  return idx;
}

}  // namespace detail

/// Curvature matrix of the active sub-model:
/// (xi_alpha / n) X_A^T X_A + (1/(1+alpha)) P''(beta_A).
template <typename Scalar>
Matrix<Scalar> s_matrix(const FittedModel<Scalar>& model,
                        const Dataset<Scalar>& d, Scalar alpha) {
  const std::vector<Index> active =
      detail::active_with_intercept(model.active);
  const Matrix<Scalar> XA = detail::submatrix(d.X, active);
  const Scalar xi = xi_alpha(alpha, model.theta.sigma);
  Matrix<Scalar> S = xi / Scalar(d.n()) * (XA.transpose() * XA);
  const Matrix<Scalar> pdd =
      penalty_second_deriv_matrix(model.penalty, model.theta.beta);
  for (std::size_t k = 0; k < active.size(); ++k)
    S(k, k) += pdd(active[k], active[k]) / (1 + alpha);

  Eigen::JacobiSVD<Matrix<Scalar>> svd(S);
  const auto& sv = svd.singularValues();
  if (!(sv.minCoeff() > sv.maxCoeff() / Scalar(1e12)))
    throw SingularS("sub-model curvature matrix is numerically singular");
  return S;
}

/// Effective number of parameters:
/// (xi_alpha / n) tr(X_A S^{-1} X_A^T), computed as a solve-then-trace.
/// Reduces to |A| exactly when the penalty curvature vanishes.
template <typename Scalar>
Scalar degrees_of_freedom(const FittedModel<Scalar>& model,
                          const Dataset<Scalar>& d, Scalar alpha) {
  const std::vector<Index> active =
      detail::active_with_intercept(model.active);
  const Matrix<Scalar> XA = detail::submatrix(d.X, active);
  const Matrix<Scalar> S = s_matrix(model, d, alpha);
  const Scalar xi = xi_alpha(alpha, model.theta.sigma);
  // tr(X_A S^{-1} X_A^T) = tr(S^{-1} X_A^T X_A)
  const Matrix<Scalar> gram = XA.transpose() * XA;
  const Matrix<Scalar> solved = S.ldlt().solve(gram);
  return xi / Scalar(d.n()) * solved.trace();
}

/// Robust Cp: n sigma_hat^2 / sigma_u^2 - n + 2 df (default variant);
/// sigma_u is the unbiased full-model scale supplied by the caller.
template <typename Scalar>
CriterionValue<Scalar> robust_cp(const FittedModel<Scalar>& model,
                                 const Dataset<Scalar>& d, Scalar alpha,
                                 Scalar sigma_u,
                                 RcpVariant variant = RcpVariant::kSquared) {
  if (!(sigma_u > Scalar(0)))
    throw NonpositiveArgument("sigma_u must be positive");
  const Scalar n = Scalar(d.n());
  const Scalar df = degrees_of_freedom(model, d, alpha);
  const Scalar s = model.theta.sigma;
  const Scalar rss_proxy = variant == RcpVariant::kSquared ? n * s * s : n * s;
  CriterionValue<Scalar> out;
  out.kind = alpha == Scalar(0) ? CriterionKind::kClassicalCp
                                : CriterionKind::kRCp;
  out.df = df;
  out.lambda = model.penalty.lambda;
  out.value = rss_proxy / (sigma_u * sigma_u) - n + 2 * df;
  return out;
}

/// Unbiased full-model scale: the lambda = 0 fit's sigma with the
/// finite-sample inflation sqrt(n / (n - |A|)).
template <typename Scalar>
Scalar estimate_sigma_unbiased(const Dataset<Scalar>& d, Scalar alpha) {
  if (d.n() <= d.p() + 1)
    throw InvalidArgument("need n > p + 1 for the full-model scale");
  FitConfig<Scalar> cfg;
  cfg.alpha = alpha;
  cfg.penalty = PenaltySpec<Scalar>::none();
  const FittedModel<Scalar> full = fit_mdpde(d, cfg);
  const Scalar n = Scalar(d.n());
  const Scalar k = Scalar(full.active.size());
  return full.theta.sigma * std::sqrt(n / (n - k));
}

/// Robust AIC: the data term of the fitted divergence plus the
/// trace correction tr[(Sigma* + b* b*^T)(Psi_A + P''/(1+alpha))].
template <typename Scalar>
CriterionValue<Scalar> robust_aic(const FittedModel<Scalar>& model,
                                  const Dataset<Scalar>& d, Scalar alpha,
                                  RaicVariant variant = RaicVariant::kDerivation) {
  const AsymptoticSummary<Scalar> asym = asymptotic_summary(model, d, alpha);
  const std::vector<Index>& active = asym.active;
  const Index k = static_cast<Index>(active.size());
  const Matrix<Scalar> XA = detail::submatrix(d.X, active);
  const Matrix<Scalar> sigma_gram = XA.transpose() * XA / Scalar(d.n());

  Matrix<Scalar> sigma_star = Matrix<Scalar>::Zero(k + 1, k + 1);
  sigma_star.topLeftCorner(k, k) = asym.cov_beta;
  sigma_star(k, k) = asym.sigma2_var;

  Matrix<Scalar> psi = Matrix<Scalar>::Zero(k + 1, k + 1);
  psi.topLeftCorner(k, k) = asym.xi_a * sigma_gram;
  psi(k, k) = asym.eta_a;

  Vector<Scalar> bias_star = Vector<Scalar>::Zero(k + 1);
  bias_star.head(k) = asym.bias;

  const Matrix<Scalar> pdd =
      penalty_second_deriv_matrix(model.penalty, model.theta.beta);
  Matrix<Scalar> correction = psi;
  const Scalar pfactor =
      variant == RaicVariant::kDerivation ? 1 / (1 + alpha) : Scalar(1);
  for (Index j = 0; j < k; ++j)
    correction(j, j) += pfactor * pdd(active[j], active[j]);

  const Scalar trace_term =
      ((sigma_star + bias_star * bias_star.transpose()) * correction).trace();

  const Vector<Scalar> r = d.y - d.X * model.theta.beta;
  Scalar data_term;
  if (alpha > Scalar(0)) {
    const Vector<Scalar> fa =
        detail::density_pow_alpha(r, model.theta.sigma, alpha);
    data_term = -(1 + alpha) / alpha * fa.sum();
  } else {
    const Scalar s2 = model.theta.sigma * model.theta.sigma;
    data_term = Scalar(0.5) * Scalar(d.n()) * std::log(Scalar(kTwoPi) * s2) +
                r.squaredNorm() / (2 * s2);
  }

  CriterionValue<Scalar> out;
  out.kind = alpha == Scalar(0) ? CriterionKind::kClassicalAic
                                : CriterionKind::kRaic;
  out.df = degrees_of_freedom(model, d, alpha);
  out.lambda = model.penalty.lambda;
  out.value = data_term + trace_term;
  return out;
}

/// A descending lambda grid with the warm-started fits along it.
/// models[k] is empty when lambda grid[k] failed to fit.
template <typename Scalar>
struct LambdaPath {
  std::vector<Scalar> grid;
  std::vector<std::optional<FittedModel<Scalar>>> models;
  std::vector<std::pair<Scalar, std::string>> failures;
};

/// Fit a log-spaced lambda grid spanning four decades below the null-model
/// bound, warm-starting each fit at the previous solution.
template <typename Scalar>
LambdaPath<Scalar> fit_lambda_path(const Dataset<Scalar>& d, Scalar alpha,
                                   PenaltyFamily family, Scalar scad_a,
                                   int n_grid) {
  if (n_grid < 1) throw InvalidArgument("n_grid must be >= 1");
  const DpdConfig<Scalar> dpd(alpha);
  const Theta<Scalar> null_theta = fit_intercept_only(d, dpd);
  const Scalar top = lambda_max(null_theta, d, dpd);

  LambdaPath<Scalar> path;
  path.grid.reserve(n_grid);
  for (int k = 0; k < n_grid; ++k) {
    const Scalar exponent =
        n_grid == 1 ? Scalar(0) : Scalar(-4) * Scalar(k) / Scalar(n_grid - 1);
    path.grid.push_back(top * std::pow(Scalar(10), exponent));
  }

  Theta<Scalar> warm = null_theta;
  for (Scalar lam : path.grid) {
    FitConfig<Scalar> cfg;
    cfg.alpha = alpha;
    cfg.penalty = PenaltySpec<Scalar>{family, lam, scad_a};
    cfg.init = InitKind::kProvided;
    cfg.provided_init = warm;
    try {
      FittedModel<Scalar> model = fit_mdpde(d, cfg);
      warm = model.theta;
      path.models.emplace_back(std::move(model));
    } catch (const Error& e) {
      path.models.emplace_back(std::nullopt);
      path.failures.emplace_back(lam, e.name());
    }
  }
  return path;
}

template <typename Scalar>
struct SelectionResult {
  std::vector<Scalar> grid;  // descending lambda values
  std::vector<CriterionValue<Scalar>> values;
  Scalar chosen_lambda{0};
  FittedModel<Scalar> model;
  Scalar alpha{0};
  std::vector<std::pair<Scalar, std::string>> failures;
};

template <typename Scalar>
struct SelectionOptions {
  CriterionKind criterion{CriterionKind::kRCp};
  int n_grid{50};
  PenaltyFamily family{PenaltyFamily::kL1};
  Scalar scad_a{Scalar(3.7)};
  RcpVariant rcp_variant{RcpVariant::kSquared};
  RaicVariant raic_variant{RaicVariant::kDerivation};
};

/// Evaluate one criterion along an already-fitted path and pick the
/// minimizer; ties go to the larger (sparser) lambda. sigma_u is required
/// for the Cp criteria and ignored otherwise.
template <typename Scalar>
SelectionResult<Scalar> select_from_path(const LambdaPath<Scalar>& path,
                                         const Dataset<Scalar>& d, Scalar alpha,
                                         const SelectionOptions<Scalar>& opt,
                                         Scalar sigma_u = Scalar(1)) {
  SelectionResult<Scalar> result;
  result.alpha = alpha;
  result.grid = path.grid;
  result.failures = path.failures;

  std::optional<Scalar> best;
  for (std::size_t k = 0; k < path.grid.size(); ++k) {
    if (!path.models[k]) continue;
    const FittedModel<Scalar>& model = *path.models[k];
    try {
      CriterionValue<Scalar> crit =
          criterion_is_cp(opt.criterion)
              ? robust_cp(model, d, alpha, sigma_u, opt.rcp_variant)
              : robust_aic(model, d, alpha, opt.raic_variant);
      crit.lambda = path.grid[k];
      result.values.push_back(crit);
      if (!best || crit.value < *best) {
        best = crit.value;
        result.chosen_lambda = path.grid[k];
        result.model = model;
      }
    } catch (const Error& e) {
      result.failures.emplace_back(path.grid[k], e.name());
    }
  }
  if (!best)
    throw Error("SelectionFailed",
                "every lambda in the grid failed: " +
                    (result.failures.empty() ? std::string("empty grid")
                                             : result.failures.front().second));
  return result;
}

/// Grid search over lambda for one criterion.
template <typename Scalar>
SelectionResult<Scalar> select_lambda(const Dataset<Scalar>& d, Scalar alpha,
                                      const SelectionOptions<Scalar>& opt) {
  const LambdaPath<Scalar> path =
      fit_lambda_path(d, alpha, opt.family, opt.scad_a, opt.n_grid);
  Scalar sigma_u(1);
  if (criterion_is_cp(opt.criterion))
    sigma_u = estimate_sigma_unbiased(d, alpha);
  return select_from_path(path, d, alpha, opt, sigma_u);
}

template <typename Scalar>
struct AlphaRecord {
  Scalar alpha{0};
  Scalar mse{0};
  Scalar distance_sq{0};
  Scalar variance_term{0};
  Scalar chosen_lambda{0};
  Index active_size{0};
};

/// Mean-squared-error proxy for one candidate fit against a pilot:
/// squared active-set distance plus (xi_2a/xi_a^2) tr((X_A^T X_A)^{-1}).
template <typename Scalar>
AlphaRecord<Scalar> adaptive_mse(const FittedModel<Scalar>& model,
                                 const Dataset<Scalar>& d,
                                 const Vector<Scalar>& pilot_beta,
                                 Scalar alpha) {
  const std::vector<Index> active =
      detail::active_with_intercept(model.active);
  const Matrix<Scalar> XA = detail::submatrix(d.X, active);
  const Matrix<Scalar> gram = XA.transpose() * XA;
  Eigen::LDLT<Matrix<Scalar>> ldlt(gram);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
    throw SingularGram("active-set Gram matrix is singular");
  const Matrix<Scalar> gram_inv =
      ldlt.solve(Matrix<Scalar>::Identity(gram.rows(), gram.cols()));

  const Scalar s = model.theta.sigma;
  const Scalar ratio = xi_alpha(2 * alpha, s) /
                       (xi_alpha(alpha, s) * xi_alpha(alpha, s));
  const Vector<Scalar> diff =
      detail::subvector(model.theta.beta, active) -
      detail::subvector(pilot_beta, active);

  AlphaRecord<Scalar> rec;
  rec.alpha = alpha;
  rec.distance_sq = diff.squaredNorm();
  rec.variance_term = ratio * gram_inv.trace();
  rec.mse = rec.distance_sq + rec.variance_term;
  rec.chosen_lambda = model.penalty.lambda;
  rec.active_size = static_cast<Index>(active.size());
  return rec;
}

template <typename Scalar>
struct AdaptiveAlphaResult {
  Scalar alpha_star{0};
  std::vector<AlphaRecord<Scalar>> records;
  FittedModel<Scalar> model;  // the fit at alpha_star
};

template <typename Scalar>
std::vector<Scalar> default_alpha_grid() {
  std::vector<Scalar> grid;
  for (int k = 0; k <= 80; ++k) grid.push_back(Scalar(k) * Scalar(0.0125));
  return grid;
}

/// Pick alpha by minimizing the empirical MSE of the selected fit against a
/// robust pilot (full-model fit on the same data scale).
template <typename Scalar>
AdaptiveAlphaResult<Scalar> adaptive_alpha(
    const Dataset<Scalar>& d, const FittedModel<Scalar>& pilot,
    const std::vector<Scalar>& alpha_grid, const SelectionOptions<Scalar>& opt) {
  if (alpha_grid.empty()) throw InvalidArgument("alpha grid is empty");
  AdaptiveAlphaResult<Scalar> out;
  std::optional<Scalar> best;
  std::string last_error = "no candidate succeeded";
  for (Scalar a : alpha_grid) {
    try {
      SelectionResult<Scalar> sel = select_lambda(d, a, opt);
      AlphaRecord<Scalar> rec =
          adaptive_mse(sel.model, d, pilot.theta.beta, a);
      out.records.push_back(rec);
      if (!best || rec.mse < *best) {
        best = rec.mse;
        out.alpha_star = a;
        out.model = std::move(sel.model);
      }
    } catch (const Error& e) {
      last_error = e.what();
    }
  }
  if (!best) throw Error("AdaptiveAlphaFailed", last_error);
  return out;
}

}  // namespace robreg
