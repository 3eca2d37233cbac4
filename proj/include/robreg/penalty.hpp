#pragma once

#include <cmath>
#include <string>

#include "robreg/core.hpp"

namespace robreg {

enum class PenaltyFamily { kNone, kL1, kScad };

inline std::string to_string(PenaltyFamily f) {
  switch (f) {
    case PenaltyFamily::kNone: return "none";
    case PenaltyFamily::kL1: return "l1";
    case PenaltyFamily::kScad: return "scad";
  }
  return "none";
}

/// Penalty family with its regularization strength. The intercept is never
/// penalized; consumers apply the penalty to coefficients 1..p only.
template <typename Scalar>
struct PenaltySpec {
  PenaltyFamily family{PenaltyFamily::kNone};
  Scalar lambda{0};
  Scalar scad_a{Scalar(3.7)};

  static PenaltySpec none() { return {}; }
  static PenaltySpec l1(Scalar lambda) {
    return PenaltySpec{PenaltyFamily::kL1, lambda, Scalar(3.7)};
  }
  static PenaltySpec scad(Scalar lambda, Scalar a = Scalar(3.7)) {
    return PenaltySpec{PenaltyFamily::kScad, lambda, a};
  }

  void validate() const {
    if (!(lambda >= Scalar(0))) throw InvalidArgument("lambda must be >= 0");
    if (family == PenaltyFamily::kScad && !(scad_a > Scalar(2)))
      throw InvalidArgument("SCAD shape parameter must exceed 2");
  }
};

/// P_lambda(t) for t >= 0. L1 is lambda*t; SCAD is the usual three-piece
/// form plateauing at (a+1) lambda^2 / 2.
template <typename Scalar>
Scalar penalty_value(const PenaltySpec<Scalar>& p, Scalar t) {
  if (t < Scalar(0)) throw NonpositiveArgument("penalty_value needs t >= 0");
  const Scalar lam = p.lambda;
  switch (p.family) {
    case PenaltyFamily::kNone:
      return Scalar(0);
    case PenaltyFamily::kL1:
      return lam * t;
    case PenaltyFamily::kScad: {
      const Scalar a = p.scad_a;
      if (lam == Scalar(0)) return Scalar(0);
      if (t <= lam) return lam * t;
      if (t <= a * lam)
        return (Scalar(2) * a * lam * t - t * t - lam * lam) /
               (Scalar(2) * (a - Scalar(1)));
      return (a + Scalar(1)) * lam * lam / Scalar(2);
    }
  }
  return Scalar(0);
}

/// P'_lambda(t) for t > 0 (derivatives at 0 are never requested; zeros are
/// produced by thresholding, not by differentiation).
template <typename Scalar>
Scalar penalty_deriv(const PenaltySpec<Scalar>& p, Scalar t) {
  if (!(t > Scalar(0)))
    throw NonpositiveArgument("penalty_deriv needs t > 0");
  const Scalar lam = p.lambda;
  switch (p.family) {
    case PenaltyFamily::kNone:
      return Scalar(0);
    case PenaltyFamily::kL1:
      return lam;
    case PenaltyFamily::kScad: {
      const Scalar a = p.scad_a;
      if (lam == Scalar(0)) return Scalar(0);
      if (t <= lam) return lam;
      if (t <= a * lam) return (a * lam - t) / (a - Scalar(1));
      return Scalar(0);
    }
  }
  return Scalar(0);
}

/// Right limit P'_lambda(0+), the subgradient bound at zero.
template <typename Scalar>
Scalar penalty_deriv_at_zero(const PenaltySpec<Scalar>& p) {
  switch (p.family) {
    case PenaltyFamily::kNone:
      return Scalar(0);
    case PenaltyFamily::kL1:
    case PenaltyFamily::kScad:
      return p.lambda;
  }
  return Scalar(0);
}

template <typename Scalar>
Scalar penalty_second_deriv(const PenaltySpec<Scalar>& p, Scalar t) {
  if (!(t > Scalar(0)))
    throw NonpositiveArgument("penalty_second_deriv needs t > 0");
  const Scalar lam = p.lambda;
  switch (p.family) {
    case PenaltyFamily::kNone:
    case PenaltyFamily::kL1:
      return Scalar(0);
    case PenaltyFamily::kScad: {
      const Scalar a = p.scad_a;
      if (lam == Scalar(0)) return Scalar(0);
      if (t > lam && t < a * lam) return -Scalar(1) / (a - Scalar(1));
      return Scalar(0);
    }
  }
  return Scalar(0);
}

/// Diagonal curvature matrix P''_lambda over the coefficient vector: zero
/// for the intercept and for zero coefficients, P''(|beta_j|) otherwise.
template <typename Scalar>
Matrix<Scalar> penalty_second_deriv_matrix(const PenaltySpec<Scalar>& p,
                                           const Vector<Scalar>& beta) {
  const Index q = beta.size();
  Matrix<Scalar> out = Matrix<Scalar>::Zero(q, q);
  for (Index j = 1; j < q; ++j) {
    const Scalar t = std::abs(beta[j]);
    if (t > Scalar(0)) out(j, j) = penalty_second_deriv(p, t);
  }
  return out;
}

/// Signed derivative vector dP/dbeta: sign(beta_j) P'(|beta_j|) per
/// non-intercept coordinate, zero at the intercept and at exact zeros.
template <typename Scalar>
Vector<Scalar> penalty_grad_vector(const PenaltySpec<Scalar>& p,
                                   const Vector<Scalar>& beta) {
  const Index q = beta.size();
  Vector<Scalar> out = Vector<Scalar>::Zero(q);
  for (Index j = 1; j < q; ++j) {
    const Scalar t = std::abs(beta[j]);
    if (t > Scalar(0))
      out[j] = (beta[j] > Scalar(0) ? Scalar(1) : Scalar(-1)) *
               penalty_deriv(p, t);
  }
  return out;
}

/// Sum of P_lambda(|beta_j|) over the penalized coordinates j >= 1.
template <typename Scalar>
Scalar penalty_total(const PenaltySpec<Scalar>& p, const Vector<Scalar>& beta) {
  Scalar total(0);
  for (Index j = 1; j < beta.size(); ++j)
    total += penalty_value(p, std::abs(beta[j]));
  return total;
}

}  // namespace robreg
