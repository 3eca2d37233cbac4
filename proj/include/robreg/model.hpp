#pragma once

#include "robreg/data.hpp"
#include "robreg/dpd.hpp"
#include "robreg/penalty.hpp"

namespace robreg {

enum class InitKind { kOls, kHuberPilot, kProvided };

/// Inner coordinate-descent settings.
template <typename Scalar>
struct InnerConfig {
  int max_sweeps{1000};
  Scalar tol{Scalar(1e-9)};
};

template <typename Scalar>
struct FitConfig {
  Scalar alpha{0};
  PenaltySpec<Scalar> penalty{};
  int max_outer_iters{100};
  Scalar tol{Scalar(1e-7)};
  InitKind init{InitKind::kOls};
  Theta<Scalar> provided_init{};
  InnerConfig<Scalar> inner{};
  Scalar zero_threshold{Scalar(1e-10)};

  void validate() const {
    if (!(tol > Scalar(0))) throw InvalidArgument("tol must be positive");
    if (max_outer_iters < 1)
      throw InvalidArgument("max_outer_iters must be >= 1");
    penalty.validate();
  }
};

template <typename Scalar>
struct FittedModel {
  Theta<Scalar> theta;
  ActiveSet active;
  bool converged{false};
  int outer_iters{0};
  LossReport<Scalar> loss;
  Scalar alpha{0};
  PenaltySpec<Scalar> penalty{};
  /// Residual of the sigma estimating equation at the solution (diagnostic).
  Scalar sigma_equation_residual{0};
};

/// Express a model fitted on standardized data in original units. The
/// active set is carried over unchanged; non-intercept zeros stay zero. The
/// loss record keeps the value achieved on the standardized problem.
template <typename Scalar>
FittedModel<Scalar> unstandardize_model(const FittedModel<Scalar>& m,
                                        const Standardizer<Scalar>& s) {
  FittedModel<Scalar> out = m;
  out.theta = unstandardize_theta(m.theta, s);
  return out;
}

}  // namespace robreg
