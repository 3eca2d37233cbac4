#pragma once

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "robreg/core.hpp"

namespace robreg {

/// Consistency factor making MAD estimate sigma under normal errors,
/// 1/Phi^{-1}(3/4).
inline constexpr double kMadConsistency = 1.4826;

/// Response vector plus design matrix with a leading all-ones intercept
/// column: y is n x 1, X is n x (p+1).
template <typename Scalar>
struct Dataset {
  Vector<Scalar> y;
  Matrix<Scalar> X;

  Index n() const { return y.size(); }
  Index p() const { return X.cols() - 1; }

  void validate() const {
    if (X.rows() != y.size())
      throw DimensionMismatch("X has " + std::to_string(X.rows()) +
                              " rows but y has " + std::to_string(y.size()));
    if (y.size() < 2) throw InvalidArgument("need at least 2 observations");
    if (X.cols() < 1) throw InvalidArgument("X must include an intercept column");
    if (!y.allFinite() || !X.allFinite())
      throw InvalidArgument("non-finite entries in dataset");
  }
};

/// Regression coefficients (beta[0] = intercept) together with the error
/// scale sigma > 0.
template <typename Scalar>
struct Theta {
  Vector<Scalar> beta;
  Scalar sigma{1};
};

/// Sorted unique coefficient indices with nonzero estimates.
struct ActiveSet {
  std::vector<Index> indices;

  Index size() const { return static_cast<Index>(indices.size()); }
  bool contains(Index j) const {
    return std::binary_search(indices.begin(), indices.end(), j);
  }
};

template <typename Scalar>
ActiveSet active_set_of(const Vector<Scalar>& beta, Scalar zero_threshold) {
  ActiveSet active;
  for (Index j = 0; j < beta.size(); ++j)
    if (std::abs(beta[j]) > zero_threshold) active.indices.push_back(j);
  return active;
}

/// Per-predictor robust centers/scales plus the response pair; captures the
/// pre-processing constants so a fit can be mapped back to original units.
template <typename Scalar>
struct Standardizer {
  Vector<Scalar> centers;  // length p, median per non-intercept column
  Vector<Scalar> scales;   // length p, 1.4826 * MAD, strictly positive
  Scalar y_center{0};
  Scalar y_scale{1};
};

template <typename Scalar>
Scalar median(Vector<Scalar> v) {
  const Index n = v.size();
  if (n == 0) throw InvalidArgument("median of empty vector");
  std::nth_element(v.data(), v.data() + n / 2, v.data() + n);
  Scalar hi = v[n / 2];
  if (n % 2 == 1) return hi;
  Scalar lo = *std::max_element(v.data(), v.data() + n / 2);
  return (lo + hi) / Scalar(2);
}

/// Median absolute deviation about the median (no consistency factor).
template <typename Scalar>
Scalar mad(const Vector<Scalar>& v) {
  Scalar center = median<Scalar>(v);
  return median<Scalar>((v.array() - center).abs().matrix());
}

/// 1.4826 * MAD, the normality-consistent robust scale.
template <typename Scalar>
Scalar robust_scale(const Vector<Scalar>& v) {
  return Scalar(kMadConsistency) * mad(v);
}

/// Robustly center/scale every non-intercept predictor column and the
/// response (median and 1.4826*MAD). The intercept column is untouched.
/// Throws DegenerateColumn for any column (or y) with zero MAD.
template <typename Scalar>
std::pair<Dataset<Scalar>, Standardizer<Scalar>> robust_standardize(
    const Dataset<Scalar>& d) {
  d.validate();
  const Index p = d.p();
  Standardizer<Scalar> s;
  s.centers.resize(p);
  s.scales.resize(p);

  Dataset<Scalar> out = d;
  for (Index j = 0; j < p; ++j) {
    Vector<Scalar> col = d.X.col(j + 1);
    const Scalar center = median<Scalar>(col);
    const Scalar scale = Scalar(kMadConsistency) * mad<Scalar>(col);
    if (!(scale > Scalar(0)))
      throw DegenerateColumn("predictor column " + std::to_string(j + 1) +
                             " has zero MAD");
    s.centers[j] = center;
    s.scales[j] = scale;
    out.X.col(j + 1) = (col.array() - center) / scale;
  }
  s.y_center = median<Scalar>(d.y);
  s.y_scale = Scalar(kMadConsistency) * mad<Scalar>(d.y);
  if (!(s.y_scale > Scalar(0)))
    throw DegenerateColumn("response has zero MAD");
  out.y = (d.y.array() - s.y_center) / s.y_scale;
  return {std::move(out), std::move(s)};
}

/// Map coefficients and scale fitted on standardized data back to original
/// units. Zero coefficients stay exactly zero.
template <typename Scalar>
Theta<Scalar> unstandardize_theta(const Theta<Scalar>& t,
                                  const Standardizer<Scalar>& s) {
  const Index p = s.centers.size();
  if (t.beta.size() != p + 1)
    throw DimensionMismatch("theta has " + std::to_string(t.beta.size()) +
                            " coefficients, standardizer expects " +
                            std::to_string(p + 1));
  Theta<Scalar> out;
  out.beta.resize(p + 1);
  Scalar intercept = s.y_center + s.y_scale * t.beta[0];
  for (Index j = 0; j < p; ++j) {
    const Scalar bj =
        t.beta[j + 1] == Scalar(0)
            ? Scalar(0)
            : t.beta[j + 1] * s.y_scale / s.scales[j];
    out.beta[j + 1] = bj;
    intercept -= bj * s.centers[j];
  }
  out.beta[0] = intercept;
  out.sigma = t.sigma * s.y_scale;
  return out;
}

}  // namespace robreg
