#pragma once

// Free-probability transforms of a weight spectrum (the eigenvalues of
// W^T W): Cauchy transform, moment generating series and the S-transform,
// in closed form for subsampling and by numerical inversion otherwise.

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include "implreg/errors.hpp"
#include "implreg/linalg.hpp"
#include "implreg/roots.hpp"

namespace implreg {

/// Eigenvalues of W^T W, nonincreasing, with the fraction above the rank
/// cutoff.
class WeightSpectrum {
 public:
  WeightSpectrum() = default;

  static WeightSpectrum from_eigenvalues(std::vector<double> eigs) {
    if (eigs.empty()) throw InputError("weight spectrum must be nonempty");
    double lmax = 0.0;
    for (double e : eigs) {
      if (!std::isfinite(e)) throw InputError("weight spectrum has non-finite entries");
      lmax = std::max(lmax, e);
    }
    // Small negative values are round-off from a dense eigendecomposition.
    for (double& e : eigs) {
      if (e < -1e-10 * std::max(1.0, lmax)) throw InputError("weight spectrum has negative entries");
      e = std::max(e, 0.0);
    }
    std::sort(eigs.begin(), eigs.end(), std::greater<>());
    const double thr = rank_threshold(lmax, static_cast<Index>(eigs.size()));
    std::size_t above = 0;
    for (double e : eigs)
      if (e > thr) ++above;
    WeightSpectrum s;
    s.eigs_ = std::move(eigs);
    s.nonzero_fraction_ = static_cast<double>(above) / static_cast<double>(s.eigs_.size());
    return s;
  }

  /// Exact 0/1 spectrum of a k-of-n subsampling operator.
  static WeightSpectrum subsample(std::size_t n, std::size_t k) {
    if (n == 0 || k > n) throw InputError("subsample spectrum needs 0 <= k <= n, n >= 1");
    std::vector<double> e(n, 0.0);
    std::fill(e.begin(), e.begin() + static_cast<std::ptrdiff_t>(k), 1.0);
    return from_eigenvalues(std::move(e));
  }

  std::span<const double> eigs() const noexcept { return eigs_; }
  std::size_t size() const noexcept { return eigs_.size(); }
  double nonzero_fraction() const noexcept { return nonzero_fraction_; }
  double max() const noexcept { return eigs_.empty() ? 0.0 : eigs_.front(); }

 private:
  std::vector<double> eigs_;
  double nonzero_fraction_ = 0.0;
};

/// G(z) = (1/n) sum 1/(z - d_i).
inline double cauchy_transform(const WeightSpectrum& spec, double z) {
  const double scale = spec.max() > 0.0 ? spec.max() : 1.0;
  double s = 0.0;
  for (double d : spec.eigs()) {
    const double gap = z - d;
    if (std::fabs(gap) <= 1e-12 * scale) throw PoleError("Cauchy transform evaluated at a pole", z);
    s += 1.0 / gap;
  }
  return s / static_cast<double>(spec.size());
}

/// M(z) = (1/n) sum z d_i / (1 - z d_i) = z^{-1} G(1/z) - 1.
inline double moment_series(const WeightSpectrum& spec, double z) {
  double s = 0.0;
  for (double d : spec.eigs()) {
    const double zd = z * d;
    const double den = 1.0 - zd;
    if (std::fabs(den) <= 1e-12) throw PoleError("moment series evaluated at a pole", z);
    s += zd / den;
  }
  return s / static_cast<double>(spec.size());
}

/// Closed-form S-transform of k-of-n subsampling, q = k/n:
/// S(w) = (1 + w) / (w + q).
inline double s_transform_subsample(double q, double w) {
  if (!(q > 0.0 && q <= 1.0)) throw InputError("subsample fraction must lie in (0, 1]");
  if (q == 1.0) return 1.0;
  const double den = w + q;
  if (den == 0.0) throw PoleError("subsample S-transform has a pole at w = -q", w);
  return (1.0 + w) / den;
}

/// S'(w) = (q - 1) / (w + q)^2.
inline double s_transform_subsample_derivative(double q, double w) {
  if (!(q > 0.0 && q <= 1.0)) throw InputError("subsample fraction must lie in (0, 1]");
  if (q == 1.0) return 0.0;
  const double den = w + q;
  if (den == 0.0) throw PoleError("subsample S-transform has a pole at w = -q", w);
  return (q - 1.0) / (den * den);
}

/// Interior margin kept from the ends of the attainable moment-series range.
inline constexpr double kMomentRangeMargin = 1e-9;

struct MomentInverse {
  double z;
  std::size_t expansions;
  std::size_t iterations;
};

/// Solves M(z) = w for z < 0. M is strictly increasing on (-inf, 0] with
/// range (-nonzero_fraction, 0], so the root is unique.
inline MomentInverse inverse_moment_series(const WeightSpectrum& spec, double w) {
  const double lo_w = -spec.nonzero_fraction();
  if (!(w > lo_w + kMomentRangeMargin && w < -kMomentRangeMargin))
    throw RangeError("target outside moment-series range", w, lo_w, 0.0);
  auto m = [&](double z) { return moment_series(spec, z); };
  std::size_t expansions = 0;
  const auto lo = expand_bracket([&](double z) { return m(z) < w; }, 0.0, -1.0, 2.0, 200,
                                 &expansions);
  if (!lo) throw NumericalError("moment-series bracket expansion did not terminate");
  const double hi = *lo == -1.0 ? 0.0 : *lo / 2.0;
  const RootResult r = bisect_increasing(m, w, *lo, hi);
  return {r.root, expansions, r.iterations};
}

/// S(w) = (1 + w)/w * M^{<-1>}(w) for w in (-nonzero_fraction, 0).
inline double s_transform_empirical(const WeightSpectrum& spec, double w) {
  const MomentInverse inv = inverse_moment_series(spec, w);
  return (1.0 + w) / w * inv.z;
}

/// Five-point central difference of the empirical S-transform with step
/// h = 1e-5 * max(|w|, 0.01).
inline double s_transform_empirical_derivative(const WeightSpectrum& spec, double w) {
  const double h = 1e-5 * std::max(std::fabs(w), 0.01);
  const double f2p = s_transform_empirical(spec, w + 2 * h);
  const double f1p = s_transform_empirical(spec, w + h);
  const double f1m = s_transform_empirical(spec, w - h);
  const double f2m = s_transform_empirical(spec, w - 2 * h);
  return (-f2p + 8.0 * f1p - 8.0 * f1m + f2m) / (12.0 * h);
}

}  // namespace implreg
