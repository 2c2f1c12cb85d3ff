#pragma once

#include <algorithm>
#include <cmath>
#include <span>

#include "implreg/errors.hpp"
#include "implreg/linalg.hpp"

namespace implreg {

/// Spectrum of an n x n Gram matrix, stored as its positive eigenvalues
/// (after the rank cutoff) plus the ambient dimension n. Every degrees of
/// freedom evaluation and path computation reads from this.
class GramSpectrum {
 public:
  GramSpectrum() = default;

  /// `eigenvalues` may be any subset of the spectrum that contains all the
  /// positive eigenvalues; the rest are implicitly zero.
  static GramSpectrum from_eigenvalues(std::span<const double> eigenvalues, Index n) {
    if (n < 1) throw InputError("Gram dimension must be positive");
    if (static_cast<Index>(eigenvalues.size()) > n)
      throw InputError("more eigenvalues than the Gram dimension");
    double lmax = 0.0;
    for (double e : eigenvalues) {
      if (!std::isfinite(e)) throw NumericalError("non-finite Gram eigenvalue");
      lmax = std::max(lmax, e);
    }
    const double thr = rank_threshold(lmax, n);
    std::vector<double> kept;
    kept.reserve(eigenvalues.size());
    for (double e : eigenvalues)
      if (e > thr) kept.push_back(e);
    std::sort(kept.begin(), kept.end(), std::greater<>());
    GramSpectrum s;
    s.values_ = to_eigen(kept);
    s.n_ = n;
    s.threshold_ = thr;
    return s;
  }

  static GramSpectrum from_eigenvalues(const VectorXd& eigenvalues, Index n) {
    return from_eigenvalues(std::span<const double>(eigenvalues.data(),
                                                    static_cast<std::size_t>(eigenvalues.size())),
                            n);
  }

  /// Positive eigenvalues, nonincreasing.
  const VectorXd& positive() const noexcept { return values_; }

  /// All n eigenvalues, nonincreasing, zero-padded.
  VectorXd padded() const {
    VectorXd out = VectorXd::Zero(n_);
    out.head(values_.size()) = values_;
    return out;
  }

  Index n() const noexcept { return n_; }
  Index rank() const noexcept { return values_.size(); }
  double threshold() const noexcept { return threshold_; }
  double max() const noexcept { return values_.size() ? values_[0] : 0.0; }
  double min_positive() const noexcept {
    return values_.size() ? values_[values_.size() - 1] : 0.0;
  }

  /// Smallest admissible negative ridge level, relaxed by a relative 1e-8.
  double spectral_floor() const noexcept { return -min_positive() * (1.0 - 1e-8); }

  void check_level(double lambda) const {
    if (lambda == 0.0 || rank() == 0) return;
    if (!std::isfinite(lambda) || lambda <= spectral_floor())
      throw SpectralFloorError(lambda, min_positive());
  }

  /// tr[G (G + lambda I)^+]; the rank at lambda = 0.
  double dof(double lambda) const {
    check_level(lambda);
    if (lambda == 0.0) return static_cast<double>(rank());
    double s = 0.0;
    for (Index i = 0; i < values_.size(); ++i) s += values_[i] / (values_[i] + lambda);
    return s;
  }

  double dof_normalized(double lambda) const { return dof(lambda) / static_cast<double>(n_); }

  /// d/dlambda of dof_normalized.
  double dof_normalized_derivative(double lambda) const {
    check_level(lambda);
    double s = 0.0;
    for (Index i = 0; i < values_.size(); ++i) {
      const double r = values_[i] + lambda;
      s += values_[i] / (r * r);
    }
    return -s / static_cast<double>(n_);
  }

 private:
  VectorXd values_;
  Index n_ = 0;
  double threshold_ = 0.0;
};

}  // namespace implreg
