#pragma once

// Bracketed bisection for monotone scalar equations. All path and transform
// inversions in the library go through these two routines.

#include <cmath>
#include <cstddef>
#include <optional>

#include "implreg/errors.hpp"

namespace implreg {

struct BisectionOptions {
  /// Stop once hi - lo <= abs_tol + rel_tol * |midpoint|. Zero tolerances
  /// run to full double precision.
  double abs_tol = 0.0;
  double rel_tol = 0.0;
  /// Bisect log(x) instead of x while the bracket spans more than a factor
  /// of 4 and both ends are positive.
  bool geometric = false;
  std::size_t max_iterations = 4000;
};

struct RootResult {
  double root;
  std::size_t iterations;
};

/// Root of an increasing function f on [lo, hi] with f(lo) <= target <= f(hi).
template <class F>
RootResult bisect_increasing(F&& f, double target, double lo, double hi,
                             const BisectionOptions& opt = {}) {
  if (!(lo <= hi)) throw NumericalError("bisection: invalid bracket");
  std::size_t it = 0;
  for (; it < opt.max_iterations; ++it) {
    double mid;
    if (opt.geometric && lo > 0.0 && hi > 4.0 * lo)
      mid = std::sqrt(lo) * std::sqrt(hi);
    else
      mid = lo + 0.5 * (hi - lo);
    if (mid <= lo || mid >= hi) break;
    if (hi - lo <= opt.abs_tol + opt.rel_tol * std::fabs(mid)) break;
    const double v = f(mid);
    if (std::isnan(v)) throw NumericalError("bisection: function returned NaN");
    if (v < target)
      lo = mid;
    else
      hi = mid;
  }
  if (it == opt.max_iterations) throw NumericalError("bisection: iteration limit reached");
  return {lo + 0.5 * (hi - lo), it};
}

/// Moves `edge` geometrically away from `anchor` (edge <- anchor + factor *
/// (edge - anchor)) until pred(edge) holds. Returns nullopt when
/// max_expansions doublings are exhausted.
template <class Pred>
std::optional<double> expand_bracket(Pred&& pred, double anchor, double edge,
                                     double factor, std::size_t max_expansions,
                                     std::size_t* expansions_used = nullptr) {
  for (std::size_t i = 0; i <= max_expansions; ++i) {
    if (pred(edge)) {
      if (expansions_used) *expansions_used = i;
      return edge;
    }
    edge = anchor + factor * (edge - anchor);
    if (!std::isfinite(edge)) break;
  }
  return std::nullopt;
}

}  // namespace implreg
