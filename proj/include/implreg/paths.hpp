#pragma once

// Implicit-regularization paths between weighted ridge at level lambda and
// full-data ridge at level mu:
//   general weights:   lambda = mu / S(-dfbar(mu)),
//   k-of-n subsampling: (1 - dfbar(mu)) (1 - lambda / mu) = 1 - k / n,
// with dfbar evaluated on the full-data Gram spectrum. Also the Monte-Carlo
// diagnostics that compare both sides of the equivalence.

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "implreg/errors.hpp"
#include "implreg/estimators.hpp"
#include "implreg/gram_spectrum.hpp"
#include "implreg/parallel.hpp"
#include "implreg/rng.hpp"
#include "implreg/roots.hpp"
#include "implreg/transforms.hpp"
#include "implreg/weights.hpp"

namespace implreg {

struct PathPoint {
  double mu = 0.0;
  double lambda = 0.0;
  /// k / n; empty for general weight spectra.
  std::optional<double> subsample_fraction;
  /// dfbar of the full-data fit at mu.
  double dof_normalized = 0.0;
};

/// (1 - dfbar)(1 - lambda/mu) - (1 - q); zero on an exact subsample path.
inline double path_residual(const PathPoint& pt) {
  if (!pt.subsample_fraction) throw InputError("path residual needs a subsample fraction");
  return (1.0 - pt.dof_normalized) * (1.0 - pt.lambda / pt.mu) - (1.0 - *pt.subsample_fraction);
}

inline void check_fraction(double q) {
  if (!(q > 0.0 && q <= 1.0)) throw InputError("subsample fraction must lie in (0, 1]");
}

/// Subsample path, forward direction: lambda = mu (q - dfbar) / (1 - dfbar).
inline PathPoint lambda_for_mu(const GramSpectrum& full, double q, double mu) {
  check_fraction(q);
  full.check_level(mu);
  PathPoint pt;
  pt.mu = mu;
  pt.subsample_fraction = q;
  pt.dof_normalized = full.dof_normalized(mu);
  if (q == 1.0 || mu == 0.0) {
    pt.lambda = q == 1.0 ? mu : 0.0;
    return pt;
  }
  const double d = pt.dof_normalized;
  if (!(d < 1.0)) throw InfeasiblePathError("full-data degrees of freedom fill the sample; no path");
  pt.lambda = mu * (q - d) / (1.0 - d);
  return pt;
}

/// General weights: lambda = mu / S(-dfbar(mu)) with the numerical S-transform.
inline PathPoint lambda_for_mu(const GramSpectrum& full, const WeightSpectrum& spec, double mu) {
  full.check_level(mu);
  PathPoint pt;
  pt.mu = mu;
  pt.dof_normalized = full.dof_normalized(mu);
  const double d = pt.dof_normalized;
  const double nz = spec.nonzero_fraction();
  if (!(d > kMomentRangeMargin && d < nz - kMomentRangeMargin))
    throw InfeasiblePathError("infeasible target: weight rank below required degrees of freedom (dfbar=" +
                              std::to_string(d) + ", nonzero fraction=" + std::to_string(nz) + ")");
  pt.lambda = mu / s_transform_empirical(spec, -d);
  return pt;
}

/// |lambda S(-dfbar) - mu| for a general-weight path point.
inline double path_residual(const PathPoint& pt, const WeightSpectrum& spec) {
  return std::fabs(pt.lambda * s_transform_empirical(spec, -pt.dof_normalized) - pt.mu);
}

/// Subsample path, inverse direction: the mu >= lambda solving
/// (1 - dfbar(mu))(1 - lambda/mu) = 1 - q. The left side increases in mu.
inline PathPoint mu_for_lambda(const GramSpectrum& full, double q, double lambda) {
  check_fraction(q);
  if (!(lambda >= 0.0) || !std::isfinite(lambda))
    throw InputError("mu_for_lambda needs a finite lambda >= 0");
  PathPoint pt;
  pt.lambda = lambda;
  pt.subsample_fraction = q;
  if (q == 1.0) {
    pt.mu = lambda;
    pt.dof_normalized = full.dof_normalized(lambda);
    return pt;
  }
  const double scale = full.max() > 0.0 ? full.max() : std::max(lambda, 1.0);
  auto f = [&](double mu) {
    return (1.0 - full.dof_normalized(mu)) * (1.0 - lambda / mu) - (1.0 - q);
  };
  const double lo = std::max(lambda, 1e-12 * scale);
  if (f(lo) > 0.0)
    throw InfeasiblePathError("path endpoint out of range: k/n exceeds the ridgeless degrees of freedom");
  const auto hi = expand_bracket([&](double mu) { return f(mu) >= 0.0; }, 0.0, 10.0 * scale, 2.0, 200);
  if (!hi) throw InfeasiblePathError("path endpoint out of range: no root after 200 expansions");
  BisectionOptions opt;
  opt.geometric = true;
  pt.mu = bisect_increasing(f, 0.0, lo, *hi, opt).root;
  pt.dof_normalized = full.dof_normalized(pt.mu);
  return pt;
}

/// Full-data path at lambda = 0 predicted from a population spectrum H of
/// Phi^T Phi / n: v solves 1/v = mu + gamma * mean(r / (1 + v r)) and
/// psi = p / k = (1/v) / mean(r / (1 + v r)).
struct FixedPointPath {
  double v;
  double psi;
};

inline FixedPointPath fixed_point_path_linear(std::span<const double> h, double gamma, double mu) {
  if (!(mu > 0.0)) throw InputError("fixed-point path needs mu > 0");
  if (!(gamma > 0.0)) throw InputError("fixed-point path needs gamma > 0");
  if (h.empty()) throw InputError("spectrum must be nonempty");
  for (double r : h)
    if (!(r >= 0.0) || !std::isfinite(r)) throw InputError("spectrum must be finite and nonnegative");
  auto avg = [&](double v) {
    double s = 0.0;
    for (double r : h) s += r / (1.0 + v * r);
    return s / static_cast<double>(h.size());
  };
  auto g = [&](double v) { return mu * v + gamma * v * avg(v) - 1.0; };
  BisectionOptions opt;
  opt.max_iterations = 10000;
  const double v = bisect_increasing(g, 0.0, 0.0, 1.0 / mu, opt).root;
  const double a = avg(v);
  if (!(a > 0.0)) throw NumericalError("fixed-point path: spectrum has no mass away from zero");
  return {v, (1.0 / v) / a};
}

// ---------------------------------------------------------------------------
// Monte-Carlo diagnostics

struct EquivalenceReport {
  /// mean over draws of |dfbar_W - dfbar_I|.
  double df_gap = 0.0;
  /// |mean over draws of a^T beta_W - a^T beta_I|.
  double projection_gap = 0.0;
  /// mean over draws of |a^T beta_W - a^T beta_I|.
  double projection_gap_per_draw = 0.0;
  std::size_t num_draws = 0;
  /// Draws whose spectrum places lambda below the floor.
  std::size_t skipped_draws = 0;
  std::uint64_t probe_seed = 0;
  PathPoint point;
};

/// a ~ N(0, I_p / p).
inline VectorXd draw_probe(Index p, std::uint64_t seed) {
  Rng rng(seed);
  VectorXd a(p);
  const double s = 1.0 / std::sqrt(static_cast<double>(p));
  for (Index i = 0; i < p; ++i) a[i] = rng.normal() * s;
  return a;
}

/// Subsample factorizations for draws 0..count-1 of a k-of-n operator.
inline std::vector<GramFactorization> subsample_factorizations(const FeatureDataset& data, Index k,
                                                               std::size_t count,
                                                               std::uint64_t master_seed,
                                                               bool eigenvalues_only = false) {
  std::vector<GramFactorization> out(count);
  parallel_for(count, [&](std::size_t j) {
    const WeightDraw w = draw_subsample(data.n(), k, derive_seed(master_seed, j, Stream::subsample));
    out[j] = GramFactorization::compute(data, w, SolveRoute::automatic, eigenvalues_only);
  });
  return out;
}

/// Compares subsampled fits at lambda(mu) with the full-data fit at mu, for
/// each mu, reusing the same draws. A probe may be supplied; otherwise one
/// is drawn from the probe stream of master_seed.
inline std::vector<EquivalenceReport> verify_equivalence(const FeatureDataset& data,
                                                         std::span<const double> mus, Index k,
                                                         std::size_t num_draws,
                                                         std::uint64_t master_seed,
                                                         std::optional<VectorXd> probe = std::nullopt) {
  if (k < 1 || k > data.n()) throw InputError("subsample size must satisfy 1 <= k <= n");
  if (num_draws < 1) throw InputError("need at least one draw");
  const std::uint64_t probe_seed = derive_seed(master_seed, 0, Stream::probe);
  const VectorXd a = probe ? *probe : draw_probe(data.p(), probe_seed);
  if (a.size() != data.p()) throw InputError("probe length does not match p");
  const GramFactorization full = GramFactorization::compute(data, WeightDraw::identity(data.n()));
  const double q = static_cast<double>(k) / static_cast<double>(data.n());
  std::vector<PathPoint> points;
  for (double mu : mus) points.push_back(lambda_for_mu(full.spectrum(), q, mu));

  const std::vector<GramFactorization> draws = subsample_factorizations(data, k, num_draws, master_seed);
  std::vector<EquivalenceReport> reports;
  for (const PathPoint& pt : points) {
    EquivalenceReport rep;
    rep.point = pt;
    rep.probe_seed = probe_seed;
    const double proj_full = a.dot(full.coefficients(pt.mu));
    double df_sum = 0.0, proj_sum = 0.0, abs_sum = 0.0;
    for (const GramFactorization& f : draws) {
      if (pt.lambda != 0.0 && pt.lambda <= f.spectrum().spectral_floor()) {
        ++rep.skipped_draws;
        continue;
      }
      const double pw = a.dot(f.coefficients(pt.lambda));
      df_sum += std::fabs(f.dof_normalized(pt.lambda) - pt.dof_normalized);
      proj_sum += pw;
      abs_sum += std::fabs(pw - proj_full);
      ++rep.num_draws;
    }
    if (rep.num_draws == 0)
      throw InfeasiblePathError("every draw places lambda below its spectral floor");
    const double m = static_cast<double>(rep.num_draws);
    rep.df_gap = df_sum / m;
    rep.projection_gap = std::fabs(proj_sum / m - proj_full);
    rep.projection_gap_per_draw = abs_sum / m;
    reports.push_back(rep);
  }
  return reports;
}

inline EquivalenceReport verify_equivalence(const FeatureDataset& data, double mu, Index k,
                                            std::size_t num_draws, std::uint64_t master_seed) {
  const double mus[] = {mu};
  return verify_equivalence(data, mus, k, num_draws, master_seed).front();
}

struct DofEquivalencePoint {
  PathPoint point;
  double df_gap = std::numeric_limits<double>::quiet_NaN();
  double df_weighted_mean = std::numeric_limits<double>::quiet_NaN();
  std::size_t num_draws = 0;
  std::size_t skipped_draws = 0;
};

/// Degrees-of-freedom side of the equivalence from precomputed spectra:
/// `full` is the spectrum of G_I and `weighted` holds one spectrum of G_W
/// per k-of-n draw. Points whose lambda falls below a draw's floor skip
/// that draw; a point with no admissible draw is reported with NaN gaps.
inline std::vector<DofEquivalencePoint> dof_equivalence(const GramSpectrum& full,
                                                        std::span<const GramSpectrum> weighted,
                                                        std::span<const double> mus, double q) {
  std::vector<DofEquivalencePoint> out;
  for (double mu : mus) {
    DofEquivalencePoint r;
    r.point = lambda_for_mu(full, q, mu);
    double gap = 0.0, mean = 0.0;
    for (const GramSpectrum& s : weighted) {
      if (r.point.lambda != 0.0 && r.point.lambda <= s.spectral_floor()) {
        ++r.skipped_draws;
        continue;
      }
      const double d = s.dof_normalized(r.point.lambda);
      gap += std::fabs(d - r.point.dof_normalized);
      mean += d;
      ++r.num_draws;
    }
    if (r.num_draws) {
      r.df_gap = gap / static_cast<double>(r.num_draws);
      r.df_weighted_mean = mean / static_cast<double>(r.num_draws);
    }
    out.push_back(r);
  }
  return out;
}

/// Spectra of W K W^T for k-of-n subsample draws of a kernel matrix.
inline std::vector<GramSpectrum> kernel_subsample_spectra(const MatrixXd& kmat, Index k,
                                                          std::size_t count,
                                                          std::uint64_t master_seed) {
  validate_kernel(kmat);
  const VectorXd y = VectorXd::Zero(kmat.rows());
  std::vector<GramSpectrum> out(count);
  parallel_for(count, [&](std::size_t j) {
    const WeightDraw w = draw_subsample(kmat.rows(), k, derive_seed(master_seed, j, Stream::subsample));
    out[j] = KernelFactorization::compute(kmat, y, w, true).spectrum();
  });
  return out;
}

inline GramSpectrum kernel_spectrum(const MatrixXd& kmat) {
  validate_kernel(kmat);
  return GramSpectrum::from_eigenvalues(symmetric_eigen(kmat, false).values, kmat.rows());
}

// ---------------------------------------------------------------------------
// Heatmap over (k, lambda) cells.

struct HeatmapCell {
  double k_over_n;
  double lambda;
  double df_bar_mean;  // NaN when no draw was admissible
  double proj_mean;    // NaN when no draw was admissible or no probe exists
  std::size_t n_draws;
};

struct HeatmapResult {
  std::vector<HeatmapCell> cells;
  std::vector<PathPoint> predicted;
  std::uint64_t probe_seed = 0;
};

namespace detail {
inline std::vector<PathPoint> predicted_paths(const GramSpectrum& full, std::span<const Index> k_grid,
                                              Index n, std::span<const double> mu_grid) {
  std::vector<PathPoint> out;
  for (double mu : mu_grid)
    for (Index k : k_grid)
      out.push_back(lambda_for_mu(full, static_cast<double>(k) / static_cast<double>(n), mu));
  return out;
}

inline void check_grids(std::span<const Index> k_grid, std::span<const double> lambda_grid, Index n,
                        std::size_t draws) {
  if (k_grid.empty() || lambda_grid.empty()) throw InputError("heatmap grids must be nonempty");
  if (draws < 1) throw InputError("need at least one draw per cell");
  for (Index k : k_grid)
    if (k < 1 || k > n) throw InputError("heatmap k values must satisfy 1 <= k <= n");
  for (double l : lambda_grid)
    if (!std::isfinite(l)) throw InputError("heatmap lambda values must be finite");
}
}  // namespace detail

/// Every row of the grid uses the same draws for all lambda values; draws
/// for row i are seeded by index i * draws_per_cell + j on the heatmap stream.
inline HeatmapResult path_heatmap(const FeatureDataset& data, std::span<const Index> k_grid,
                                  std::span<const double> lambda_grid, std::size_t draws_per_cell,
                                  std::uint64_t master_seed, std::span<const double> mu_grid = {}) {
  detail::check_grids(k_grid, lambda_grid, data.n(), draws_per_cell);
  HeatmapResult res;
  res.probe_seed = derive_seed(master_seed, 0, Stream::probe);
  const VectorXd a = draw_probe(data.p(), res.probe_seed);
  const std::size_t rows = k_grid.size(), nl = lambda_grid.size();
  // Factorizations for each (row, draw), then cell reductions in index order.
  std::vector<GramFactorization> facts(rows * draws_per_cell);
  parallel_for(rows * draws_per_cell, [&](std::size_t t) {
    const std::size_t i = t / draws_per_cell;
    const WeightDraw w = draw_subsample(data.n(), k_grid[i], derive_seed(master_seed, t, Stream::heatmap));
    facts[t] = GramFactorization::compute(data, w);
  });
  const double n = static_cast<double>(data.n());
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t l = 0; l < nl; ++l) {
      const double lambda = lambda_grid[l];
      double df = 0.0, proj = 0.0;
      std::size_t ok = 0;
      for (std::size_t j = 0; j < draws_per_cell; ++j) {
        const GramFactorization& f = facts[i * draws_per_cell + j];
        if (lambda != 0.0 && lambda <= f.spectrum().spectral_floor()) continue;
        df += f.dof_normalized(lambda);
        proj += a.dot(f.coefficients(lambda));
        ++ok;
      }
      const double nan = std::numeric_limits<double>::quiet_NaN();
      res.cells.push_back({static_cast<double>(k_grid[i]) / n, lambda,
                           ok ? df / static_cast<double>(ok) : nan,
                           ok ? proj / static_cast<double>(ok) : nan, ok});
    }
  }
  const GramFactorization full =
      GramFactorization::compute(data, WeightDraw::identity(data.n()), SolveRoute::automatic, true);
  res.predicted = detail::predicted_paths(full.spectrum(), k_grid, data.n(), mu_grid);
  return res;
}

/// Kernel version: degrees of freedom only, proj_mean is NaN.
inline HeatmapResult path_heatmap_kernel(const MatrixXd& kmat, std::span<const Index> k_grid,
                                         std::span<const double> lambda_grid,
                                         std::size_t draws_per_cell, std::uint64_t master_seed,
                                         std::span<const double> mu_grid = {}) {
  validate_kernel(kmat);
  detail::check_grids(k_grid, lambda_grid, kmat.rows(), draws_per_cell);
  HeatmapResult res;
  const std::size_t rows = k_grid.size();
  const VectorXd y = VectorXd::Zero(kmat.rows());
  std::vector<GramSpectrum> spectra(rows * draws_per_cell);
  parallel_for(rows * draws_per_cell, [&](std::size_t t) {
    const std::size_t i = t / draws_per_cell;
    const WeightDraw w = draw_subsample(kmat.rows(), k_grid[i], derive_seed(master_seed, t, Stream::heatmap));
    spectra[t] = KernelFactorization::compute(kmat, y, w, true).spectrum();
  });
  const double n = static_cast<double>(kmat.rows());
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t i = 0; i < rows; ++i) {
    for (double lambda : lambda_grid) {
      double df = 0.0;
      std::size_t ok = 0;
      for (std::size_t j = 0; j < draws_per_cell; ++j) {
        const GramSpectrum& s = spectra[i * draws_per_cell + j];
        if (lambda != 0.0 && lambda <= s.spectral_floor()) continue;
        df += s.dof_normalized(lambda);
        ++ok;
      }
      res.cells.push_back({static_cast<double>(k_grid[i]) / n, lambda,
                           ok ? df / static_cast<double>(ok) : nan, nan, ok});
    }
  }
  res.predicted = detail::predicted_paths(kernel_spectrum(kmat), k_grid, kmat.rows(), mu_grid);
  return res;
}

}  // namespace implreg
