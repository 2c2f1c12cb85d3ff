#pragma once

// Ensemble tuning by risk extrapolation. Risk estimates R_1..R_m0 of the
// first-m member averages determine
//   R_inf = (sum_m R_m - R_1 sum_m 1/m) / sum_m (1 - 1/m),
//   R_m   = R_1 / m + (1 - 1/m) R_inf   for m > m0,
// then the subsample size minimizing R_inf and the smallest ensemble size
// within delta of it are selected.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "implreg/ensemble.hpp"
#include "implreg/errors.hpp"
#include "implreg/estimators.hpp"
#include "implreg/rng.hpp"
#include "implreg/weights.hpp"

namespace implreg {

enum class RiskMethod { holdout, gcv };

constexpr std::string_view to_string(RiskMethod m) noexcept {
  return m == RiskMethod::holdout ? "holdout" : "gcv";
}

inline RiskMethod risk_method_from_string(std::string_view s) {
  if (s == "holdout") return RiskMethod::holdout;
  if (s == "gcv") return RiskMethod::gcv;
  throw InputError("unknown risk estimation method '" + std::string(s) + "'");
}

struct RiskLadder {
  std::vector<double> per_m;
  double r_inf = 0.0;
  std::size_t m0 = 0;
};

inline double estimate_r_inf(std::span<const double> per_m) {
  if (per_m.size() < 2) throw InputError("risk extrapolation needs m0 >= 2");
  double sum_r = 0.0, sum_inv = 0.0, sum_w = 0.0;
  for (std::size_t i = 0; i < per_m.size(); ++i) {
    if (!std::isfinite(per_m[i])) throw NumericalError("risk ladder has non-finite entries");
    const double inv = 1.0 / static_cast<double>(i + 1);
    sum_r += per_m[i];
    sum_inv += inv;
    sum_w += 1.0 - inv;
  }
  return (sum_r - per_m[0] * sum_inv) / sum_w;
}

inline RiskLadder make_ladder(std::vector<double> per_m) {
  RiskLadder l;
  l.r_inf = estimate_r_inf(per_m);
  l.m0 = per_m.size();
  l.per_m = std::move(per_m);
  return l;
}

/// R_1 / m + (1 - 1/m) r_inf.
inline double extrapolate_risk(const RiskLadder& ladder, std::size_t m) {
  if (m < 1) throw InputError("ensemble size must be at least 1");
  if (ladder.per_m.empty()) throw InputError("empty risk ladder");
  if (m == 1) return ladder.per_m[0];
  const double inv = 1.0 / static_cast<double>(m);
  return ladder.per_m[0] * inv + (1.0 - inv) * ladder.r_inf;
}

/// Estimated risk for m <= m0, extrapolated beyond.
inline double ladder_risk(const RiskLadder& ladder, std::size_t m) {
  if (m >= 1 && m <= ladder.per_m.size()) return ladder.per_m[m - 1];
  return extrapolate_risk(ladder, m);
}

inline constexpr std::size_t kMaxEnsembleSize = 1000000;

/// Smallest m with ladder_risk(m) <= r_inf + delta, capped at kMaxEnsembleSize.
inline std::size_t select_ensemble_size(const RiskLadder& ladder, double delta) {
  if (!(delta > 0.0)) throw InputError("delta must be positive");
  const double thr = ladder.r_inf + delta;
  for (std::size_t m = 1; m <= ladder.per_m.size(); ++m)
    if (ladder.per_m[m - 1] <= thr) return m;
  const double gap = ladder.per_m[0] - ladder.r_inf;
  double guess = std::ceil(gap / delta);
  if (!std::isfinite(guess)) guess = static_cast<double>(kMaxEnsembleSize);
  std::size_t m = static_cast<std::size_t>(
      std::clamp(guess, static_cast<double>(ladder.per_m.size() + 1), static_cast<double>(kMaxEnsembleSize)));
  // Settle rounding in the closed form against the extrapolation itself.
  while (m < kMaxEnsembleSize && extrapolate_risk(ladder, m) > thr) ++m;
  while (m > ladder.per_m.size() + 1 && extrapolate_risk(ladder, m - 1) <= thr) --m;
  return m;
}

struct HoldoutSplit {
  std::vector<Index> train;
  std::vector<Index> test;
};

/// Random split with round(fraction * n) test rows, both parts sorted.
inline HoldoutSplit make_split(Index n, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) throw InputError("holdout fraction must lie in (0, 1)");
  const Index n_test = static_cast<Index>(std::llround(fraction * static_cast<double>(n)));
  if (n_test < 10) throw InputError("holdout split leaves fewer than 10 test rows");
  if (n - n_test < 1) throw InputError("holdout split leaves no training rows");
  Rng rng(seed);
  const std::vector<std::size_t> perm = rng.permutation(static_cast<std::size_t>(n));
  HoldoutSplit s;
  for (Index i = 0; i < n; ++i) {
    const Index r = static_cast<Index>(perm[static_cast<std::size_t>(i)]);
    (i < n_test ? s.test : s.train).push_back(r);
  }
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.test.begin(), s.test.end());
  return s;
}

inline FeatureDataset take_rows(const FeatureDataset& data, const std::vector<Index>& rows) {
  MatrixXd phi(static_cast<Index>(rows.size()), data.p());
  VectorXd y(static_cast<Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    phi.row(static_cast<Index>(i)) = data.phi.row(rows[i]);
    y[static_cast<Index>(i)] = data.y[rows[i]];
  }
  FeatureDataset out = FeatureDataset::create(std::move(phi), std::move(y), false);
  out.centered = data.centered;
  return out;
}

struct LadderOptions {
  RiskMethod method = RiskMethod::holdout;
  double holdout_fraction = 0.2;
};

/// Seeds derived from master_seed: the split on the split stream (shared by
/// every k) and the members of the ladder at k on the ladder stream index k.
inline std::uint64_t split_seed(std::uint64_t master_seed) {
  return derive_seed(master_seed, 0, Stream::split);
}

inline std::uint64_t ladder_seed(std::uint64_t master_seed, Index k) {
  return derive_seed(master_seed, static_cast<std::uint64_t>(k), Stream::ladder);
}

/// Training data the ladder members are fitted on.
inline FeatureDataset ladder_training_data(const FeatureDataset& data, const LadderOptions& opt,
                                           std::uint64_t master_seed) {
  if (opt.method == RiskMethod::gcv) return data;
  return take_rows(data, make_split(data.n(), opt.holdout_fraction, split_seed(master_seed)).train);
}

/// Holdout: test MSE of the first-m average, members fitted on the training
/// rows. GCV: (1/n) ||y - yhat_m||^2 / (1 - dfbar_m)^2 on the full data with
/// dfbar_m the mean member dfbar.
inline RiskLadder estimate_risk_ladder(const FeatureDataset& data, Index k, double lambda,
                                       std::size_t m0, const LadderOptions& opt,
                                       std::uint64_t master_seed) {
  if (m0 < 2) throw InputError("risk ladder needs m0 >= 2");
  std::vector<double> per_m(m0);
  WeightParams params{WeightKind::subsample, k, 0.9};
  if (opt.method == RiskMethod::holdout) {
    const HoldoutSplit split = make_split(data.n(), opt.holdout_fraction, split_seed(master_seed));
    const FeatureDataset train = take_rows(data, split.train);
    const FeatureDataset test = take_rows(data, split.test);
    if (k < 1 || k > train.n())
      throw InputError("subsample size " + std::to_string(k) + " exceeds the " +
                       std::to_string(train.n()) + " training rows");
    const EnsembleFit fit = fit_ensemble(train, params, lambda, m0, ladder_seed(master_seed, k));
    VectorXd sum = VectorXd::Zero(data.p());
    for (std::size_t m = 0; m < m0; ++m) {
      sum += fit.members[m].beta;
      per_m[m] = conditional_risk_empirical(sum / static_cast<double>(m + 1), test.phi, test.y);
    }
  } else {
    if (k < 1 || k > data.n()) throw InputError("subsample size must satisfy 1 <= k <= n");
    const EnsembleFit fit = fit_ensemble(data, params, lambda, m0, ladder_seed(master_seed, k));
    VectorXd sum = VectorXd::Zero(data.p());
    double df_sum = 0.0;
    for (std::size_t m = 0; m < m0; ++m) {
      sum += fit.members[m].beta;
      df_sum += degrees_of_freedom_normalized(fit.members[m]);
      const double dfm = df_sum / static_cast<double>(m + 1);
      const double denom = (1.0 - dfm) * (1.0 - dfm);
      if (!(denom > 0.0)) throw NumericalError("GCV denominator vanishes");
      const VectorXd r = data.y - data.phi * (sum / static_cast<double>(m + 1));
      per_m[m] = r.squaredNorm() / static_cast<double>(data.n()) / denom;
    }
  }
  return make_ladder(std::move(per_m));
}

struct TuneOptions {
  LadderOptions ladder;
  /// Fit the final M_hat-ensemble; disable to report the selection only.
  bool fit_final = true;
};

struct TuneResult {
  Index k_hat = 0;
  std::size_t m_hat = 1;
  double lambda = 0.0;
  std::map<Index, RiskLadder> ladder_per_k;
  /// Grid values whose ladder could not be built, with the reason.
  std::map<Index, std::string> infeasible;
  EnsembleFit final_fit;
  bool k_within_rank = true;
  Index gram_rank = 0;
};

/// rank(G_I) from the full-data spectrum.
inline Index gram_rank(const FeatureDataset& data) {
  return GramFactorization::compute(data, WeightDraw::identity(data.n()), SolveRoute::automatic, true)
      .spectrum()
      .rank();
}

/// k_hat <= rank(G_I).
inline bool optimal_k_bound_check(const FeatureDataset& data, Index k_hat) {
  return k_hat <= gram_rank(data);
}

inline TuneResult tune(const FeatureDataset& data, double lambda, std::span<const Index> k_grid,
                       std::size_t m0, double delta, const TuneOptions& opt,
                       std::uint64_t master_seed) {
  if (k_grid.empty()) throw InputError("k grid must be nonempty");
  if (!(delta > 0.0)) throw InputError("delta must be positive");
  std::vector<Index> ks(k_grid.begin(), k_grid.end());
  std::sort(ks.begin(), ks.end());
  ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
  TuneResult res;
  res.lambda = lambda;
  double best = std::numeric_limits<double>::infinity();
  for (Index k : ks) {
    try {
      RiskLadder l = estimate_risk_ladder(data, k, lambda, m0, opt.ladder, master_seed);
      if (l.r_inf < best) {
        best = l.r_inf;
        res.k_hat = k;
      }
      res.ladder_per_k.emplace(k, std::move(l));
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::io) throw;
      res.infeasible.emplace(k, e.what());
    }
  }
  if (res.ladder_per_k.empty()) throw InfeasiblePathError("no feasible subsample size");
  res.m_hat = select_ensemble_size(res.ladder_per_k.at(res.k_hat), delta);
  res.gram_rank = gram_rank(data);
  res.k_within_rank = res.k_hat <= res.gram_rank;
  if (opt.fit_final) {
    const FeatureDataset train = ladder_training_data(data, opt.ladder, master_seed);
    res.final_fit = fit_ensemble(train, {WeightKind::subsample, res.k_hat, 0.9}, lambda, res.m_hat,
                                 ladder_seed(master_seed, res.k_hat));
  }
  return res;
}

/// Holdout risk of full-data ridge fits on the training rows of the same
/// split the ladders use, one per mu.
inline std::vector<double> holdout_ridge_risks(const FeatureDataset& data, std::span<const double> mus,
                                               double fraction, std::uint64_t master_seed) {
  const HoldoutSplit split = make_split(data.n(), fraction, split_seed(master_seed));
  const FeatureDataset train = take_rows(data, split.train);
  const FeatureDataset test = take_rows(data, split.test);
  const GramFactorization f = GramFactorization::compute(train, WeightDraw::identity(train.n()));
  std::vector<double> out;
  for (double mu : mus) out.push_back(conditional_risk_empirical(f.coefficients(mu), test.phi, test.y));
  return out;
}

}  // namespace implreg
