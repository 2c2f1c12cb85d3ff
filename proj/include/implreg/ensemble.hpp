#pragma once

// M-ensembles of weighted ridge fits, conditional prediction risk, and the
// finite-ensemble risk decomposition
//   R_M = R_full + (C / M) * tr[(G+mu)^-1 y y^T (G+mu)^-1] / n
// along a subsample path.

#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "implreg/errors.hpp"
#include "implreg/estimators.hpp"
#include "implreg/parallel.hpp"
#include "implreg/paths.hpp"
#include "implreg/rng.hpp"
#include "implreg/transforms.hpp"
#include "implreg/weights.hpp"

namespace implreg {

/// Second moment of the test features, best linear projection and residual
/// variance: R(beta) = (beta - beta0)^T Sigma0 (beta - beta0) + sigma0^2.
struct TestOracle {
  MatrixXd sigma0;
  VectorXd beta0;
  double sigma0_sq = 0.0;
  /// True when sigma0_sq (or sigma0) came from a Monte-Carlo estimate.
  bool estimated = false;
};

inline double conditional_risk_analytic(const VectorXd& beta, const TestOracle& oracle) {
  if (beta.size() != oracle.beta0.size() || oracle.sigma0.rows() != beta.size() ||
      oracle.sigma0.cols() != beta.size())
    throw InputError("coefficient and oracle dimensions disagree");
  const VectorXd e = beta - oracle.beta0;
  return e.dot(oracle.sigma0 * e) + oracle.sigma0_sq;
}

inline double conditional_risk_empirical(const VectorXd& beta, const MatrixXd& test_phi,
                                         const VectorXd& test_y) {
  if (test_phi.rows() < 1) throw InputError("test set must be nonempty");
  if (test_phi.cols() != beta.size() || test_y.size() != test_phi.rows())
    throw InputError("test set dimensions disagree with coefficients");
  return (test_y - test_phi * beta).squaredNorm() / static_cast<double>(test_phi.rows());
}

struct EnsembleFit {
  std::vector<RidgeFit> members;
  VectorXd mean_beta;
  double lambda = 0.0;
  WeightKind weight_kind = WeightKind::subsample;
  Index k = 0;
  /// Draws rejected because lambda fell below their spectral floor.
  std::size_t rejected_draws = 0;

  /// Average of the first m members.
  VectorXd prefix_mean(std::size_t m) const {
    if (m < 1 || m > members.size()) throw InputError("prefix size out of range");
    VectorXd s = VectorXd::Zero(mean_beta.size());
    for (std::size_t i = 0; i < m; ++i) s += members[i].beta;
    return s / static_cast<double>(m);
  }
};

inline constexpr std::size_t kMaxConsecutiveRejections = 10;

/// Member j uses derive_seed(master, j, stream of the weight kind); a rejected
/// draw is replaced by attempt a on the retry stream of that member seed.
inline EnsembleFit fit_ensemble(const FeatureDataset& data, const WeightParams& params,
                                double lambda, std::size_t m, std::uint64_t master_seed) {
  if (m < 1) throw InputError("ensemble size must be at least 1");
  if (!std::isfinite(lambda)) throw InputError("lambda must be finite");
  EnsembleFit fit;
  fit.lambda = lambda;
  fit.weight_kind = params.kind;
  fit.k = params.kind == WeightKind::identity ? data.n() : params.k;
  fit.members.resize(m);
  std::vector<std::size_t> rejected(m, 0);
  parallel_for(m, [&](std::size_t j) {
    const std::uint64_t base = derive_seed(master_seed, j, stream_for(params.kind));
    for (std::size_t attempt = 0;; ++attempt) {
      const std::uint64_t seed = attempt == 0 ? base : derive_seed(base, attempt, Stream::retry);
      const WeightDraw w = draw_weights(data.n(), params, seed);
      const GramFactorization f = GramFactorization::compute(data, w);
      if (lambda == 0.0 || lambda > f.spectrum().spectral_floor()) {
        fit.members[j] = make_fit(f, lambda);
        rejected[j] = attempt;
        return;
      }
      if (attempt >= kMaxConsecutiveRejections)
        throw NumericalError("persistent spectral-floor violation: lambda=" + std::to_string(lambda) +
                             " rejected by " + std::to_string(attempt + 1) + " consecutive draws");
    }
  });
  fit.mean_beta = VectorXd::Zero(data.p());
  for (std::size_t j = 0; j < m; ++j) {
    fit.mean_beta += fit.members[j].beta;
    fit.rejected_draws += rejected[j];
  }
  fit.mean_beta /= static_cast<double>(m);
  return fit;
}

inline VectorXd predict(const EnsembleFit& fit, const MatrixXd& phi0) {
  if (phi0.cols() != fit.mean_beta.size()) throw InputError("prediction features have wrong column count");
  return phi0 * fit.mean_beta;
}

// ---------------------------------------------------------------------------

struct RiskDecomposition {
  double mu = 0.0;
  double lambda = 0.0;
  double k_over_n = 1.0;
  double dof_normalized = 0.0;
  double r_full = 0.0;
  /// S'(-dfbar) of the subsample spectrum.
  double s_prime = 0.0;
  /// tr[(G+mu)^-1 (Phi Sigma0 Phi^T / n) (G+mu)^-1] / n.
  double test_trace = 0.0;
  double c_constant = 0.0;
  double path_slope = 0.0;
  double variance_trace = 0.0;
  std::map<std::size_t, double> predicted_curve;

  double predicted(std::size_t m) const {
    return r_full + c_constant / static_cast<double>(m) * variance_trace;
  }
};

/// d mu / d lambda along the subsample path at (mu, lambda), from implicit
/// differentiation of (1 - dfbar(mu))(1 - lambda/mu) = 1 - q.
inline double path_slope_implicit(const GramSpectrum& full, double mu, double lambda) {
  const double d = full.dof_normalized(mu);
  const double dp = full.dof_normalized_derivative(mu);
  const double fmu = -dp * (1.0 - lambda / mu) + (1.0 - d) * lambda / (mu * mu);
  const double flambda = -(1.0 - d) / mu;
  return -flambda / fmu;
}

/// d mu / d lambda by central difference of mu_for_lambda with step
/// 1e-4 * max(lambda, 1e-3 * lambda_max); forward difference when the
/// lower node would be negative, implicit differentiation for lambda < 0.
inline double path_slope_numeric(const GramSpectrum& full, double q, double mu, double lambda) {
  if (lambda < 0.0) return path_slope_implicit(full, mu, lambda);
  const double h = 1e-4 * std::max(lambda, 1e-3 * full.max());
  const double up = mu_for_lambda(full, q, lambda + h).mu;
  if (lambda - h >= 0.0) return (up - mu_for_lambda(full, q, lambda - h).mu) / (2.0 * h);
  return (up - mu_for_lambda(full, q, lambda).mu) / h;
}

inline RiskDecomposition risk_decomposition(const FeatureDataset& data, double mu, Index k,
                                            const TestOracle& oracle,
                                            std::span<const std::size_t> ms = {}) {
  if (k < 1 || k > data.n()) throw InputError("subsample size must satisfy 1 <= k <= n");
  if (!(mu > 0.0)) throw InputError("risk decomposition needs mu > 0");
  const GramFactorization full = GramFactorization::compute(data, WeightDraw::identity(data.n()));
  const GramSpectrum& g = full.spectrum();
  const double q = static_cast<double>(k) / static_cast<double>(data.n());
  const PathPoint pt = lambda_for_mu(g, q, mu);

  RiskDecomposition rd;
  rd.mu = mu;
  rd.lambda = pt.lambda;
  rd.k_over_n = q;
  rd.dof_normalized = pt.dof_normalized;
  rd.r_full = conditional_risk_analytic(full.coefficients(mu), oracle);
  rd.s_prime = s_transform_subsample_derivative(q, -pt.dof_normalized);

  const VectorXd& e = g.positive();
  const MatrixXd& f = full.factor();
  const VectorXd& c = full.coords();
  const MatrixXd sf = oracle.sigma0 * f;
  double t0 = 0.0, vt = 0.0;
  for (Index i = 0; i < e.size(); ++i) {
    const double r2 = (e[i] + mu) * (e[i] + mu);
    t0 += f.col(i).dot(sf.col(i)) / r2;
    vt += c[i] * c[i] / r2;
  }
  const double perp = std::max(0.0, full.weighted_response_norm2() - c.squaredNorm());
  const double n = static_cast<double>(data.n());
  rd.test_trace = t0 / n;
  rd.variance_trace = vt + perp / (mu * mu);
  rd.path_slope = q == 1.0 ? 1.0 : path_slope_numeric(g, q, mu, pt.lambda);
  rd.c_constant = -rd.path_slope * pt.lambda * pt.lambda * rd.s_prime * rd.test_trace;
  for (std::size_t m : ms) {
    if (m < 1) throw InputError("ensemble sizes must be positive");
    rd.predicted_curve[m] = rd.predicted(m);
  }
  return rd;
}

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
};

/// Least squares of R_M on 1/M.
inline RateFit rate_check(const std::map<std::size_t, double>& risks) {
  if (risks.size() < 3) throw InputError("rate check needs at least 3 distinct ensemble sizes");
  double sx = 0.0, sy = 0.0;
  for (const auto& [m, r] : risks) {
    if (m < 1) throw InputError("ensemble sizes must be positive");
    sx += 1.0 / static_cast<double>(m);
    sy += r;
  }
  const double cnt = static_cast<double>(risks.size());
  const double mx = sx / cnt, my = sy / cnt;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (const auto& [m, r] : risks) {
    const double dx = 1.0 / static_cast<double>(m) - mx, dy = r - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  RateFit out;
  out.slope = sxy / sxx;
  out.intercept = my - out.slope * mx;
  double sse = 0.0;
  for (const auto& [m, r] : risks) {
    const double res = r - (out.intercept + out.slope / static_cast<double>(m));
    sse += res * res;
  }
  out.r_squared = syy > 0.0 ? 1.0 - sse / syy : 1.0;
  return out;
}

struct EmpiricalRiskCurve {
  /// Average conditional risk of the first-M member means, per M.
  std::map<std::size_t, double> risk;
  std::size_t repetitions = 0;
  std::size_t rejected_draws = 0;
};

/// Repetition r fits one ensemble of max(ms) members with master seed
/// derive_seed(master, r, ensemble stream); R_M uses its first M members.
inline EmpiricalRiskCurve empirical_risk_curve(const FeatureDataset& data, const TestOracle& oracle,
                                               const WeightParams& params, double lambda,
                                               std::span<const std::size_t> ms,
                                               std::size_t repetitions, std::uint64_t master_seed) {
  if (ms.empty()) throw InputError("need at least one ensemble size");
  if (repetitions < 1) throw InputError("need at least one repetition");
  std::size_t mmax = 0;
  for (std::size_t m : ms) {
    if (m < 1) throw InputError("ensemble sizes must be positive");
    mmax = std::max(mmax, m);
  }
  EmpiricalRiskCurve out;
  out.repetitions = repetitions;
  for (std::size_t r = 0; r < repetitions; ++r) {
    const EnsembleFit fit =
        fit_ensemble(data, params, lambda, mmax, derive_seed(master_seed, r, Stream::ensemble));
    out.rejected_draws += fit.rejected_draws;
    for (std::size_t m : ms) out.risk[m] += conditional_risk_analytic(fit.prefix_mean(m), oracle);
  }
  for (auto& [m, v] : out.risk) v /= static_cast<double>(repetitions);
  return out;
}

}  // namespace implreg
