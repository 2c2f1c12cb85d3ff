#pragma once

// Synthetic data: AR(1) covariance, the M-AR1 response model
//   y = x^T beta0 + (||x||^2 - tr Sigma) / p + eps,  x = Sigma^{1/2} z,
// with z and eps iid standardized t_5, and linear, random ReLU and cubic
// polynomial kernel features.

#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>

#include "implreg/ensemble.hpp"
#include "implreg/errors.hpp"
#include "implreg/linalg.hpp"
#include "implreg/parallel.hpp"
#include "implreg/rng.hpp"

namespace implreg {

enum class FeatureKind { linear, random_relu, kernel_poly3 };

constexpr std::string_view to_string(FeatureKind kind) noexcept {
  switch (kind) {
    case FeatureKind::linear: return "linear";
    case FeatureKind::random_relu: return "random_relu";
    case FeatureKind::kernel_poly3: return "kernel_poly3";
  }
  return "unknown";
}

inline FeatureKind feature_kind_from_string(std::string_view s) {
  if (s == "linear") return FeatureKind::linear;
  if (s == "random_relu") return FeatureKind::random_relu;
  if (s == "kernel_poly3") return FeatureKind::kernel_poly3;
  throw InputError("unknown feature kind '" + std::string(s) + "'");
}

struct SimConfig {
  Index n = 1000;
  Index d = 100;
  Index p = 100;
  double rho_ar = 0.25;
  FeatureKind feature_kind = FeatureKind::linear;
  std::uint64_t seed = 0;

  void validate() const {
    if (n < 1) throw InputError("n must be positive");
    if (d < 5) throw InputError("raw dimension d must be at least 5");
    if (p < 1) throw InputError("p must be positive");
    if (!(rho_ar > 0.0 && rho_ar < 1.0)) throw InputError("rho_ar must lie in (0, 1)");
    if (feature_kind == FeatureKind::random_relu) {
      if (d != 2 * p) throw InputError("random_relu features need d = 2p");
    } else if (d != p) {
      throw InputError("linear and kernel features need d = p");
    }
  }
};

/// Sigma_ij = rho^|i-j|.
inline MatrixXd ar1_covariance(Index d, double rho) {
  if (d < 1) throw InputError("dimension must be positive");
  if (!(rho > 0.0 && rho < 1.0)) throw InputError("rho must lie in (0, 1)");
  MatrixXd s(d, d);
  for (Index i = 0; i < d; ++i)
    for (Index j = 0; j < d; ++j) s(i, j) = std::pow(rho, static_cast<double>(std::abs(i - j)));
  return s;
}

/// Flips v so that its first coordinate with |v_i| > 1e-12 is positive.
inline void fix_sign(VectorXd& v) {
  for (Index i = 0; i < v.size(); ++i) {
    if (std::fabs(v[i]) > 1e-12) {
      if (v[i] < 0.0) v = -v;
      return;
    }
  }
}

/// Mean of the top-`count` unit eigenvectors of a symmetric matrix, each
/// under the sign convention of fix_sign.
inline VectorXd top_eigenvector_average(const MatrixXd& s, Index count) {
  if (count < 1 || count > s.rows()) throw InputError("eigenvector count out of range");
  const SymmetricEigen eig = symmetric_eigen(s, true);
  VectorXd out = VectorXd::Zero(s.rows());
  for (Index j = 0; j < count; ++j) {
    VectorXd v = eig.vectors.col(j);
    fix_sign(v);
    out += v;
  }
  return out / static_cast<double>(count);
}

/// Symmetric square root of a PSD matrix.
inline MatrixXd symmetric_sqrt(const MatrixXd& s) {
  const SymmetricEigen eig = symmetric_eigen(s, true);
  const VectorXd r = eig.values.cwiseMax(0.0).cwiseSqrt();
  return eig.vectors * r.asDiagonal() * eig.vectors.transpose();
}

inline constexpr int kStudentDof = 5;
/// Standard deviation of t_5.
inline const double kStudentSd = std::sqrt(5.0 / 3.0);
/// E[z^4] for standardized t_5: 3 nu^2 / ((nu-2)(nu-4)) / (nu/(nu-2))^2.
inline constexpr double kStandardizedT5FourthMoment = 9.0;

struct SimOracle {
  MatrixXd sigma_ar1;
  MatrixXd sigma_sqrt;
  VectorXd beta0;
  /// Residual variance around x^T beta0.
  double sigma0_sq = 0.0;
  Index p = 0;
  /// Oracle for linear features (Phi = x).
  TestOracle test_oracle;
};

/// Var[(||x||^2 - tr Sigma)/p + eps] = (2 tr Sigma^2 + (m4 - 3) sum Sigma_ii^2) / p^2 + 1,
/// uncorrelated with x^T beta0 since odd moments of z vanish.
inline double mar1_residual_variance(const MatrixXd& sigma, Index p) {
  const double tr2 = sigma.squaredNorm();
  const double diag2 = sigma.diagonal().squaredNorm();
  const double pp = static_cast<double>(p) * static_cast<double>(p);
  return 1.0 + (2.0 * tr2 + (kStandardizedT5FourthMoment - 3.0) * diag2) / pp;
}

inline SimOracle make_sim_oracle(const SimConfig& cfg) {
  cfg.validate();
  SimOracle o;
  o.sigma_ar1 = ar1_covariance(cfg.d, cfg.rho_ar);
  o.sigma_sqrt = symmetric_sqrt(o.sigma_ar1);
  o.beta0 = top_eigenvector_average(o.sigma_ar1, 5);
  o.p = cfg.p;
  o.sigma0_sq = mar1_residual_variance(o.sigma_ar1, cfg.p);
  o.test_oracle = {o.sigma_ar1, o.beta0, o.sigma0_sq, false};
  return o;
}

struct RawSample {
  MatrixXd x;
  VectorXd y;
};

/// `rows` fresh M-AR1 rows; row i draws from derive_seed(seed, i, stream).
inline RawSample sample_mar1(const SimOracle& o, Index rows, std::uint64_t seed,
                             Stream stream = Stream::data) {
  const Index d = o.sigma_ar1.rows();
  const double tr = o.sigma_ar1.trace();
  const double inv_p = 1.0 / static_cast<double>(o.p);
  RawSample s{MatrixXd(rows, d), VectorXd(rows)};
  MatrixXd z(rows, d);
  VectorXd eps(rows);
  parallel_for(static_cast<std::size_t>(rows), [&](std::size_t i) {
    Rng rng(derive_seed(seed, i, stream));
    const Index r = static_cast<Index>(i);
    for (Index j = 0; j < d; ++j) z(r, j) = rng.student_t(kStudentDof) / kStudentSd;
    eps[r] = rng.student_t(kStudentDof) / kStudentSd;
  });
  s.x.noalias() = z * o.sigma_sqrt;
  const VectorXd lin = s.x * o.beta0;
  for (Index i = 0; i < rows; ++i)
    s.y[i] = lin[i] + (s.x.row(i).squaredNorm() - tr) * inv_p + eps[i];
  return s;
}

struct SimData {
  RawSample raw;
  SimOracle oracle;
};

inline SimData gen_mar1(const SimConfig& cfg) {
  SimOracle o = make_sim_oracle(cfg);
  RawSample raw = sample_mar1(o, cfg.n, cfg.seed, Stream::data);
  return {std::move(raw), std::move(o)};
}

/// Phi = x (linear), ReLU(x F^T) with F_ij ~ N(0, d^{-1/2}) (random_relu).
/// Kernel features have no finite map; see poly3_kernel.
struct FeatureMap {
  FeatureKind kind = FeatureKind::linear;
  MatrixXd f;  // p x d, random_relu only

  MatrixXd apply(const MatrixXd& x) const {
    switch (kind) {
      case FeatureKind::linear: return x;
      case FeatureKind::random_relu: {
        if (x.cols() != f.cols()) throw InputError("raw dimension does not match feature map");
        MatrixXd phi = x * f.transpose();
        return phi.cwiseMax(0.0);
      }
      case FeatureKind::kernel_poly3: break;
    }
    throw InputError("kernel features have no explicit feature map");
  }
};

inline FeatureMap make_feature_map(const SimConfig& cfg) {
  cfg.validate();
  FeatureMap m;
  m.kind = cfg.feature_kind;
  if (cfg.feature_kind == FeatureKind::random_relu) {
    Rng rng(derive_seed(cfg.seed, 0, Stream::features));
    // Variance d^{-1/2}.
    const double sd = std::pow(static_cast<double>(cfg.d), -0.25);
    m.f.resize(cfg.p, cfg.d);
    for (Index i = 0; i < cfg.p; ++i)
      for (Index j = 0; j < cfg.d; ++j) m.f(i, j) = rng.normal() * sd;
  }
  return m;
}

/// K_ij = (<a_i, b_j> / d)^3.
inline MatrixXd poly3_kernel(const MatrixXd& a, const MatrixXd& b) {
  if (a.cols() != b.cols()) throw InputError("kernel inputs have different dimensions");
  MatrixXd k = a * b.transpose() / static_cast<double>(a.cols());
  return k.array().cube().matrix();
}

inline MatrixXd poly3_kernel(const MatrixXd& x) {
  MatrixXd k = poly3_kernel(x, x);
  return (0.5 * (k + k.transpose())).eval();
}

/// Feature-space test oracle estimated from `rows` fresh samples:
/// Sigma0 = Phi0^T Phi0 / m, beta0 the least-squares projection, sigma0^2
/// the mean squared residual.
inline TestOracle estimate_feature_oracle(const SimOracle& o, const FeatureMap& map, Index rows,
                                          std::uint64_t seed) {
  const RawSample s = sample_mar1(o, rows, seed, Stream::oracle);
  const MatrixXd phi = map.apply(s.x);
  TestOracle t;
  const double m = static_cast<double>(rows);
  t.sigma0 = MatrixXd::Zero(phi.cols(), phi.cols());
  t.sigma0.selfadjointView<Eigen::Lower>().rankUpdate(phi.transpose(), 1.0 / m);
  t.sigma0 = t.sigma0.selfadjointView<Eigen::Lower>();
  const VectorXd b = phi.transpose() * s.y / m;
  t.beta0 = t.sigma0.ldlt().solve(b);
  t.sigma0_sq = (s.y - phi * t.beta0).squaredNorm() / m;
  t.estimated = true;
  return t;
}

struct KernelLinearization {
  double c0, c1, c2;
};

/// Linearization constants of K_ij = g(||x_i||^2/p, <x_i,x_j>/p, ||x_j||^2/p):
/// c2 = g1, c1 = g(tau,0,tau) + g2 tr[Sigma^2]/(2 p^2),
/// c0 = g(tau,tau,tau) - g(tau,0,tau) - c2 tr[Sigma]/p.
inline KernelLinearization kernel_linearization(double g_tt, double g_t0, double g1, double g2,
                                                double trs_p, double trs2_p2) {
  const double c2 = g1;
  return {g_tt - g_t0 - c2 * trs_p, g_t0 + g2 * trs2_p2 / 2.0, c2};
}

}  // namespace implreg
