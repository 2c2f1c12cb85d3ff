#pragma once

// Weighted ridge and kernel ridge regression.
//
// With X = W Phi / sqrt(n) and y_w = W y / sqrt(n), the weighted ridge
// estimator is beta = (X^T X + lambda I)^+ X^T y_w, and the weighted Gram
// matrix is G_W = X X^T. Both the primal (p x p) and the dual (n x n) form
// reduce to the positive eigenpairs of the smaller Gram, which are computed
// once per (dataset, weight) pair and reused for every ridge level.

#include <cmath>
#include <memory>
#include <vector>

#include "implreg/errors.hpp"
#include "implreg/gram_spectrum.hpp"
#include "implreg/linalg.hpp"
#include "implreg/weights.hpp"

namespace implreg {

/// Features phi (n x p) and responses y (n).
struct FeatureDataset {
  MatrixXd phi;
  VectorXd y;
  bool centered = false;

  Index n() const noexcept { return phi.rows(); }
  Index p() const noexcept { return phi.cols(); }

  /// Validates shapes and finiteness; subtracts the mean of y when `center`.
  static FeatureDataset create(MatrixXd phi, VectorXd y, bool center = true) {
    if (phi.rows() < 1 || phi.cols() < 1) throw InputError("feature matrix must be nonempty");
    if (y.size() != phi.rows())
      throw InputError("response length " + std::to_string(y.size()) +
                       " does not match feature rows " + std::to_string(phi.rows()));
    if (!phi.allFinite()) throw InputError("feature matrix has non-finite entries");
    if (!y.allFinite()) throw InputError("response has non-finite entries");
    FeatureDataset d{std::move(phi), std::move(y), false};
    if (center) {
      d.y.array() -= d.y.mean();
      d.centered = true;
    }
    return d;
  }
};

enum class SolveRoute { automatic, primal, dual };

/// Positive eigenpairs of a weighted Gram, in the factored form
/// beta(lambda) = F diag(1 / (e + lambda)) c with F = X^T U and c = U^T y_w,
/// U the left singular vectors of X.
class GramFactorization {
 public:
  static GramFactorization compute(const FeatureDataset& data, const WeightDraw& w,
                                   SolveRoute route = SolveRoute::automatic,
                                   bool eigenvalues_only = false) {
    if (w.n() != data.n())
      throw InputError("weight dimension " + std::to_string(w.n()) + " does not match n=" +
                       std::to_string(data.n()));
    const double inv_sqrt_n = 1.0 / std::sqrt(static_cast<double>(data.n()));
    MatrixXd x;
    VectorXd yw;
    if (w.is_diagonal()) {
      const std::vector<Index> rows = w.support();
      x.resize(static_cast<Index>(rows.size()), data.p());
      yw.resize(static_cast<Index>(rows.size()));
      for (std::size_t r = 0; r < rows.size(); ++r) {
        const double s = w.weight(rows[r]) * inv_sqrt_n;
        x.row(static_cast<Index>(r)) = data.phi.row(rows[r]) * s;
        yw[static_cast<Index>(r)] = data.y[rows[r]] * s;
      }
    } else {
      x = w.apply(data.phi) * inv_sqrt_n;
      yw = w.apply(data.y) * inv_sqrt_n;
    }
    return from_design(x, yw, data.n(), w.id(), route, eigenvalues_only);
  }

  /// Factorization of a prepared design X (rows may be a subset of the n
  /// observations) and weighted response y_w.
  static GramFactorization from_design(const MatrixXd& x, const VectorXd& yw, Index n,
                                       WeightId id, SolveRoute route = SolveRoute::automatic,
                                       bool eigenvalues_only = false) {
    GramFactorization f;
    f.n_ = n;
    f.p_ = x.cols();
    f.id_ = id;
    f.y_norm2_ = yw.squaredNorm();
    const Index rows = x.rows();
    if (route == SolveRoute::automatic)
      route = (rows < x.cols()) ? SolveRoute::dual : SolveRoute::primal;
    f.route_ = route;
    if (rows == 0) {
      f.spectrum_ = std::make_shared<GramSpectrum>(GramSpectrum::from_eigenvalues(VectorXd(), n));
      f.factor_ = MatrixXd::Zero(x.cols(), 0);
      f.coords_ = VectorXd::Zero(0);
      f.has_vectors_ = !eigenvalues_only;
      return f;
    }
    MatrixXd gram;
    if (route == SolveRoute::primal) {
      gram = MatrixXd::Zero(x.cols(), x.cols());
      gram.selfadjointView<Eigen::Lower>().rankUpdate(x.transpose());
    } else {
      gram = MatrixXd::Zero(rows, rows);
      gram.selfadjointView<Eigen::Lower>().rankUpdate(x);
    }
    SymmetricEigen eig = symmetric_eigen(gram, !eigenvalues_only);
    const double thr = rank_threshold(eig.values.size() ? eig.values[0] : 0.0, n);
    Index r = 0;
    while (r < eig.values.size() && eig.values[r] > thr) ++r;
    f.spectrum_ = std::make_shared<GramSpectrum>(GramSpectrum::from_eigenvalues(eig.values.head(r), n));
    f.has_vectors_ = !eigenvalues_only;
    if (eigenvalues_only) return f;
    const VectorXd e = eig.values.head(r);
    if (route == SolveRoute::primal) {
      const MatrixXd v = eig.vectors.leftCols(r);
      const VectorXd se = e.array().sqrt();
      f.factor_ = v * se.asDiagonal();
      f.coords_ = (v.transpose() * (x.transpose() * yw)).cwiseQuotient(se);
    } else {
      const MatrixXd u = eig.vectors.leftCols(r);
      f.factor_ = x.transpose() * u;
      f.coords_ = u.transpose() * yw;
    }
    return f;
  }

  const GramSpectrum& spectrum() const noexcept { return *spectrum_; }
  std::shared_ptr<const GramSpectrum> shared_spectrum() const noexcept { return spectrum_; }
  SolveRoute route() const noexcept { return route_; }
  Index n() const noexcept { return n_; }
  Index p() const noexcept { return p_; }
  WeightId weight_id() const noexcept { return id_; }
  bool has_vectors() const noexcept { return has_vectors_; }

  /// F = X^T U, p x rank.
  const MatrixXd& factor() const { require_vectors(); return factor_; }
  /// c = U^T y_w.
  const VectorXd& coords() const { require_vectors(); return coords_; }
  /// ||y_w||^2.
  double weighted_response_norm2() const noexcept { return y_norm2_; }

  VectorXd coefficients(double lambda) const {
    require_vectors();
    spectrum_->check_level(lambda);
    const VectorXd& e = spectrum_->positive();
    VectorXd scaled(e.size());
    for (Index i = 0; i < e.size(); ++i) scaled[i] = coords_[i] / (e[i] + lambda);
    return factor_ * scaled;
  }

  double dof(double lambda) const { return spectrum_->dof(lambda); }
  double dof_normalized(double lambda) const { return spectrum_->dof_normalized(lambda); }

 private:
  void require_vectors() const {
    if (!has_vectors_) throw InputError("factorization was computed without eigenvectors");
  }

  std::shared_ptr<const GramSpectrum> spectrum_;
  MatrixXd factor_;
  VectorXd coords_;
  double y_norm2_ = 0.0;
  Index n_ = 0;
  Index p_ = 0;
  WeightId id_;
  SolveRoute route_ = SolveRoute::primal;
  bool has_vectors_ = false;
};

struct RidgeFit {
  VectorXd beta;
  double lambda = 0.0;
  WeightId weight_id;
  /// Spectrum of G_W = W Phi Phi^T W^T / n.
  std::shared_ptr<const GramSpectrum> gram_eigs;
};

inline RidgeFit make_fit(const GramFactorization& f, double lambda) {
  return {f.coefficients(lambda), lambda, f.weight_id(), f.shared_spectrum()};
}

/// G_W = W Phi Phi^T W^T / n.
inline MatrixXd compute_gram(const FeatureDataset& data, const WeightDraw& w) {
  if (w.n() != data.n()) throw InputError("weight dimension does not match dataset");
  const MatrixXd wphi = w.apply(data.phi);
  MatrixXd g = MatrixXd::Zero(data.n(), data.n());
  g.selfadjointView<Eigen::Lower>().rankUpdate(wphi, 1.0 / static_cast<double>(data.n()));
  return g.selfadjointView<Eigen::Lower>();
}

inline RidgeFit fit_weighted_ridge(const FeatureDataset& data, const WeightDraw& w, double lambda,
                                   SolveRoute route = SolveRoute::automatic) {
  return make_fit(GramFactorization::compute(data, w, route), lambda);
}

inline RidgeFit fit_ridge(const FeatureDataset& data, double lambda) {
  return fit_weighted_ridge(data, WeightDraw::identity(data.n()), lambda);
}

inline double degrees_of_freedom(const RidgeFit& fit) { return fit.gram_eigs->dof(fit.lambda); }

inline double degrees_of_freedom_normalized(const RidgeFit& fit) {
  return fit.gram_eigs->dof_normalized(fit.lambda);
}

inline VectorXd predict(const RidgeFit& fit, const MatrixXd& phi0) {
  if (phi0.cols() != fit.beta.size())
    throw InputError("prediction features have " + std::to_string(phi0.cols()) +
                     " columns, expected " + std::to_string(fit.beta.size()));
  return phi0 * fit.beta;
}

// ---------------------------------------------------------------------------
// Kernel ridge regression in dual form: alpha = (G_W + lambda I)^+ W y with
// G_W = W K W^T, K on the same scale as Phi Phi^T / n.

struct KernelFit {
  VectorXd alpha;
  double lambda = 0.0;
  WeightId weight_id;
  std::shared_ptr<const GramSpectrum> gram_eigs;
};

inline void validate_kernel(const MatrixXd& kmat) {
  if (kmat.rows() < 1 || kmat.rows() != kmat.cols()) throw InputError("kernel matrix must be square and nonempty");
  if (!kmat.allFinite()) throw InputError("kernel matrix has non-finite entries");
  if (!is_symmetric(kmat, 1e-10)) throw InputError("kernel matrix is not symmetric");
}

/// Eigenpairs of the weighted kernel Gram, restricted to the support of a
/// diagonal weight operator.
class KernelFactorization {
 public:
  static KernelFactorization compute(const MatrixXd& kmat, const VectorXd& y, const WeightDraw& w,
                                     bool eigenvalues_only = false) {
    validate_kernel(kmat);
    const Index n = kmat.rows();
    if (y.size() != n) throw InputError("response length does not match kernel size");
    if (w.n() != n) throw InputError("weight dimension does not match kernel size");
    KernelFactorization f;
    f.n_ = n;
    f.id_ = w.id();
    f.has_vectors_ = !eigenvalues_only;
    MatrixXd g;
    if (w.is_diagonal()) {
      f.rows_ = w.support();
      const Index m = static_cast<Index>(f.rows_.size());
      g.resize(m, m);
      f.wy_.resize(m);
      for (Index a = 0; a < m; ++a) {
        const Index i = f.rows_[static_cast<std::size_t>(a)];
        f.wy_[a] = w.weight(i) * y[i];
        for (Index b = 0; b <= a; ++b) {
          const Index j = f.rows_[static_cast<std::size_t>(b)];
          g(a, b) = w.weight(i) * kmat(i, j) * w.weight(j);
        }
      }
    } else {
      f.dense_ = true;
      g = (*w.dense()) * kmat * w.dense()->transpose();
      f.wy_ = w.apply(y);
    }
    SymmetricEigen eig = symmetric_eigen(g, !eigenvalues_only);
    const double top = eig.values.size() ? eig.values[0] : 0.0;
    if (eig.values.size() && eig.values[eig.values.size() - 1] < -1e-8 * std::max(top, 1.0))
      throw InputError("weighted kernel Gram is not positive semidefinite");
    const double thr = rank_threshold(top, n);
    Index r = 0;
    while (r < eig.values.size() && eig.values[r] > thr) ++r;
    f.spectrum_ = std::make_shared<GramSpectrum>(GramSpectrum::from_eigenvalues(eig.values.head(r), n));
    if (!eigenvalues_only) {
      f.u_ = eig.vectors.leftCols(r);
      f.coords_ = f.u_.transpose() * f.wy_;
    }
    return f;
  }

  const GramSpectrum& spectrum() const noexcept { return *spectrum_; }
  std::shared_ptr<const GramSpectrum> shared_spectrum() const noexcept { return spectrum_; }

  /// Dual coefficients in R^n; the null space of G_W contributes W y / lambda
  /// when lambda != 0.
  VectorXd alpha(double lambda) const {
    if (!has_vectors_) throw InputError("factorization was computed without eigenvectors");
    spectrum_->check_level(lambda);
    const VectorXd& e = spectrum_->positive();
    VectorXd scaled(e.size());
    for (Index i = 0; i < e.size(); ++i) scaled[i] = coords_[i] / (e[i] + lambda);
    VectorXd local = u_ * scaled;
    if (lambda != 0.0) local += (wy_ - u_ * coords_) / lambda;
    if (dense_) return local;
    VectorXd out = VectorXd::Zero(n_);
    for (std::size_t a = 0; a < rows_.size(); ++a) out[rows_[a]] = local[static_cast<Index>(a)];
    return out;
  }

  WeightId weight_id() const noexcept { return id_; }

 private:
  std::shared_ptr<const GramSpectrum> spectrum_;
  std::vector<Index> rows_;
  MatrixXd u_;
  VectorXd coords_;
  VectorXd wy_;
  Index n_ = 0;
  WeightId id_;
  bool dense_ = false;
  bool has_vectors_ = false;
};

inline KernelFit fit_kernel_ridge(const MatrixXd& kmat, const VectorXd& y, const WeightDraw& w,
                                  double lambda) {
  const KernelFactorization f = KernelFactorization::compute(kmat, y, w);
  return {f.alpha(lambda), lambda, f.weight_id(), f.shared_spectrum()};
}

inline double degrees_of_freedom(const KernelFit& fit) { return fit.gram_eigs->dof(fit.lambda); }

inline double degrees_of_freedom_normalized(const KernelFit& fit) {
  return fit.gram_eigs->dof_normalized(fit.lambda);
}

/// Fitted values on the training inputs, G_W alpha = W K W^T alpha.
inline VectorXd kernel_fitted_values(const MatrixXd& kmat, const WeightDraw& w, const KernelFit& fit) {
  return w.apply(VectorXd(kmat * w.apply_transpose(fit.alpha)));
}

/// Predictions K(x0, X) W^T alpha for cross-kernel rows k0 (m x n).
inline VectorXd kernel_predict(const MatrixXd& k0, const WeightDraw& w, const KernelFit& fit) {
  if (k0.cols() != fit.alpha.size()) throw InputError("cross-kernel column count mismatch");
  return k0 * w.apply_transpose(fit.alpha);
}

}  // namespace implreg
