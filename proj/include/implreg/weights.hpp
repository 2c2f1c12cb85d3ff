#pragma once

// Random observation-weight operators W. Diagonal draws keep only the
// diagonal; dense operators keep the full n x n matrix.

#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "implreg/errors.hpp"
#include "implreg/linalg.hpp"
#include "implreg/rng.hpp"
#include "implreg/transforms.hpp"

namespace implreg {

enum class WeightKind { identity, subsample, bootstrap, nonuniform, dense };

constexpr std::string_view to_string(WeightKind kind) noexcept {
  switch (kind) {
    case WeightKind::identity: return "identity";
    case WeightKind::subsample: return "subsample";
    case WeightKind::bootstrap: return "bootstrap";
    case WeightKind::nonuniform: return "nonuniform";
    case WeightKind::dense: return "dense";
  }
  return "unknown";
}

inline WeightKind weight_kind_from_string(std::string_view s) {
  if (s == "identity") return WeightKind::identity;
  if (s == "subsample") return WeightKind::subsample;
  if (s == "bootstrap") return WeightKind::bootstrap;
  if (s == "nonuniform") return WeightKind::nonuniform;
  if (s == "dense") return WeightKind::dense;
  throw InputError("unknown weight kind '" + std::string(s) + "'");
}

struct WeightId {
  WeightKind kind = WeightKind::identity;
  std::uint64_t seed = 0;
  friend bool operator==(const WeightId&, const WeightId&) = default;
};

class WeightDraw {
 public:
  static WeightDraw identity(Index n) {
    if (n < 1) throw InputError("weight dimension must be positive");
    WeightDraw w;
    w.kind_ = WeightKind::identity;
    w.n_ = n;
    w.spectrum_ = WeightSpectrum::from_eigenvalues(std::vector<double>(static_cast<std::size_t>(n), 1.0));
    return w;
  }

  static WeightDraw from_diagonal(WeightKind kind, VectorXd diag, std::uint64_t seed = 0) {
    if (kind == WeightKind::identity || kind == WeightKind::dense)
      throw InputError("diagonal weight draw needs a diagonal kind");
    if (diag.size() < 1) throw InputError("weight dimension must be positive");
    if (!diag.allFinite()) throw InputError("weight diagonal has non-finite entries");
    WeightDraw w;
    w.kind_ = kind;
    w.n_ = diag.size();
    w.seed_ = seed;
    std::vector<double> sq(static_cast<std::size_t>(diag.size()));
    for (Index i = 0; i < diag.size(); ++i) sq[static_cast<std::size_t>(i)] = diag[i] * diag[i];
    w.spectrum_ = WeightSpectrum::from_eigenvalues(std::move(sq));
    w.diag_ = std::move(diag);
    return w;
  }

  static WeightDraw from_dense(MatrixXd dense, std::uint64_t seed = 0) {
    if (dense.rows() != dense.cols() || dense.rows() < 1)
      throw InputError("dense weight operator must be square and nonempty");
    if (!dense.allFinite()) throw InputError("dense weight operator has non-finite entries");
    WeightDraw w;
    w.kind_ = WeightKind::dense;
    w.n_ = dense.rows();
    w.seed_ = seed;
    const MatrixXd wtw = dense.transpose() * dense;
    w.spectrum_ = WeightSpectrum::from_eigenvalues(to_std(symmetric_eigen(wtw, false).values));
    w.dense_ = std::move(dense);
    return w;
  }

  WeightKind kind() const noexcept { return kind_; }
  Index n() const noexcept { return n_; }
  std::uint64_t seed() const noexcept { return seed_; }
  WeightId id() const noexcept { return {kind_, seed_}; }
  const std::optional<VectorXd>& diag() const noexcept { return diag_; }
  const std::optional<MatrixXd>& dense() const noexcept { return dense_; }
  const WeightSpectrum& spectrum() const noexcept { return spectrum_; }
  bool is_diagonal() const noexcept { return kind_ != WeightKind::dense; }

  /// Rows with a nonzero weight (all rows for identity and dense operators).
  std::vector<Index> support() const {
    std::vector<Index> rows;
    if (diag_) {
      for (Index i = 0; i < n_; ++i)
        if ((*diag_)[i] != 0.0) rows.push_back(i);
    } else {
      rows.resize(static_cast<std::size_t>(n_));
      for (Index i = 0; i < n_; ++i) rows[static_cast<std::size_t>(i)] = i;
    }
    return rows;
  }

  /// Diagonal entry of row i; 1 for identity. Not defined for dense draws.
  double weight(Index i) const {
    if (kind_ == WeightKind::identity) return 1.0;
    if (!diag_) throw InputError("dense weight operator has no diagonal");
    return (*diag_)[i];
  }

  /// W * m for an n-row matrix.
  MatrixXd apply(const MatrixXd& m) const {
    if (m.rows() != n_) throw InputError("weight operator dimension mismatch");
    if (kind_ == WeightKind::identity) return m;
    if (dense_) return (*dense_) * m;
    return diag_->asDiagonal() * m;
  }

  VectorXd apply(const VectorXd& v) const {
    if (v.size() != n_) throw InputError("weight operator dimension mismatch");
    if (kind_ == WeightKind::identity) return v;
    if (dense_) return (*dense_) * v;
    return diag_->cwiseProduct(v);
  }

  /// W^T * v.
  VectorXd apply_transpose(const VectorXd& v) const {
    if (v.size() != n_) throw InputError("weight operator dimension mismatch");
    if (kind_ == WeightKind::identity) return v;
    if (dense_) return dense_->transpose() * v;
    return diag_->cwiseProduct(v);
  }

 private:
  WeightKind kind_ = WeightKind::identity;
  Index n_ = 0;
  std::uint64_t seed_ = 0;
  std::optional<VectorXd> diag_;
  std::optional<MatrixXd> dense_;
  WeightSpectrum spectrum_;
};

/// Uniform k-subset of [0, n) marked with unit weights.
inline WeightDraw draw_subsample(Index n, Index k, std::uint64_t seed) {
  if (n < 1 || k < 1 || k > n) throw InputError("subsample needs 1 <= k <= n");
  VectorXd diag = VectorXd::Zero(n);
  if (k == n) {
    diag.setOnes();
  } else {
    Rng rng(seed);
    for (std::size_t i : rng.sample_without_replacement(static_cast<std::size_t>(n),
                                                        static_cast<std::size_t>(k)))
      diag[static_cast<Index>(i)] = 1.0;
  }
  return WeightDraw::from_diagonal(WeightKind::subsample, std::move(diag), seed);
}

/// Multinomial(k; 1/n, ..., 1/n) counts m_i with W = diag(sqrt(m_i)), so that
/// W^T W carries the replication counts.
inline WeightDraw draw_bootstrap(Index n, Index k, std::uint64_t seed) {
  if (n < 1 || k < 1) throw InputError("bootstrap needs n >= 1 and k >= 1");
  std::vector<double> counts(static_cast<std::size_t>(n), 0.0);
  Rng rng(seed);
  for (Index j = 0; j < k; ++j) counts[rng.below(static_cast<std::uint64_t>(n))] += 1.0;
  VectorXd diag(n);
  for (Index i = 0; i < n; ++i) diag[i] = std::sqrt(counts[static_cast<std::size_t>(i)]);
  return WeightDraw::from_diagonal(WeightKind::bootstrap, std::move(diag), seed);
}

/// Geometric base weights decay^i, a uniform k-subset retained, rescaled so
/// that sum of squared weights (the trace of W^T W) equals k.
inline WeightDraw draw_nonuniform(Index n, Index k, double decay, std::uint64_t seed) {
  if (n < 1 || k < 1 || k > n) throw InputError("nonuniform weights need 1 <= k <= n");
  if (!(decay > 0.0 && decay < 1.0)) throw InputError("decay must lie in (0, 1)");
  Rng rng(seed);
  std::vector<std::size_t> keep;
  if (k == n) {
    keep.resize(static_cast<std::size_t>(n));
    std::iota(keep.begin(), keep.end(), std::size_t{0});
  } else {
    keep = rng.sample_without_replacement(static_cast<std::size_t>(n), static_cast<std::size_t>(k));
  }
  VectorXd diag = VectorXd::Zero(n);
  double sumsq = 0.0;
  for (std::size_t i : keep) {
    const double b = std::pow(decay, static_cast<double>(i));
    diag[static_cast<Index>(i)] = b;
    sumsq += b * b;
  }
  if (!(sumsq > 0.0)) throw NumericalError("nonuniform weights underflowed; increase decay");
  diag *= std::sqrt(static_cast<double>(k) / sumsq);
  return WeightDraw::from_diagonal(WeightKind::nonuniform, std::move(diag), seed);
}

struct WeightParams {
  WeightKind kind = WeightKind::subsample;
  Index k = 0;
  double decay = 0.9;
};

/// Dispatches on params.kind; identity ignores k and the seed.
inline WeightDraw draw_weights(Index n, const WeightParams& params, std::uint64_t seed) {
  switch (params.kind) {
    case WeightKind::identity: return WeightDraw::identity(n);
    case WeightKind::subsample: return draw_subsample(n, params.k, seed);
    case WeightKind::bootstrap: return draw_bootstrap(n, params.k, seed);
    case WeightKind::nonuniform: return draw_nonuniform(n, params.k, params.decay, seed);
    case WeightKind::dense: break;
  }
  throw InputError("no random generator for dense weight operators");
}

inline Stream stream_for(WeightKind kind) {
  switch (kind) {
    case WeightKind::bootstrap: return Stream::bootstrap;
    case WeightKind::nonuniform: return Stream::nonuniform;
    default: return Stream::subsample;
  }
}

}  // namespace implreg
