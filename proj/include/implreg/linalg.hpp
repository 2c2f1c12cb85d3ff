#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "implreg/errors.hpp"

namespace implreg {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

struct SymmetricEigen {
  VectorXd values;   // nonincreasing
  MatrixXd vectors;  // columns match values; empty when not requested
};

/// Symmetric eigendecomposition with eigenvalues sorted in nonincreasing
/// order. Only the lower triangle of `a` is read.
inline SymmetricEigen symmetric_eigen(const MatrixXd& a, bool with_vectors) {
  if (a.rows() != a.cols()) throw InputError("eigendecomposition of non-square matrix");
  SymmetricEigen out;
  if (a.rows() == 0) return out;
  Eigen::SelfAdjointEigenSolver<MatrixXd> solver(
      a, with_vectors ? Eigen::ComputeEigenvectors : Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success)
    throw NumericalError("symmetric eigendecomposition did not converge");
  // Eigen returns ascending order.
  out.values = solver.eigenvalues().reverse();
  if (with_vectors) out.vectors = solver.eigenvectors().rowwise().reverse();
  return out;
}

/// Rank-revealing cutoff for an n-dimensional Gram matrix with largest
/// eigenvalue lambda_max.
inline double rank_threshold(double lambda_max, Index n) {
  return std::numeric_limits<double>::epsilon() * static_cast<double>(std::max<Index>(n, 1)) *
         std::max(lambda_max, 0.0);
}

inline bool all_finite(const MatrixXd& m) { return m.allFinite(); }

inline bool is_symmetric(const MatrixXd& m, double rel_tol) {
  if (m.rows() != m.cols()) return false;
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  return (m - m.transpose()).cwiseAbs().maxCoeff() <= rel_tol * scale;
}

inline std::vector<double> to_std(const VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

inline VectorXd to_eigen(std::span<const double> v) {
  VectorXd out(static_cast<Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out[static_cast<Index>(i)] = v[i];
  return out;
}

}  // namespace implreg
