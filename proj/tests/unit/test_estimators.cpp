#include <gtest/gtest.h>

#include <Eigen/Dense>

#include "implreg/estimators.hpp"
#include "support.hpp"

using namespace implreg;
using implreg::test::gaussian;
using implreg::test::gaussian_vector;
using implreg::test::pinv;
using implreg::test::rel_diff;

namespace {

FeatureDataset make_dataset(Index n, Index p, std::uint64_t seed) {
  return FeatureDataset::create(gaussian(n, p, seed), gaussian_vector(n, seed + 1), false);
}

/// (Phi^T W^T W Phi / n + lambda I)^+ Phi^T W^T W y / n, formed directly.
VectorXd direct_ridge(const FeatureDataset& d, const WeightDraw& w, double lambda) {
  const MatrixXd wphi = w.apply(d.phi);
  const VectorXd wy = w.apply(d.y);
  const double n = static_cast<double>(d.n());
  const MatrixXd a = wphi.transpose() * wphi / n + lambda * MatrixXd::Identity(d.p(), d.p());
  return pinv(a) * (wphi.transpose() * wy / n);
}

}  // namespace

TEST(FeatureDataset, ValidatesInput) {
  EXPECT_THROW(FeatureDataset::create(MatrixXd(0, 2), VectorXd(0)), InputError);
  EXPECT_THROW(FeatureDataset::create(MatrixXd::Ones(3, 2), VectorXd::Ones(2)), InputError);
  MatrixXd bad = MatrixXd::Ones(2, 2);
  bad(0, 1) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(FeatureDataset::create(bad, VectorXd::Ones(2)), InputError);
}

TEST(FeatureDataset, CentersResponse) {
  VectorXd y(4);
  y << 1, 2, 3, 10;
  const FeatureDataset d = FeatureDataset::create(MatrixXd::Ones(4, 1), y);
  EXPECT_TRUE(d.centered);
  EXPECT_LE(std::fabs(d.y.mean()), 1e-12 * 10);
  const FeatureDataset raw = FeatureDataset::create(MatrixXd::Ones(4, 1), y, false);
  EXPECT_FALSE(raw.centered);
  EXPECT_EQ(raw.y, y);
}

TEST(ComputeGram, HandExamples) {
  const FeatureDataset d = FeatureDataset::create(MatrixXd::Ones(2, 1), VectorXd::Zero(2), false);
  const MatrixXd g = compute_gram(d, WeightDraw::identity(2));
  EXPECT_TRUE(g.isApprox(MatrixXd::Constant(2, 2, 0.5)));

  const FeatureDataset e = FeatureDataset::create(MatrixXd::Identity(2, 2), VectorXd::Zero(2), false);
  VectorXd diag(2);
  diag << 1, 0;
  const MatrixXd gw = compute_gram(e, WeightDraw::from_diagonal(WeightKind::subsample, diag));
  MatrixXd expect = MatrixXd::Zero(2, 2);
  expect(0, 0) = 0.5;
  EXPECT_EQ(gw, expect);

  const MatrixXd g0 = compute_gram(make_dataset(5, 3, 1), WeightDraw::from_dense(MatrixXd::Zero(5, 5)));
  EXPECT_EQ(g0, MatrixXd::Zero(5, 5));
}

TEST(ComputeGram, SymmetricAndDimensionChecked) {
  const FeatureDataset d = make_dataset(12, 5, 3);
  const MatrixXd g = compute_gram(d, WeightDraw::from_dense(gaussian(12, 12, 4)));
  EXPECT_TRUE(is_symmetric(g, 1e-12));
  EXPECT_THROW(compute_gram(d, WeightDraw::identity(11)), InputError);
}

TEST(FitWeightedRidge, ScalarExamples) {
  MatrixXd phi(1, 1);
  phi << 1;
  VectorXd y(1);
  y << 2;
  const FeatureDataset d = FeatureDataset::create(phi, y, false);
  // (1 + 1)^{-1} * 1 * 2 = 1.
  EXPECT_DOUBLE_EQ(fit_ridge(d, 1.0).beta[0], 1.0);
  EXPECT_DOUBLE_EQ(fit_ridge(d, 0.0).beta[0], 2.0);
  VectorXd zero(1);
  zero << 0;
  EXPECT_EQ(fit_weighted_ridge(d, WeightDraw::from_diagonal(WeightKind::subsample, zero), 0.5).beta[0], 0.0);
}

TEST(FitWeightedRidge, MatchesDirectSolveOnBothRoutes) {
  for (auto [n, p] : {std::pair<Index, Index>{30, 8}, {8, 30}, {20, 20}}) {
    const FeatureDataset d = make_dataset(n, p, 10 + n);
    const WeightDraw w = draw_subsample(n, n / 2 + 1, 99);
    for (double lambda : {0.01, 0.3, 2.0}) {
      const VectorXd ref = direct_ridge(d, w, lambda);
      EXPECT_LT(rel_diff(fit_weighted_ridge(d, w, lambda, SolveRoute::primal).beta, ref), 1e-9);
      EXPECT_LT(rel_diff(fit_weighted_ridge(d, w, lambda, SolveRoute::dual).beta, ref), 1e-9);
    }
  }
}

TEST(FitWeightedRidge, PrimalDualAgreementProperty) {
  for (std::uint64_t s = 0; s < 25; ++s) {
    Rng r(s);
    const Index n = 2 + static_cast<Index>(r.below(29)), p = 1 + static_cast<Index>(r.below(30));
    const FeatureDataset d = make_dataset(n, p, 1000 + s);
    const WeightDraw w = draw_bootstrap(n, n, 2000 + s);
    const double lambda = std::pow(10.0, -2.0 + 3.0 * r.uniform());
    const VectorXd a = fit_weighted_ridge(d, w, lambda, SolveRoute::primal).beta;
    const VectorXd b = fit_weighted_ridge(d, w, lambda, SolveRoute::dual).beta;
    EXPECT_LT(rel_diff(a, b), 1e-9) << "n=" << n << " p=" << p;
  }
}

TEST(FitWeightedRidge, DenseWeightsMatchDirectSolve) {
  const FeatureDataset d = make_dataset(15, 6, 5);
  const WeightDraw w = WeightDraw::from_dense(gaussian(15, 15, 6));
  EXPECT_LT(rel_diff(fit_weighted_ridge(d, w, 0.2).beta, direct_ridge(d, w, 0.2)), 1e-9);
}

TEST(FitWeightedRidge, RidgelessLimitMatchesPseudoinverse) {
  for (auto [n, p] : {std::pair<Index, Index>{25, 10}, {10, 25}}) {
    const FeatureDataset d = make_dataset(n, p, 77 + p);
    const GramFactorization f = GramFactorization::compute(d, WeightDraw::identity(n));
    const VectorXd pinv_sol = pinv(d.phi) * d.y;
    EXPECT_LT(rel_diff(f.coefficients(0.0), pinv_sol), 1e-9);
    EXPECT_LT(rel_diff(f.coefficients(1e-10 * f.spectrum().max()), pinv_sol), 1e-6);
  }
}

TEST(FitWeightedRidge, NegativeLambdaAboveFloor) {
  const FeatureDataset d = make_dataset(40, 5, 8);
  const GramFactorization f = GramFactorization::compute(d, WeightDraw::identity(40));
  const double lambda = -0.5 * f.spectrum().min_positive();
  EXPECT_LT(rel_diff(f.coefficients(lambda), direct_ridge(d, WeightDraw::identity(40), lambda)), 1e-9);
  EXPECT_THROW(f.coefficients(-1.0001 * f.spectrum().min_positive()), SpectralFloorError);
}

TEST(DegreesOfFreedom, MatchesTraceOfSmoother) {
  const FeatureDataset d = make_dataset(20, 8, 12);
  const WeightDraw w = draw_subsample(20, 12, 3);
  const double lambda = 0.4;
  const RidgeFit fit = fit_weighted_ridge(d, w, lambda);
  const MatrixXd g = compute_gram(d, w);
  const MatrixXd smoother = g * (g + lambda * MatrixXd::Identity(20, 20)).inverse();
  EXPECT_NEAR(degrees_of_freedom(fit), smoother.trace(), 1e-10);
  EXPECT_NEAR(degrees_of_freedom_normalized(fit), smoother.trace() / 20.0, 1e-12);
}

TEST(DegreesOfFreedom, RangeMonotonicityAndRank) {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const Index n = 10 + static_cast<Index>(s), p = 4 + 2 * static_cast<Index>(s);
    MatrixXd phi = gaussian(n, p, 300 + s);
    if (s % 3 == 0) phi.col(0) = phi.col(1);  // rank deficiency
    const FeatureDataset d = FeatureDataset::create(phi, gaussian_vector(n, 400 + s), false);
    const GramFactorization f = GramFactorization::compute(d, WeightDraw::identity(n));
    Eigen::ColPivHouseholderQR<MatrixXd> qr(phi);
    EXPECT_EQ(f.dof(0.0), static_cast<double>(qr.rank()));
    double prev = f.dof(0.0);
    for (double lambda = 1e-3; lambda < 1e3; lambda *= 2.0) {
      const double df = f.dof(lambda);
      EXPECT_LT(df, prev);
      EXPECT_GE(df, 0.0);
      EXPECT_LE(df, static_cast<double>(std::min(n, p)));
      prev = df;
    }
  }
}

TEST(Predict, Examples) {
  RidgeFit fit;
  fit.beta = VectorXd::Zero(3);
  fit.beta[0] = 1.0;
  EXPECT_EQ(predict(fit, MatrixXd::Identity(3, 3)), fit.beta);
  fit.beta.setZero();
  EXPECT_EQ(predict(fit, MatrixXd::Ones(2, 3)), VectorXd::Zero(2));
  fit.beta = VectorXd::Ones(2);
  MatrixXd phi0(1, 2);
  phi0 << 2, 3;
  EXPECT_DOUBLE_EQ(predict(fit, phi0)[0], 5.0);
  EXPECT_THROW(predict(fit, MatrixXd::Ones(1, 3)), InputError);
}

TEST(KernelRidge, IdentityKernelHalvesResponse) {
  const VectorXd y = gaussian_vector(6, 1);
  const KernelFit fit = fit_kernel_ridge(MatrixXd::Identity(6, 6), y, WeightDraw::identity(6), 1.0);
  EXPECT_LT(rel_diff(fit.alpha, y / 2.0), 1e-14);
}

TEST(KernelRidge, InterpolatesAtZeroRidge) {
  const MatrixXd a = gaussian(6, 6, 2);
  const MatrixXd k = a * a.transpose() + 0.1 * MatrixXd::Identity(6, 6);
  const VectorXd y = gaussian_vector(6, 3);
  const WeightDraw id = WeightDraw::identity(6);
  const KernelFit fit = fit_kernel_ridge(k, y, id, 0.0);
  EXPECT_LT(rel_diff(fit.alpha, k.ldlt().solve(y)), 1e-9);
  EXPECT_LT(rel_diff(kernel_fitted_values(k, id, fit), y), 1e-9);
}

TEST(KernelRidge, ZeroWeightsGiveZeroCoefficients) {
  const MatrixXd k = MatrixXd::Identity(4, 4);
  const KernelFit fit =
      fit_kernel_ridge(k, VectorXd::Ones(4), WeightDraw::from_diagonal(WeightKind::subsample, VectorXd::Zero(4)), 1.0);
  EXPECT_EQ(fit.alpha, VectorXd::Zero(4));
}

TEST(KernelRidge, SubsampleMatchesDirectResolvent) {
  const MatrixXd a = gaussian(10, 4, 5);
  const MatrixXd k = a * a.transpose() / 4.0;
  const VectorXd y = gaussian_vector(10, 6);
  const WeightDraw w = draw_subsample(10, 6, 7);
  const double lambda = 0.3;
  const MatrixXd wd = w.diag()->asDiagonal();
  const MatrixXd g = wd * k * wd;
  const VectorXd ref = pinv(g + lambda * MatrixXd::Identity(10, 10)) * (wd * y);
  const KernelFit fit = fit_kernel_ridge(k, y, w, lambda);
  EXPECT_LT(rel_diff(fit.alpha, ref), 1e-10);
  EXPECT_LT(rel_diff(kernel_fitted_values(k, w, fit), g * ref), 1e-10);
  const MatrixXd smoother = g * (g + lambda * MatrixXd::Identity(10, 10)).inverse();
  EXPECT_NEAR(degrees_of_freedom(fit), smoother.trace(), 1e-10);
}

TEST(KernelRidge, LinearKernelReproducesPrimalFit) {
  // K = Phi Phi^T / n on the Gram scale; beta = Phi^T W^T alpha / n.
  for (std::uint64_t s = 0; s < 6; ++s) {
    const Index n = 12 + 3 * static_cast<Index>(s), p = 5 + 4 * static_cast<Index>(s);
    const FeatureDataset d = make_dataset(n, p, 50 + s);
    const MatrixXd k = d.phi * d.phi.transpose() / static_cast<double>(n);
    const WeightDraw w = s % 2 ? draw_subsample(n, n / 2, s) : draw_bootstrap(n, n, s);
    const double lambda = 0.05 * static_cast<double>(s + 1);
    const KernelFit kfit = fit_kernel_ridge(k, d.y, w, lambda);
    const VectorXd beta = d.phi.transpose() * w.apply_transpose(kfit.alpha) / static_cast<double>(n);
    EXPECT_LT(rel_diff(beta, fit_weighted_ridge(d, w, lambda).beta), 1e-9);
  }
}

TEST(KernelRidge, RejectsAsymmetricKernel) {
  MatrixXd k = MatrixXd::Identity(3, 3);
  k(0, 1) = 0.5;
  EXPECT_THROW(fit_kernel_ridge(k, VectorXd::Ones(3), WeightDraw::identity(3), 1.0), InputError);
}
