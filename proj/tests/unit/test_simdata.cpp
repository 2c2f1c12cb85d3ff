#include <gtest/gtest.h>

#include <cmath>

#include "implreg/ensemble.hpp"
#include "implreg/simdata.hpp"
#include "support.hpp"

using namespace implreg;

namespace {

SimConfig small_config(Index p, std::uint64_t seed = 1) {
  SimConfig cfg;
  cfg.d = cfg.p = p;
  cfg.seed = seed;
  return cfg;
}

}  // namespace

TEST(Ar1Covariance, Entries) {
  const MatrixXd s = ar1_covariance(6, 0.25);
  for (Index i = 0; i < 6; ++i) EXPECT_EQ(s(i, i), 1.0);
  EXPECT_DOUBLE_EQ(s(0, 2), 0.0625);
  EXPECT_EQ(s, s.transpose());
  EXPECT_GT(symmetric_eigen(s, false).values.minCoeff(), 0.0);
  EXPECT_LT((ar1_covariance(5, 1e-300) - MatrixXd::Identity(5, 5)).norm(), 1e-299);
  EXPECT_THROW(ar1_covariance(5, 1.0), InputError);
}

TEST(Beta0, IdentityCovarianceGivesBasisAverage) {
  const VectorXd b = top_eigenvector_average(MatrixXd::Identity(8, 8), 5);
  EXPECT_EQ((b.array() != 0.0).count(), 5);
  for (Index i = 0; i < 8; ++i)
    if (b[i] != 0.0) EXPECT_DOUBLE_EQ(b[i], 0.2);
}

TEST(Beta0, SignConvention) {
  const SimOracle o = make_sim_oracle(small_config(30));
  const SymmetricEigen e = symmetric_eigen(o.sigma_ar1, true);
  VectorXd expect = VectorXd::Zero(30);
  for (Index j = 0; j < 5; ++j) {
    VectorXd v = e.vectors.col(j);
    if (v[0] < 0) v = -v;
    expect += v / 5.0;
  }
  EXPECT_LT((o.beta0 - expect).norm(), 1e-12);
}

TEST(GenMar1, ResponseAndNoiseMoments) {
  SimConfig cfg = small_config(10);
  cfg.n = 100000;
  const SimData s = gen_mar1(cfg);
  EXPECT_NEAR(s.raw.y.mean(), 0.0, 0.02);
  // Whitening recovers the standardized t_5 entries.
  const MatrixXd z = s.raw.x * s.oracle.sigma_sqrt.inverse();
  EXPECT_NEAR(z.squaredNorm() / static_cast<double>(z.size()), 1.0, 0.02);
}

TEST(GenMar1, SampleCovarianceMatchesAr1) {
  SimConfig cfg = small_config(20);
  cfg.n = 100000;
  const SimData s = gen_mar1(cfg);
  const MatrixXd cov = s.raw.x.transpose() * s.raw.x / static_cast<double>(cfg.n);
  EXPECT_LT((cov - s.oracle.sigma_ar1).norm() / s.oracle.sigma_ar1.norm(), 0.05);
}

TEST(GenMar1, Reproducible) {
  SimConfig cfg = small_config(12, 5);
  cfg.n = 500;
  set_worker_threads(1);
  const SimData a = gen_mar1(cfg);
  set_worker_threads(4);
  const SimData b = gen_mar1(cfg);
  set_worker_threads(1);
  EXPECT_EQ(a.raw.x, b.raw.x);
  EXPECT_EQ(a.raw.y, b.raw.y);
  cfg.seed = 6;
  EXPECT_NE(gen_mar1(cfg).raw.y, a.raw.y);
}

TEST(GenMar1, ConfigValidation) {
  SimConfig cfg = small_config(4);
  EXPECT_THROW(gen_mar1(cfg), InputError);
  cfg = small_config(10);
  cfg.feature_kind = FeatureKind::random_relu;
  EXPECT_THROW(cfg.validate(), InputError);
  cfg.d = 20;
  EXPECT_NO_THROW(cfg.validate());
}

TEST(ResidualVariance, ClosedFormMatchesMonteCarlo) {
  const SimOracle o = make_sim_oracle(small_config(100));
  double s2 = 0.0;
  const Index chunk = 100000;
  for (std::uint64_t c = 0; c < 2; ++c) {
    const RawSample s = sample_mar1(o, chunk, 100 + c, Stream::oracle);
    s2 += (s.y - s.x * o.beta0).squaredNorm();
  }
  EXPECT_NEAR(s2 / (2.0 * chunk) / o.sigma0_sq, 1.0, 0.02);
}

TEST(Beta0, LeastSquaresRecovery) {
  const SimOracle o = make_sim_oracle(small_config(10));
  MatrixXd xtx = MatrixXd::Zero(10, 10);
  VectorXd xty = VectorXd::Zero(10);
  for (std::uint64_t c = 0; c < 10; ++c) {
    const RawSample s = sample_mar1(o, 100000, 200 + c, Stream::oracle);
    xtx += s.x.transpose() * s.x;
    xty += s.x.transpose() * s.y;
  }
  EXPECT_LT((xtx.ldlt().solve(xty) - o.beta0).norm(), 0.02);
}

TEST(Oracle, AnalyticRiskMatchesFreshTestSet) {
  const SimOracle o = make_sim_oracle(small_config(100));
  const RawSample s = sample_mar1(o, 100000, 9, Stream::oracle);
  for (std::uint64_t t = 0; t < 5; ++t) {
    VectorXd b = test::gaussian_vector(100, 10 + t);
    b.normalize();
    const double a = conditional_risk_analytic(b, o.test_oracle);
    EXPECT_LT(std::fabs(conditional_risk_empirical(b, s.x, s.y) - a) / a, 0.02);
  }
}

TEST(FeatureMap, ReluIsNonnegativeWithScaledWeights) {
  SimConfig cfg = small_config(20);
  cfg.d = 40;
  cfg.feature_kind = FeatureKind::random_relu;
  const FeatureMap m = make_feature_map(cfg);
  ASSERT_EQ(m.f.rows(), 20);
  ASSERT_EQ(m.f.cols(), 40);
  const double var = m.f.squaredNorm() / static_cast<double>(m.f.size());
  EXPECT_NEAR(var, 1.0 / std::sqrt(40.0), 0.03);
  const MatrixXd phi = m.apply(test::gaussian(30, 40, 2));
  EXPECT_GE(phi.minCoeff(), 0.0);
  EXPECT_THROW(m.apply(test::gaussian(3, 10, 2)), InputError);
}

TEST(FeatureMap, LinearIsIdentity) {
  const MatrixXd x = test::gaussian(5, 6, 3);
  EXPECT_EQ(make_feature_map(small_config(6)).apply(x), x);
}

TEST(Poly3Kernel, Examples) {
  const Index d = 9;
  const MatrixXd x = VectorXd::Unit(d, 0).transpose() * std::sqrt(static_cast<double>(d));
  EXPECT_NEAR(poly3_kernel(x)(0, 0), 1.0, 1e-15);
  const MatrixXd a = test::gaussian(7, d, 4);
  const MatrixXd k = poly3_kernel(a);
  EXPECT_EQ(k, k.transpose());
  EXPECT_NEAR(k(1, 2), std::pow(a.row(1).dot(a.row(2)) / d, 3), 1e-14);
}

TEST(KernelLinearization, Examples) {
  const double tau = 0.8, trs2 = 0.3;
  const KernelLinearization lin = kernel_linearization(tau, 0.0, 1.0, 0.0, tau, trs2);
  EXPECT_EQ(lin.c0, 0.0);
  EXPECT_EQ(lin.c1, 0.0);
  EXPECT_EQ(lin.c2, 1.0);
  const KernelLinearization cubic = kernel_linearization(tau * tau * tau, 0.0, 0.0, 0.0, tau, trs2);
  EXPECT_DOUBLE_EQ(cubic.c0, tau * tau * tau);
  EXPECT_EQ(cubic.c1, 0.0);
  EXPECT_EQ(cubic.c2, 0.0);
  const KernelLinearization ex = kernel_linearization(std::exp(tau), 1.0, 1.0, 1.0, tau, trs2);
  EXPECT_DOUBLE_EQ(ex.c0, std::exp(tau) - 1.0 - tau);
  EXPECT_DOUBLE_EQ(ex.c1, 1.0 + trs2 / 2.0);
  EXPECT_EQ(ex.c2, 1.0);
}

TEST(FeatureOracle, EstimatedOracleIsLeastSquares) {
  SimConfig cfg = small_config(10);
  cfg.d = 20;
  cfg.feature_kind = FeatureKind::random_relu;
  const SimOracle o = make_sim_oracle(cfg);
  const FeatureMap m = make_feature_map(cfg);
  const TestOracle t = estimate_feature_oracle(o, m, 20000, 3);
  EXPECT_TRUE(t.estimated);
  const RawSample s = sample_mar1(o, 20000, 3, Stream::oracle);
  const MatrixXd phi = m.apply(s.x);
  const VectorXd grad = phi.transpose() * (s.y - phi * t.beta0) / 20000.0;
  EXPECT_LT(grad.norm(), 1e-10);
  EXPECT_GE(t.sigma0_sq, 0.0);
  EXPECT_LT((t.sigma0 - t.sigma0.transpose()).norm(), 1e-14);
}

TEST(FeatureKind, StringRoundTrip) {
  for (FeatureKind k : {FeatureKind::linear, FeatureKind::random_relu, FeatureKind::kernel_poly3})
    EXPECT_EQ(feature_kind_from_string(to_string(k)), k);
  EXPECT_THROW(feature_kind_from_string("rbf"), InputError);
}
