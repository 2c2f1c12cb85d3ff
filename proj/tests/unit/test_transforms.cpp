#include <gtest/gtest.h>

#include <vector>

#include "implreg/transforms.hpp"
#include "implreg/weights.hpp"

using namespace implreg;

namespace {

WeightSpectrum constant_spectrum(std::size_t n, double v) {
  return WeightSpectrum::from_eigenvalues(std::vector<double>(n, v));
}

WeightSpectrum random_spectrum(std::uint64_t seed, std::size_t n) {
  Rng r(seed);
  std::vector<double> e(n);
  for (double& x : e) x = r.uniform() < 0.3 ? 0.0 : 3.0 * r.uniform();
  e[0] = 1.0;
  return WeightSpectrum::from_eigenvalues(e);
}

}  // namespace

TEST(WeightSpectrum, SortsClampsAndCountsNonzeros) {
  const WeightSpectrum s = WeightSpectrum::from_eigenvalues({0.0, 2.0, -1e-14, 1.0});
  ASSERT_EQ(s.size(), 4u);
  EXPECT_EQ(s.eigs()[0], 2.0);
  EXPECT_EQ(s.eigs()[3], 0.0);
  EXPECT_DOUBLE_EQ(s.nonzero_fraction(), 0.5);
  EXPECT_THROW(WeightSpectrum::from_eigenvalues({1.0, -0.5}), InputError);
  EXPECT_THROW(WeightSpectrum::from_eigenvalues({}), InputError);
}

TEST(CauchyTransform, Examples) {
  EXPECT_DOUBLE_EQ(cauchy_transform(constant_spectrum(5, 1.0), 2.0), 1.0);
  EXPECT_DOUBLE_EQ(cauchy_transform(constant_spectrum(5, 0.0), 1.0), 1.0);
  EXPECT_DOUBLE_EQ(cauchy_transform(WeightSpectrum::subsample(4, 2), 2.0), 0.75);
  EXPECT_THROW(cauchy_transform(constant_spectrum(3, 1.0), 1.0), PoleError);
}

TEST(MomentSeries, Examples) {
  // Subsampling with q = 1/2: M(z) = q z / (1 - z).
  EXPECT_DOUBLE_EQ(moment_series(WeightSpectrum::subsample(10, 5), -1.0), -0.25);
  EXPECT_EQ(moment_series(random_spectrum(1, 9), 0.0), 0.0);
  EXPECT_DOUBLE_EQ(moment_series(constant_spectrum(4, 1.0), 0.5), 1.0);
  EXPECT_THROW(moment_series(constant_spectrum(4, 2.0), 0.5), PoleError);
}

TEST(MomentSeries, ChainConsistencyWithCauchyTransform) {
  for (std::uint64_t s = 0; s < 20; ++s) {
    const WeightSpectrum spec = random_spectrum(s, 40);
    for (double z : {-2.0, -1.0, -0.5, -0.1})
      EXPECT_NEAR(moment_series(spec, z), cauchy_transform(spec, 1.0 / z) / z - 1.0, 1e-12);
  }
}

TEST(STransformSubsample, Examples) {
  EXPECT_EQ(s_transform_subsample(1.0, -0.7), 1.0);
  EXPECT_DOUBLE_EQ(s_transform_subsample(0.5, -0.25), 3.0);
  EXPECT_DOUBLE_EQ(s_transform_subsample(0.5, 0.0), 2.0);
  EXPECT_THROW(s_transform_subsample(0.5, -0.5), PoleError);
  EXPECT_THROW(s_transform_subsample(0.0, -0.1), InputError);
  EXPECT_EQ(s_transform_subsample_derivative(1.0, -0.3), 0.0);
  EXPECT_DOUBLE_EQ(s_transform_subsample_derivative(0.5, -0.25), -8.0);
}

TEST(STransformEmpirical, Examples) {
  EXPECT_NEAR(s_transform_empirical(constant_spectrum(10, 1.0), -0.3), 1.0, 1e-12);
  EXPECT_NEAR(s_transform_empirical(WeightSpectrum::subsample(100, 50), -0.25), 3.0, 1e-10);
  EXPECT_NEAR(s_transform_empirical_derivative(WeightSpectrum::subsample(100, 50), -0.25), -8.0, 1e-4);
}

TEST(STransformEmpirical, RangeGuard) {
  const WeightSpectrum s = WeightSpectrum::subsample(10, 4);
  EXPECT_THROW(s_transform_empirical(s, -0.4), RangeError);
  EXPECT_THROW(s_transform_empirical(s, 0.0), RangeError);
  EXPECT_THROW(s_transform_empirical(s, 0.1), RangeError);
  try {
    s_transform_empirical(s, -0.5);
  } catch (const RangeError& e) {
    EXPECT_DOUBLE_EQ(e.lo(), -0.4);
    EXPECT_EQ(e.hi(), 0.0);
  }
}

TEST(STransformEmpirical, InversionConsistency) {
  Rng r(77);
  for (int i = 0; i < 50; ++i) {
    const WeightSpectrum spec = i % 2 ? random_spectrum(100 + i, 30)
                                      : draw_bootstrap(30, 30, 200 + i).spectrum();
    const double nz = spec.nonzero_fraction();
    const double w = -nz * (0.01 + 0.98 * r.uniform());
    const MomentInverse inv = inverse_moment_series(spec, w);
    EXPECT_LT(inv.z, 0.0);
    EXPECT_LE(inv.expansions, 200u);
    EXPECT_NEAR(moment_series(spec, inv.z), w, 1e-10);
    EXPECT_GT(s_transform_empirical(spec, w), 0.0);
  }
}

TEST(STransformEmpirical, AgreesWithClosedFormOnZeroOneSpectra) {
  for (std::size_t n : {50u, 200u}) {
    for (std::size_t k : {n / 5, n / 2, (9 * n) / 10}) {
      const double q = static_cast<double>(k) / static_cast<double>(n);
      const WeightSpectrum spec = WeightSpectrum::subsample(n, k);
      for (double w = -q + 0.01; w < -0.01; w += 0.013)
        EXPECT_NEAR(s_transform_empirical(spec, w), s_transform_subsample(q, w), 1e-8)
            << "n=" << n << " k=" << k << " w=" << w;
    }
  }
}

TEST(STransformEmpirical, DerivativeOfConstantSpectrumVanishes) {
  EXPECT_NEAR(s_transform_empirical_derivative(constant_spectrum(8, 2.5), -0.4), 0.0, 1e-6);
}
