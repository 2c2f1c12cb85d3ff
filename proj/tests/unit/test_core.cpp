#include <gtest/gtest.h>

#include <atomic>
#include <set>
#include <stdexcept>
#include <vector>

#include "implreg/gram_spectrum.hpp"
#include "implreg/parallel.hpp"
#include "implreg/rng.hpp"
#include "implreg/roots.hpp"

using namespace implreg;

TEST(Rng, SameSeedSameStream) {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
}

TEST(Rng, DerivedSeedsAreDistinctAcrossIndexAndStream) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t i = 0; i < 1000; ++i) {
    seen.insert(derive_seed(7, i, Stream::subsample));
    seen.insert(derive_seed(7, i, Stream::bootstrap));
  }
  EXPECT_EQ(seen.size(), 2000u);
  EXPECT_NE(derive_seed(1, 0, Stream::probe), derive_seed(2, 0, Stream::probe));
}

TEST(Rng, UniformInUnitInterval) {
  Rng r(3);
  for (int i = 0; i < 10000; ++i) {
    const double u = r.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
  }
}

TEST(Rng, NormalMoments) {
  Rng r(11);
  const int n = 200000;
  double s = 0, s2 = 0;
  for (int i = 0; i < n; ++i) {
    const double z = r.normal();
    s += z;
    s2 += z * z;
  }
  EXPECT_NEAR(s / n, 0.0, 0.01);
  EXPECT_NEAR(s2 / n, 1.0, 0.01);
}

TEST(Rng, StudentTVariance) {
  // Var t_5 = 5/3.
  Rng r(12);
  const int n = 400000;
  double s2 = 0;
  for (int i = 0; i < n; ++i) {
    const double t = r.student_t(5);
    s2 += t * t;
  }
  EXPECT_NEAR(s2 / n, 5.0 / 3.0, 0.03);
}

TEST(Rng, SampleWithoutReplacementIsSortedAndDistinct) {
  Rng r(5);
  const auto s = r.sample_without_replacement(100, 37);
  ASSERT_EQ(s.size(), 37u);
  for (std::size_t i = 1; i < s.size(); ++i) EXPECT_LT(s[i - 1], s[i]);
  EXPECT_LT(s.back(), 100u);
  EXPECT_THROW(r.sample_without_replacement(3, 4), InputError);
}

TEST(Rng, PermutationCoversRange) {
  Rng r(9);
  auto p = r.permutation(50);
  std::sort(p.begin(), p.end());
  for (std::size_t i = 0; i < 50; ++i) EXPECT_EQ(p[i], i);
}

TEST(Parallel, ResultsIndependentOfThreadCount) {
  auto run = [](unsigned threads) {
    set_worker_threads(threads);
    std::vector<double> out(257);
    parallel_for(out.size(), [&](std::size_t i) {
      Rng r(derive_seed(1, i, Stream::data));
      out[i] = r.normal();
    });
    set_worker_threads(1);
    return out;
  };
  const auto a = run(1);
  EXPECT_EQ(a, run(4));
  EXPECT_EQ(a, run(8));
}

TEST(Parallel, RethrowsLowestIndexFailure) {
  set_worker_threads(4);
  try {
    parallel_for(64, [](std::size_t i) {
      if (i == 17 || i == 40) throw std::runtime_error(std::to_string(i));
    });
    FAIL() << "expected an exception";
  } catch (const std::runtime_error& e) {
    EXPECT_STREQ(e.what(), "17");
  }
  set_worker_threads(1);
}

TEST(Roots, BisectionFindsCubeRoot) {
  const RootResult r = bisect_increasing([](double x) { return x * x * x; }, 2.0, 0.0, 2.0);
  EXPECT_NEAR(r.root, std::cbrt(2.0), 1e-15);
}

TEST(Roots, GeometricBisectionOnWideBracket) {
  BisectionOptions opt;
  opt.geometric = true;
  const RootResult r = bisect_increasing([](double x) { return std::log(x); }, std::log(3e-7), 1e-12, 1e6, opt);
  EXPECT_NEAR(r.root / 3e-7, 1.0, 1e-13);
}

TEST(Roots, BracketExpansionReportsExhaustion) {
  std::size_t used = 0;
  auto hit = expand_bracket([](double x) { return x > 100.0; }, 0.0, 1.0, 2.0, 200, &used);
  ASSERT_TRUE(hit.has_value());
  EXPECT_EQ(*hit, 128.0);
  EXPECT_EQ(used, 7u);
  EXPECT_FALSE(expand_bracket([](double) { return false; }, 0.0, 1.0, 2.0, 5).has_value());
}

TEST(GramSpectrum, DegreesOfFreedomHandExample) {
  // {2, 1, 0} at lambda = 1: 2/3 + 1/2.
  const double e[] = {2.0, 1.0, 0.0};
  const GramSpectrum s = GramSpectrum::from_eigenvalues(std::span<const double>(e), 3);
  EXPECT_EQ(s.rank(), 2);
  EXPECT_DOUBLE_EQ(s.dof(1.0), 7.0 / 6.0);
  EXPECT_EQ(s.dof(0.0), 2.0);
  EXPECT_LT(s.dof(1e12), 1e-11);
}

TEST(GramSpectrum, SpectralFloor) {
  const double e[] = {2.0, 0.5};
  const GramSpectrum s = GramSpectrum::from_eigenvalues(std::span<const double>(e), 4);
  EXPECT_NO_THROW(s.dof(-0.49));
  EXPECT_THROW(s.dof(-0.5), SpectralFloorError);
  try {
    s.check_level(-0.7);
  } catch (const SpectralFloorError& err) {
    EXPECT_EQ(err.lambda_min_positive(), 0.5);
  }
}

TEST(GramSpectrum, DerivativeMatchesFiniteDifference) {
  const double e[] = {3.0, 1.0, 0.25};
  const GramSpectrum s = GramSpectrum::from_eigenvalues(std::span<const double>(e), 5);
  const double h = 1e-6, mu = 0.7;
  const double fd = (s.dof_normalized(mu + h) - s.dof_normalized(mu - h)) / (2 * h);
  EXPECT_NEAR(s.dof_normalized_derivative(mu), fd, 1e-8);
}
