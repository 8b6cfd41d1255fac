#include <cmath>

#include "test_util.hpp"
#include "ustat/decomp.hpp"
#include "ustat/instances.hpp"
#include "ustat/oracles.hpp"

using namespace ustat;

namespace {

TensorField counting(std::vector<double> v) {
  const std::size_t n = v.size();
  return TensorField({counting_space(n)}, std::move(v));
}

bool same(const TensorField& a, const TensorField& b) { return max_abs_diff(a, b) == 0.0; }

void expect_sane(const Decomposition& d, double cap) {
  EXPECT_LE(d.reconstruction_error(), 1e-12) << d.pipeline;
  EXPECT_TRUE(d.supports_disjoint()) << d.pipeline;
  EXPECT_GE(d.certificate_sum(), d.lhs * (1.0 - 1e-12)) << d.pipeline;
  EXPECT_LE(d.certificate_sum(), cap * d.lhs * (1.0 + 1e-12)) << d.pipeline;
}

TensorField single_pair_ones(std::size_t m) {
  const Space bar = disjoint_union_copies(uniform_space(2), 1);
  return TensorField::filled(std::vector<Space>(m, bar), 1.0);
}

}  // namespace

TEST(LevelCut, Cases) {
  auto [g, h] = level_cut(counting({0.2, 0.5}), 1.0);
  EXPECT_TRUE(same(g, counting({0, 0})));
  EXPECT_TRUE(same(h, counting({0.2, 0.5})));
  std::tie(g, h) = level_cut(counting({2, 1}), 1.0);
  EXPECT_TRUE(same(g, counting({2, 1})));
  EXPECT_TRUE(same(h, counting({0, 0})));
  std::tie(g, h) = level_cut(counting({3, 0.5}), 1.0);
  EXPECT_TRUE(same(g, counting({3, 0})));
  EXPECT_TRUE(same(h, counting({0, 0.5})));
  EXPECT_USTAT_ERROR(level_cut(counting({1}), 0.0), BadLevel);
  EXPECT_USTAT_ERROR(level_cut(counting({-1}), 1.0), NotNonnegative);
}

TEST(Disjointize, FixedPointAndTie) {
  const TensorField f = counting({3, 0.5});
  auto [g, h] = disjointize(f, counting({3, 0}), counting({0, 0.5}));
  EXPECT_TRUE(same(g, counting({3, 0})));
  EXPECT_TRUE(same(h, counting({0, 0.5})));
  std::tie(g, h) = disjointize(counting({2}), counting({1}), counting({1}));
  EXPECT_TRUE(same(g, counting({2})));
  EXPECT_TRUE(same(h, counting({0})));
  EXPECT_USTAT_ERROR(disjointize(counting({2}), counting({1}), counting({0.5})), NotADecomposition);
}

TEST(Disjointize, DoublingBounds) {
  CounterRng rng(1);
  for (int rep = 0; rep < 50; ++rep) {
    const Space s = random_probability_space(rng, 5, false);
    const TensorField f = random_field(rng, {s}, true);
    std::vector<double> gv(5);
    for (std::size_t k = 0; k < 5; ++k) gv[k] = f[k] * rng.uniform();
    const TensorField g = f.with_values(gv);
    const TensorField h = f - g;
    const auto [gt, ht] = disjointize(f, g, h);
    for (double p : {1.0, 2.0}) {
      const NormSpec x = NormSpec::lp(p, {0});
      EXPECT_LE(norm(gt, x), 2.0 * norm(g, x) + 1e-14);
      EXPECT_LE(norm(ht, x), 2.0 * norm(h, x) + 1e-14);
    }
  }
}

TEST(ThresholdWeights, Cases) {
  const Space u = uniform_space(2);
  const TensorField one = TensorField::filled({u, u}, 1.0);
  EXPECT_TRUE(same(threshold_weights(one, 0.7, 0.0, {0}), one));
  const TensorField zero = TensorField::filled({u, u}, 0.0);
  EXPECT_TRUE(same(threshold_weights(zero, 0.5, 0.0, {0}), zero));
  // Average over axis 1 of w = (1, 0) is 0.5.
  const TensorField w = TensorField::generate({u, u}, [](auto i) { return i[1] == 0 ? 1.0 : 0.0; });
  EXPECT_TRUE(same(threshold_weights(w, 0.5, 0.0, {0}), one));
  EXPECT_TRUE(same(threshold_weights(w, 0.6, 0.0, {0}), zero));
  EXPECT_USTAT_ERROR(threshold_weights(w, 0.5, 0.5, {0}), BadThreshold);
  EXPECT_USTAT_ERROR(WeightFamily::make({TensorField::filled({u}, 1.5)}), BadInstance);
}

TEST(JsDecompose, SingleConstant) {
  const TensorField fbar = family_of({TensorField::filled({uniform_space(3)}, 2.0)});
  const Decomposition d = js_decompose(fbar, 2.0);
  EXPECT_NEAR(d.lhs, 2.0, 1e-15);
  const bool all_g = max_abs(d.part("h").field) == 0.0;
  const bool all_h = max_abs(d.part("g").field) == 0.0;
  EXPECT_TRUE(all_g || all_h);
  expect_sane(d, decomposition_cap(1));
}

TEST(JsDecompose, Zero) {
  const TensorField fbar = family_of({TensorField::filled({uniform_space(2)}, 0.0)});
  const Decomposition d = js_decompose(fbar, 2.0);
  EXPECT_EQ(d.certificate_sum(), 0.0);
  EXPECT_EQ(d.reconstruction_error(), 0.0);
}

TEST(JsDecompose, AgainstBucketOptimum) {
  CounterRng rng(2);
  for (int rep = 0; rep < 20; ++rep) {
    const Space base = random_probability_space(rng, 2, false);
    const TensorField fbar = random_family_field(rng, base, 3, 1);
    for (double p : {1.5, 2.0, 3.0}) {
      const Decomposition d = js_decompose(fbar, p);
      expect_sane(d, decomposition_cap(1));
      const double opt = oracle::bucket_optimum(fbar, p);
      EXPECT_GE(opt, d.lhs * (1.0 - 1e-12));
      EXPECT_GE(d.certificate_sum(), opt * (1.0 - 1e-12));
      EXPECT_LE(level_cut_functional(d), level_cut_constant(p) * (1.0 + 1e-12));
    }
  }
}

TEST(FourSummand, Zero) {
  const TensorField fbar = TensorField::filled(
      std::vector<Space>(2, disjoint_union_copies(uniform_space(2), 2)), 0.0);
  const Decomposition d = four_summand(fbar, 2.0);
  ASSERT_EQ(d.parts.size(), 4u);
  for (const auto& part : d.parts) EXPECT_EQ(max_abs(part.field), 0.0);
}

TEST(FourSummand, SinglePairOfOnes) {
  const TensorField fbar = single_pair_ones(2);
  const Decomposition d = four_summand(fbar, 2.0);
  expect_sane(d, decomposition_cap(2));
  EXPECT_NEAR(d.lhs, 1.0, 1e-15);
  EXPECT_NEAR(oracle::bucket_optimum(fbar, 2.0), 1.0, 1e-15);
}

TEST(FourSummand, RandomKernels) {
  CounterRng rng(3);
  for (int rep = 0; rep < 20; ++rep) {
    const Space base = random_probability_space(rng, 2, false);
    const TensorField fbar = random_family_field(rng, base, 2, 2, 0.2);
    for (double p : {1.0, 2.0, 4.0}) {
      const Decomposition d = four_summand(fbar, p);
      EXPECT_NEAR(d.lhs, oracle::family_lhs_direct(fbar, p), 1e-12);
      expect_sane(d, decomposition_cap(2));
    }
  }
}

TEST(FourSummand, SignedInput) {
  CounterRng rng(4);
  const Space base = random_probability_space(rng, 2, false);
  const TensorField fbar = random_field(rng, std::vector<Space>(2, disjoint_union_copies(base, 2)), false);
  const Decomposition d = four_summand(fbar, 2.0);
  expect_sane(d, decomposition_cap(2));
}

TEST(Multilevel, ArityOneMatchesJs) {
  CounterRng rng(5);
  const TensorField fbar = random_family_field(rng, random_probability_space(rng, 3, false), 3, 1);
  const Decomposition a = multilevel_decompose(fbar, 2.0);
  const Decomposition b = js_decompose(fbar, 2.0);
  ASSERT_EQ(a.parts.size(), b.parts.size());
  for (std::size_t k = 0; k < a.parts.size(); ++k) {
    EXPECT_TRUE(same(a.parts[k].field, b.parts[k].field));
    EXPECT_EQ(a.parts[k].certificate, b.parts[k].certificate);
  }
}

TEST(Multilevel, ArityTwoComparableToFourSummand) {
  CounterRng rng(6);
  for (int rep = 0; rep < 10; ++rep) {
    const TensorField fbar = random_family_field(rng, random_probability_space(rng, 2, false), 2, 2, 0.2);
    const double a = multilevel_decompose(fbar, 2.0).certificate_sum();
    const double b = four_summand(fbar, 2.0).certificate_sum();
    EXPECT_LE(a, 4.0 * b);
    EXPECT_LE(b, 4.0 * a);
  }
}

TEST(Multilevel, SingleIndexOfOnes) {
  for (std::size_t m = 1; m <= 3; ++m) {
    const Decomposition d = multilevel_decompose(single_pair_ones(m), 2.0);
    std::size_t nonzero = 0;
    for (const auto& part : d.parts)
      if (max_abs(part.field) > 0.0) ++nonzero;
    EXPECT_EQ(nonzero, 1u) << m;
    EXPECT_NEAR(d.certificate_sum(), 1.0, 1e-14) << m;
  }
}

TEST(Multilevel, ArityThree) {
  CounterRng rng(7);
  for (int rep = 0; rep < 5; ++rep) {
    const TensorField fbar = random_family_field(rng, random_probability_space(rng, 2, false), 2, 3, 0.2);
    const Decomposition d = multilevel_decompose(fbar, 1.5);
    EXPECT_EQ(d.parts.size(), 8u);
    expect_sane(d, decomposition_cap(3));
  }
  const TensorField big = TensorField::filled(std::vector<Space>(4, disjoint_union_copies(uniform_space(2), 1)), 1.0);
  EXPECT_USTAT_ERROR(multilevel_decompose(big, 2.0), TooLarge);
}

TEST(MeanZero, FixedPoint) {
  CounterRng rng(8);
  const Space base = random_probability_space(rng, 3, false);
  const TensorField target = center_blocks(random_family_field(rng, base, 2, 1), 0);
  const TensorField half = center_blocks(random_field(rng, target.axes(), false), 0);
  Decomposition d;
  d.pipeline = "manual";
  d.p = 2.0;
  d.target = target;
  d.parts = {{"x", CoordSet(), half, 0.0, ""}, {"y", CoordSet::of({0}), target - half, 0.0, ""}};
  const Decomposition z = mean_zero_postprocess(d);
  EXPECT_LE(max_abs_diff(z.parts[0].field, half), 1e-12);
  EXPECT_LE(max_abs_diff(z.parts[1].field, target - half), 1e-12);
  EXPECT_FALSE(z.disjoint);
}

TEST(MeanZero, ConstantPartVanishes) {
  const Space bar = disjoint_union_copies(uniform_space(2), 2);
  const TensorField target = TensorField::generate({bar}, [](auto i) { return i[0] % 2 ? 1.0 : -1.0; });
  const TensorField c = TensorField::filled({bar}, 0.7);
  Decomposition d;
  d.pipeline = "manual";
  d.target = target;
  d.parts = {{"x", CoordSet(), c, 0.0, ""}, {"y", CoordSet::of({0}), target - c, 0.0, ""}};
  const Decomposition z = mean_zero_postprocess(d);
  EXPECT_LE(max_abs(z.parts[0].field), 1e-15);
}

TEST(MeanZero, RandomPostprocessIntegratesToZero) {
  CounterRng rng(9);
  const Space base = random_probability_space(rng, 2, false);
  TensorField fbar = random_field(rng, std::vector<Space>(2, disjoint_union_copies(base, 2)), false);
  fbar = center_blocks(center_blocks(fbar, 0), 1);
  const Decomposition z = mean_zero_postprocess(four_summand(fbar, 2.0));
  EXPECT_LE(z.reconstruction_error(), 1e-12);
  for (const auto& part : z.parts)
    for (std::size_t axis = 0; axis < 2; ++axis)
      EXPECT_LE(max_abs(center_blocks(part.field, axis) - part.field), 1e-12);
  EXPECT_USTAT_ERROR(mean_zero_postprocess(four_summand(random_family_field(rng, base, 2, 2), 2.0)), NotCanonical);
}

TEST(Caps, Defaults) {
  EXPECT_EQ(decomposition_cap(1), 64.0);
  EXPECT_EQ(decomposition_cap(2), 1024.0);
  EXPECT_EQ(decomposition_cap(3), 1048576.0);
}
