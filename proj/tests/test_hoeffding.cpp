#include "test_util.hpp"
#include "ustat/hoeffding.hpp"
#include "ustat/instances.hpp"
#include "ustat/oracles.hpp"

using namespace ustat;

namespace {

TensorField random_on(CounterRng& rng, std::size_t atoms, std::size_t n, std::size_t vdim = 0) {
  const Space base = random_probability_space(rng, atoms, false);
  std::optional<Space> v;
  if (vdim > 0) v = value_axis(vdim);
  return random_field(rng, product_axes(base, n, v), false);
}

bool all_near(const TensorField& f, double value, double tol) {
  for (double x : f.values())
    if (std::abs(x - value) > tol) return false;
  return true;
}

}  // namespace

TEST(CondExpect, IndicatorMean) {
  const TensorField f = TensorField::generate({uniform_space(2), uniform_space(2)},
                                              [](auto i) { return i[0] == 0 ? 1.0 : 0.0; });
  EXPECT_TRUE(all_near(cond_expect(f, CoordSet::of({1})), 0.5, 1e-15));
}

TEST(CondExpect, FullSetIsIdentity) {
  CounterRng rng(1);
  const TensorField f = random_on(rng, 3, 3);
  EXPECT_EQ(max_abs_diff(cond_expect(f, CoordSet::full(3)), f), 0.0);
}

TEST(CondExpect, MatchesDirectSummation) {
  CounterRng rng(2);
  for (int rep = 0; rep < 20; ++rep) {
    const TensorField f = random_on(rng, 3, 2, rep % 2 ? 2 : 0);
    EXPECT_LE(max_abs_diff(cond_expect(f, CoordSet::of({0})), oracle::cond_expect_direct(f, CoordSet::of({0}))),
              1e-14);
  }
}

TEST(HoeffdingProject, Constants) {
  const TensorField f = TensorField::filled(product_axes(uniform_space(2), 3), 1.7);
  EXPECT_TRUE(all_near(hoeffding_project(f, CoordSet()), 1.7, 1e-15));
  for (std::uint32_t b = 1; b < 8; ++b) EXPECT_TRUE(all_near(hoeffding_project(f, CoordSet(b)), 0.0, 1e-15));
}

TEST(HoeffdingProject, MeanZeroTensor) {
  const Space s = make_space({0.25, 0.75}, SpaceKind::probability);
  // g = (3, -1), h = (-3, 1) have mean zero under s.
  const TensorField f = TensorField::generate({s, s}, [](auto i) {
    const double g[] = {3.0, -1.0}, h[] = {-3.0, 1.0};
    return g[i[0]] * h[i[1]];
  });
  EXPECT_LE(max_abs_diff(hoeffding_project(f, CoordSet::of({0, 1})), f), 1e-15);
  for (std::uint32_t b : {0u, 1u, 2u}) EXPECT_TRUE(all_near(hoeffding_project(f, CoordSet(b)), 0.0, 1e-14));
}

TEST(HoeffdingProject, AgreesWithInclusionExclusion) {
  CounterRng rng(3);
  for (int rep = 0; rep < 20; ++rep) {
    const std::size_t n = 1 + rep % 4;
    const TensorField f = random_on(rng, 2 + rep % 2, n);
    for (std::uint32_t b = 0; b < (1u << n); ++b)
      EXPECT_LE(max_abs_diff(hoeffding_project(f, CoordSet(b)), oracle::project_inclusion_exclusion(f, CoordSet(b))),
                1e-12);
  }
}

TEST(HoeffdingLevel, LevelZeroIsMean) {
  CounterRng rng(4);
  const TensorField f = random_on(rng, 3, 3);
  EXPECT_TRUE(all_near(hoeffding_level(f, 0), integrate_all(f), 1e-14));
}

TEST(HoeffdingLevel, LevelsSumToIdentity) {
  CounterRng rng(5);
  const TensorField f = random_on(rng, 2, 4);
  TensorField sum = hoeffding_level(f, 0);
  for (std::size_t m = 1; m <= 4; ++m) sum = sum + hoeffding_level(f, m);
  EXPECT_LE(max_abs_diff(sum, f), 1e-12);
  EXPECT_USTAT_ERROR(hoeffding_level(f, 5), BadLevel);
}

TEST(HoeffdingLevel, MatchesPairSum) {
  CounterRng rng(6);
  const TensorField f = random_on(rng, 3, 3);
  TensorField sum = hoeffding_project(f, CoordSet::of({0, 1}));
  sum = sum + hoeffding_project(f, CoordSet::of({0, 2}));
  sum = sum + hoeffding_project(f, CoordSet::of({1, 2}));
  EXPECT_LE(max_abs_diff(sum, hoeffding_level(f, 2)), 1e-13);
}

TEST(HoeffdingDecompose, OneVariable) {
  const Space s = make_space({0.25, 0.75}, SpaceKind::probability);
  const TensorField f({s}, {4.0, 0.0});
  const auto parts = hoeffding_decompose(f);
  ASSERT_EQ(parts.size(), 2u);
  EXPECT_TRUE(all_near(parts[0], 1.0, 1e-15));
  EXPECT_NEAR(parts[1][0], 3.0, 1e-15);
  EXPECT_NEAR(parts[1][1], -1.0, 1e-15);
}

TEST(HoeffdingDecompose, SupportRestriction) {
  CounterRng rng(7);
  const Space base = random_probability_space(rng, 3, false);
  const TensorField g = random_field(rng, {base, base}, false);
  // f depends on coordinates 0 and 2 only.
  const TensorField f = TensorField::generate(product_axes(base, 3), [&](auto i) { return g.at({i[0], i[2]}); });
  const auto parts = hoeffding_decompose(f);
  const CoordSet a = CoordSet::of({0, 2});
  for (std::uint32_t b = 0; b < 8; ++b)
    if (!CoordSet(b).subset_of(a)) EXPECT_LE(max_abs(parts[b]), 1e-14);
}

TEST(HoeffdingDecompose, OrthogonalAndComplete) {
  CounterRng rng(8);
  const TensorField f = random_on(rng, 3, 3);
  const auto parts = hoeffding_decompose(f);
  TensorField sum = parts[0];
  for (std::size_t b = 1; b < parts.size(); ++b) sum = sum + parts[b];
  EXPECT_LE(max_abs_diff(sum, f), 1e-12);
  for (std::size_t a = 0; a < parts.size(); ++a)
    for (std::size_t b = a + 1; b < parts.size(); ++b) EXPECT_LE(std::abs(inner_product(parts[a], parts[b])), 1e-10);
}

TEST(ExtractKernels, SingleCoordinate) {
  const Space s = make_space({0.25, 0.75}, SpaceKind::probability);
  const double g[] = {3.0, -1.0};
  const TensorField f = TensorField::generate(product_axes(s, 3), [&](auto i) { return g[i[1]]; });
  const KernelFamily k = extract_kernels(f, 1);
  ASSERT_EQ(k.arity(), 1u);
  const TensorField* k1 = k.find({1});
  ASSERT_NE(k1, nullptr);
  EXPECT_NEAR((*k1)[0], 3.0, 1e-15);
  EXPECT_NEAR((*k1)[1], -1.0, 1e-15);
  for (const Kernel& ker : k.kernels())
    if (ker.index[0] != 1) EXPECT_LE(max_abs(ker.field), 1e-15);
}

TEST(ExtractKernels, LevelZeroIsMean) {
  CounterRng rng(9);
  const TensorField f = random_on(rng, 2, 3);
  const KernelFamily k = extract_kernels(f, 0);
  ASSERT_EQ(k.kernels().size(), 1u);
  EXPECT_NEAR(k.kernels()[0].field[0], integrate_all(f), 1e-14);
}

TEST(ExtractKernels, AssemblyRoundTrip) {
  CounterRng rng(10);
  for (std::size_t m = 1; m <= 3; ++m) {
    const TensorField f = random_on(rng, 2, 4, m == 2 ? 2 : 0);
    EXPECT_LE(max_abs_diff(assemble_ustat(extract_kernels(f, m), false), hoeffding_level(f, m)), 1e-12);
  }
}

TEST(AssembleUstat, SingleKernel) {
  const Space s = uniform_space(3);
  const TensorField k1({s}, {1.0, 2.0, 5.0});
  const KernelFamily k(1, 1, s, std::nullopt, {{{0}, k1}});
  EXPECT_EQ(max_abs_diff(assemble_ustat(k, false), k1), 0.0);
}

TEST(AssembleUstat, EmptyFamily) {
  const KernelFamily k(2, 3, uniform_space(2), std::nullopt, {});
  EXPECT_EQ(max_abs(assemble_ustat(k, false)), 0.0);
  EXPECT_EQ(max_abs(assemble_ustat(k, true)), 0.0);
}

TEST(AssembleUstat, PointwiseSum) {
  CounterRng rng(12);
  const Space base = random_probability_space(rng, 2, false);
  const KernelFamily k = random_kernel_family(rng, base, 3, 2);
  const TensorField u = assemble_ustat(k, false);
  for (std::size_t flat = 0; flat < u.size(); ++flat) {
    const auto x = u.multi_index(flat);
    double sum = 0.0;
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = i + 1; j < 3; ++j)
        if (const TensorField* ker = k.find({i, j})) sum += ker->at({x[i], x[j]});
    EXPECT_NEAR(u[flat], sum, 1e-14);
  }
}

TEST(AssembleUstat, DecoupledLayout) {
  CounterRng rng(13);
  const Space base = random_probability_space(rng, 2, false);
  const KernelFamily k = random_kernel_family(rng, base, 2, 2);
  const TensorField u = assemble_ustat(k, true);
  ASSERT_EQ(u.rank(), 4u);
  // Only (0,1) exists for n = 2: value depends on x^(1)_0 and x^(2)_1.
  const TensorField* ker = k.find({0, 1});
  ASSERT_NE(ker, nullptr);
  for (std::size_t flat = 0; flat < u.size(); ++flat) {
    const auto x = u.multi_index(flat);
    EXPECT_NEAR(u[flat], ker->at({x[0], x[3]}), 1e-15);
  }
}

TEST(FamilyField, RoundTrip) {
  CounterRng rng(14);
  const Space base = random_probability_space(rng, 3, false);
  const KernelFamily k = random_kernel_family(rng, base, 3, 2, 0.7);
  const TensorField fbar = to_family_field(k);
  const FamilyLayout layout = family_layout(fbar);
  EXPECT_EQ(layout.n, 3u);
  EXPECT_EQ(layout.m, 2u);
  const KernelFamily back = family_from_field(fbar, base);
  EXPECT_EQ(back.order(), TupleOrder::arbitrary);
  EXPECT_EQ(max_abs_diff(to_family_field(back), fbar), 0.0);
}

TEST(Invariants, ProjectionLaws) {
  CounterRng rng(15);
  const TensorField f = random_on(rng, 3, 3);
  for (std::uint32_t a = 0; a < 8; ++a) {
    const CoordSet A(a);
    const TensorField pa = hoeffding_project(f, A);
    EXPECT_LE(max_abs_diff(hoeffding_project(pa, A), pa), 1e-12);
    TensorField sub = TensorField::filled(f.axes(), 0.0);
    for (std::uint32_t b = 0; b < 8; ++b)
      if (CoordSet(b).subset_of(A)) sub = sub + hoeffding_project(f, CoordSet(b));
    EXPECT_LE(max_abs_diff(sub, cond_expect(f, A)), 1e-12);
    for (std::size_t j : A.elements()) EXPECT_LE(max_abs(average_along(pa, j)), 1e-12);
  }
}

TEST(Layout, RejectsMixedAxes) {
  const TensorField f = TensorField::filled({uniform_space(2), uniform_space(3)}, 1.0);
  EXPECT_USTAT_ERROR(product_layout(f), BadAxis);
  const TensorField g = TensorField::filled({counting_space(2)}, 1.0);
  EXPECT_USTAT_ERROR(product_layout(g), NotProbability);
}
