#pragma once

// Seeded random instances shared by the checks, the search driver and the CLI.

#include <cstdint>
#include <vector>

#include "ustat/hoeffding.hpp"
#include "ustat/rng.hpp"
#include "ustat/spaces.hpp"

namespace ustat {

/// Probability space with `atoms` atoms; uniform when `uniform`, otherwise
/// weights proportional to 0.5 + U[0,1).
Space random_probability_space(CounterRng& rng, std::size_t atoms, bool uniform);

/// Field with i.i.d. entries: U[0,1) (nonnegative) or standard normal.
/// `sparsity` is the probability that an entry is set to 0.
TensorField random_field(CounterRng& rng, std::vector<Space> axes, bool nonnegative, double sparsity = 0.0);

/// Family field on (n copies of base)^m with nonnegative entries.
TensorField random_family_field(CounterRng& rng, const Space& base, std::size_t n, std::size_t m,
                                double sparsity = 0.0);

/// Increasing-tuple family of m-variable nonnegative kernels; each tuple is
/// present with probability `density` (at least one kernel is kept).
KernelFamily random_kernel_family(CounterRng& rng, const Space& base, std::size_t n, std::size_t m,
                                  double density = 1.0);

/// Family whose index tuples pairwise share no coordinate.
KernelFamily disjoint_kernel_family(CounterRng& rng, const Space& base, std::size_t n, std::size_t m);

/// Random element of V_{<= level} on base^n (+ value axis of `value_dim` if > 0).
TensorField random_low_level_field(CounterRng& rng, const Space& base, std::size_t n, std::size_t level,
                                   std::size_t value_dim = 0);

/// Mean-zero fields on base (+ value axis of `value_dim` if > 0).
std::vector<TensorField> random_mean_zero_fields(CounterRng& rng, const Space& base, std::size_t count,
                                                 std::size_t value_dim = 0);

/// Input of the weighted lower bound: f_{i,j}(x_i) stored on
/// [n_i copies of Omega, counting(J)], and weights w_{i,j} on Omega^I stored
/// at index i * J + j.
struct WeightedInstance {
  Space base;
  std::size_t I = 0;
  std::size_t J = 0;
  TensorField f;
  std::vector<TensorField> w;
};

WeightedInstance random_weighted_instance(CounterRng& rng, std::size_t I, std::size_t J, std::size_t atoms,
                                          bool binary_weights);

}  // namespace ustat
