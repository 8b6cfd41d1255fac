#pragma once

// Brute-force reference computations. Slow, simple, and written without the
// library's optimized paths so they can serve as test oracles.

#include <cstddef>
#include <vector>

#include "ustat/hoeffding.hpp"
#include "ustat/interp.hpp"
#include "ustat/norms.hpp"
#include "ustat/spaces.hpp"

namespace ustat::oracle {

/// E_A f by direct weighted summation over the coordinates outside A.
TensorField cond_expect_direct(const TensorField& f, CoordSet a);

/// P_A f by inclusion-exclusion: sum over B subset of A of (-1)^{|A \ B|} E_B f.
TensorField project_inclusion_exclusion(const TensorField& f, CoordSet a);

/// Mixed norm by nested loops over the levels.
double nested_norm(const TensorField& f, const NormSpec& spec);

/// int (sum_i f_i)^q over Omega^n or (Omega^n)^m, enumerating every point of
/// the full product space.
double ustat_moment_direct(const KernelFamily& k, double q, bool decoupled);

/// Decoupled LHS of a family field, enumerating (Omega^n)^m.
double family_lhs_direct(const TensorField& fbar, double p);

struct GridOptions {
  std::size_t points = 201;  // per-entry grid on the first pass
  std::size_t levels = 12;   // zoom passes
  std::size_t max_entries = 4;
};

/// min over f0 on a per-entry grid spanning [-max|f|, max|f|], refined by
/// zooming around the best grid point. Throws TooLarge above max_entries.
/// For 3-4 entries the first pass uses a coarser grid.
double kfun_grid(const TensorField& f, double t, const Couple& c, const GridOptions& opts = {});

/// Same over f0 in the range of `projector`, parametrized by an orthonormal
/// basis of that range (Gram-Schmidt on the projected unit vectors).
double kfun_constrained_grid(const TensorField& f, double t, const Couple& c, const Projector& projector,
                             const GridOptions& opts = {});

/// Exact K for the couple (L^1(outer, l^p(fiber)), L^p(outer, l^p(fiber))),
/// fiber axes being trailing counting axes (possibly none): the optimal split
/// truncates the fiber norms at a level, found by a one-dimensional search.
double kfun_truncation(const TensorField& f, double t, double p, std::size_t fiber_rank);

/// Minimal certificate sum over all assignments of the entries of a family
/// field to the 2^m buckets J (part J certified in L^1(J', L^p(J))).
/// Throws TooLarge when 2^{m * entries} exceeds 2^22.
double bucket_optimum(const TensorField& fbar, double p);

}  // namespace ustat::oracle
