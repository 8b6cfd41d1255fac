#pragma once

// K-functionals of couples of mixed-norm spaces on a fixed field shape, and
// the interpolation norms built from them.

#include <cstddef>
#include <functional>
#include <optional>

#include "ustat/norms.hpp"

namespace ustat {

/// (X0, X1): two norms on fields of one shape. All exponents must be >= 1.
struct Couple {
  NormSpec spec0;
  NormSpec spec1;

  /// Throws BadSpec unless both specs are valid convex norms for `rank`.
  void validate(std::size_t rank) const;
};

/// Linear map used as a subspace constraint. Must be the orthogonal projector
/// (for the product-measure inner product) onto the subspace, e.g. a sum of
/// Hoeffding projections.
using Projector = std::function<TensorField(const TensorField&)>;

struct SolverOptions {
  std::size_t max_iters = 20000;
  double tol = 1e-8;
  std::size_t patience = 200;
  double eps_start = 1e-2;
  double eps_end = 1e-10;
};

struct KResult {
  double value = 0.0;  // ||part0||_0 + t ||part1||_1 (an upper bound for K)
  TensorField part0;
  TensorField part1;
  double dual = 0.0;  // certified lower bound for K
  double gap = 0.0;   // value - dual, or infinity when the cap was hit unresolved
  std::size_t iterations = 0;
  bool converged = true;
};

/// K(f, t) = inf over f = f0 + f1 of ||f0||_0 + t ||f1||_1, with f0 (and so
/// f1) restricted to the range of `constraint` when one is given; f must lie
/// in that range (BadInstance otherwise).
///
/// Accelerated gradient descent with backtracking on the smoothed objective,
/// smoothing annealed from eps_start to eps_end (relative to max |f|). The
/// best iterate by the exact objective is returned. The lower bound comes from
/// dual feasible functionals built from the norm gradients at the solution.
KResult k_functional(const TensorField& f, double t, const Couple& c, const Projector& constraint = {},
                     const SolverOptions& opts = {}, const TensorField* warm_start = nullptr);

/// ||f||_{X0+X1} = K(f, 1).
double sum_norm(const TensorField& f, const Couple& c, const SolverOptions& opts = {});

/// max(||f||_0, ||f||_1).
double intersection_norm(const TensorField& f, const Couple& c);

struct ThetaQOptions {
  int log2_t_min = -40;
  int log2_t_max = 40;
  int steps_per_octave = 8;
  unsigned threads = 1;
  SolverOptions solver;
};

/// (int_0^inf (t^-theta K(f,t))^q dt/t)^{1/q} by the trapezoid rule in log t on
/// a geometric grid, with the tails outside the grid integrated in closed form
/// from K = t ||f||_1 (small t) and K = ||f||_0 (large t).
double theta_q_norm(const TensorField& f, const Couple& c, double theta, double q,
                    const ThetaQOptions& opts = {});

struct ClosednessResult {
  double ratio = 1.0;
  KResult constrained;
  KResult unconstrained;
};

/// Constrained K over unconstrained K. The unconstrained value is taken as the
/// smaller of its own solve and the constrained solve (every constrained
/// decomposition is admissible), so the ratio is >= 1. f = 0 gives 1.
ClosednessResult k_closedness(const TensorField& f, double t, const Couple& c, const Projector& projector,
                              const SolverOptions& opts = {});
double k_closedness_ratio(const TensorField& f, double t, const Couple& c, const Projector& projector,
                          const SolverOptions& opts = {});

}  // namespace ustat
