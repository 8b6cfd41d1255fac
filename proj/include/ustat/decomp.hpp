#pragma once

// Constructive decompositions of kernel families into sums of pieces with
// mixed-norm certificates.
//
// A family {f_i : i in [n]^m} of functions on Omega^m is handled as one field
// on Omegabar^m, Omegabar being the disjoint union of n copies of Omega (see
// to_family_field). Part "J" of a decomposition carries the certificate
//   || . ||_{L^1(Omegabar^{J'}, L^p(Omegabar^J))},
// J a subset of the axes and J' its complement.

#include <string>
#include <utility>
#include <vector>

#include "ustat/hoeffding.hpp"
#include "ustat/norms.hpp"

namespace ustat {

/// Fields with values in [0,1]; `binary` when every value is 0 or 1.
struct WeightFamily {
  std::vector<TensorField> weights;
  bool binary = false;

  /// Validates the range (BadInstance) and sets `binary`.
  static WeightFamily make(std::vector<TensorField> weights);
};

/// Indicator of { E(w v eps | retained axes) >= kappa }, where the average is
/// over the axes not listed in `retained` and broadcast back. Comparisons
/// allow 1e-12 of rounding slack. Throws BadThreshold unless 0 <= eps < kappa <= 1.
TensorField threshold_weights(const TensorField& w, double kappa, double eps,
                              const std::vector<std::size_t>& retained);
WeightFamily threshold_weights(const WeightFamily& w, double kappa, double eps,
                               const std::vector<std::size_t>& retained);

/// g = f 1{f >= lambda}, h = f 1{f < lambda}. Throws BadLevel for lambda <= 0
/// and NotNonnegative for negative f.
std::pair<TensorField, TensorField> level_cut(const TensorField& f, double lambda);

/// Winner-takes-all reassignment: f(x) goes to the first part where
/// g(x) >= h(x), to the second otherwise. Throws NotADecomposition when
/// g + h differs from f by more than 1e-12 (relative, floor 1).
std::pair<TensorField, TensorField> disjointize(const TensorField& f, const TensorField& g, const TensorField& h);

struct DecompositionPart {
  std::string name;
  CoordSet lp_axes;  // J: axes under the inner L^p
  TensorField field;
  double certificate = 0.0;
  std::string stage;
};

struct Decomposition {
  std::string pipeline;
  double p = 1.0;
  TensorField target;
  double lhs = 0.0;  // decoupled LHS of the target
  std::vector<DecompositionPart> parts;
  bool disjoint = true;

  double certificate_sum() const;
  TensorField reconstruct() const;
  /// Largest |sum of parts - target| over entries.
  double reconstruction_error() const;
  /// True when no entry has two nonzero parts.
  bool supports_disjoint() const;
  const DecompositionPart& part(const std::string& name) const;
};

/// L^1(axes outside J, L^p(axes in J)) for a field on Omegabar^m.
double mixed_certificate(const TensorField& part, CoordSet lp_axes, double p);

/// Constant bounding int g + int h^p (after normalizing the LHS to 1) for the
/// level-cut decomposition: p 2^{1-1/p} + 4^{p-1}.
double level_cut_constant(double p);

/// int g / lambda + int (h / lambda)^p of a js_decompose output.
double level_cut_functional(const Decomposition& d);

/// Level cut of |f| at the LHS of the one-variable family (skipped when the
/// LHS is 0), on a field over one disjoint-union axis. Parts "g" (J = {}) and
/// "h" (J = {0}); signs are restored.
Decomposition js_decompose(const TensorField& fbar, double p);

/// Builds the one-axis family field from functions f_i on Omega.
TensorField family_of(const std::vector<TensorField>& fields);

/// Four-summand pipeline for a field on Omegabar^2. Parts "a" (J = {}),
/// "b" (J = {0,1}), "c" (J = {1}) and "d" (J = {0}).
Decomposition four_summand(const TensorField& fbar, double p, std::size_t guard = kDefaultElementGuard);

inline constexpr std::size_t kMaxMultilevelArity = 3;

/// 2^m-summand recursion on a field over Omegabar^m, m <= max_arity (TooLarge
/// otherwise). Part names are the J sets, e.g. "{}", "{0}", "{0,2}".
Decomposition multilevel_decompose(const TensorField& fbar, double p,
                                   std::size_t max_arity = kMaxMultilevelArity,
                                   std::size_t guard = kDefaultElementGuard);

/// Applies (id - E) blockwise along every axis to each part and recomputes
/// the certificates; clears `disjoint`. Throws NotCanonical unless the target
/// is mean zero along every axis in every block.
Decomposition mean_zero_postprocess(const Decomposition& d);

/// Blockwise centering along one disjoint-union axis.
TensorField center_blocks(const TensorField& f, std::size_t axis);

/// Default caps for the constructive-direction check: 64, 1024, 2^20 for m = 1, 2, 3.
double decomposition_cap(std::size_t m);

std::string coordset_name(CoordSet s);

}  // namespace ustat
