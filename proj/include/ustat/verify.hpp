#pragma once

// Inequality checks. Each check computes both sides exactly, reports the
// observed ratio, and asserts only the explicitly known one-sided constants.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "ustat/decomp.hpp"
#include "ustat/instances.hpp"
#include "ustat/interp.hpp"
#include "ustat/norms.hpp"

namespace ustat {

struct CheckReport {
  std::string check;
  std::uint64_t seed = 0;
  nlohmann::ordered_json params = nlohmann::ordered_json::object();
  double lhs = 0.0;
  double rhs = 0.0;
  double constant = 1.0;
  double ratio = 1.0;
  bool pass = true;
  bool asserted = true;  // false for measured-only reports
  std::optional<double> runtime_ms;
  std::string note;
};

/// X_i(x) = fields[i](x_i), independent, nonnegative. LHS = ||sum X_i||_p,
/// RHS = max(sum ||X_i||_1, (sum ||X_i||_p^p)^{1/p}); asserts LHS >= RHS.
CheckReport check_rosenthal(const std::vector<TensorField>& fields, double p);

/// E(sum_{i,j} |(w v eps) f|^p)^{1/p} >= C (L^1 + L^p)(disjoint union, l^p(J))
/// norm of the thresholded family, with C = (kappa - eps)^{2 - 1/p} 2^{-1/p'}
/// for binary weights and kappa^p 2^{-1/p'} otherwise. The right side is the
/// solver's dual bound; the check also requires a finite gap.
CheckReport check_weighted_lower_bound(const WeightedInstance& inst, double p, double kappa, double eps,
                                       const SolverOptions& solver = {});

/// Thresholded family 1{E_i(w v eps) >= kappa} f on [Omegabar_I, counting(J)].
TensorField thresholded_family(const WeightedInstance& inst, double kappa, double eps);
/// Exact left side of the weighted inequality.
double weighted_lhs(const WeightedInstance& inst, double p, double eps);
/// Couple (L^1(l^p(J)), L^p(l^p(J))) on [Omegabar_I, counting(J)].
Couple weighted_couple(double p);
double weighted_constant(double p, double kappa, double eps, bool binary);

/// Sanity of a decomposition output: exact reconstruction (1e-12), support
/// disjointness when flagged, certificate sum >= LHS (constant 1, relative
/// 1e-12) and, when cap > 0, certificate sum <= cap * LHS.
CheckReport check_decomposition(const Decomposition& d, double cap);

/// Coupled over decoupled int (sum f_i)^q. Asserts positivity, finiteness,
/// invariance under relabelings and equal-weight atom permutations, and
/// ratio 1 when no two index tuples share a coordinate.
CheckReport check_decoupling(const KernelFamily& k, double q, const std::optional<McOptions>& mc = std::nullopt);

/// Relabeling i -> n-1-i with reversed kernel arguments.
KernelFamily reverse_family(const KernelFamily& k);
/// Applies one permutation of the atoms (cyclic within classes of equal
/// weight) to every kernel argument.
KernelFamily permute_atoms(const KernelFamily& k);

/// ||f||_p / ||square_function(f, M)||_p; asserted equal to 1 for p = 2,
/// M = 0, or a single nonzero Hoeffding component.
CheckReport check_square_function(const TensorField& f, double p, std::size_t M);

/// Mean-zero X_i(x) = fields[i](x_i) (optional value axis, normed by l^p).
/// Reports E||sum X_i|| / E||(sum |X_i|^2)^{1/2}|| and asserts the
/// symmetrization ratio E||sum X_i|| / E_r E||sum r_i X_i|| lies in [1/2, 2].
CheckReport check_mz(const std::vector<TensorField>& fields, double p);

/// (E|sum r_i z_i|^p)^{1/p} / ||z||_2 by enumeration of the 2^n signs.
double khintchine_ratio(const std::vector<double>& z, double p);

/// |sum x_k d_k phi(x) - phi(x)| / phi(x) with central differences
/// (h = 1e-5 max|x|, shrunk so no difference crosses zero). Undefined at x = 0.
double euler_check(const NormSpec& spec, const TensorField& x);

/// f: field whose leading axes form the probability space and whose last
/// `fiber_rank` axes carry the pointwise norm X (spec axes numbered within the
/// fiber). Compares E||f||_X^q with <f, P_V(||f||_X^{q-1} grad ||.||_X(f))>,
/// the gradient by central differences and 0 on vanishing entries. Returns the
/// relative residual. Undefined for f = 0.
double duality_identity_check(const TensorField& f, double q, const NormSpec& x_spec, const Projector& projector,
                              std::size_t fiber_rank = 1);

/// Hill climbing over instance parameter vectors.
struct SearchProblem {
  std::string check;
  std::function<std::vector<double>(CounterRng&)> sample;
  std::function<CheckReport(const std::vector<double>&)> evaluate;
  std::function<double(const CheckReport&)> adverse;  // larger is worse
  std::function<void(std::vector<double>&)> clamp;
};

struct SearchParams {
  std::size_t n = 2;
  std::size_t m = 2;
  std::size_t atoms = 2;
  std::size_t I = 2;
  std::size_t J = 1;
  double p = 2.0;
  double q = 0.5;
  double kappa = 1.0;
  double eps = 0.0;
  bool binary = true;
  SolverOptions solver;
};

/// Built-in problems: weighted_lower_bound, decoupling, rosenthal, mz.
/// Throws BadCheck for other names.
SearchProblem make_search_problem(const std::string& check, const SearchParams& params);

/// Random restarts plus coordinate perturbations; `budget` evaluations in
/// total. Deterministic given the seed. The returned report carries the
/// instance vector under params["instance"].
CheckReport extremal_search(const SearchProblem& problem, std::size_t budget, std::uint64_t seed);
CheckReport extremal_search(const std::string& check, const SearchParams& params, std::size_t budget,
                            std::uint64_t seed);

}  // namespace ustat
