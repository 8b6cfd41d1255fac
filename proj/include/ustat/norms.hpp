#pragma once

// Mixed Lebesgue norms on TensorFields and the U-statistic moment functionals.

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ustat/hoeffding.hpp"
#include "ustat/spaces.hpp"

namespace ustat {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// One level of a mixed norm: (sum/integral over `axes` of child^p)^{1/p}.
/// p = kInf means the (weight-free) maximum over the axes.
struct NormLevel {
  double p = 1.0;
  std::vector<std::size_t> axes;
};

/// Levels listed innermost first; the leaf is the absolute value. Every axis
/// of the target field must appear in exactly one level.
class NormSpec {
 public:
  NormSpec() = default;
  explicit NormSpec(std::vector<NormLevel> levels);

  /// Single level over the given axes.
  static NormSpec lp(double p, std::vector<std::size_t> axes);
  /// Single level over axes 0..rank-1.
  static NormSpec lp_all(double p, std::size_t rank);
  /// L^outer(outer_axes, L^inner(inner_axes)); empty groups are dropped.
  static NormSpec mixed(double inner, std::vector<std::size_t> inner_axes, double outer,
                        std::vector<std::size_t> outer_axes);

  /// Wraps this spec in a further outer level.
  NormSpec then(double p, std::vector<std::size_t> axes) const;

  const std::vector<NormLevel>& levels() const { return levels_; }

  /// Same nesting with every exponent replaced by its conjugate.
  NormSpec dual() const;

  bool convex() const;

  /// Throws BadSpec unless the axes partition 0..rank-1.
  void validate(std::size_t rank) const;

  std::string describe() const;

 private:
  std::vector<NormLevel> levels_;
};

double conjugate_exponent(double p);

/// Exact weighted evaluation. Throws BadSpec on an axis mismatch.
double norm(const TensorField& f, const NormSpec& spec);

/// NormSpec bound to an axis list, with precomputed index maps. Used for
/// repeated evaluation on raw value vectors.
class CompiledNorm {
 public:
  CompiledNorm(const std::vector<Space>& axes, const NormSpec& spec);

  std::size_t size() const { return size_; }
  const NormSpec& spec() const { return spec_; }
  /// Product of the axis weights at every entry.
  std::span<const double> entry_weights() const { return weights_; }

  double value(std::span<const double> x) const;

  /// Norm with leaves |x| replaced by sqrt(x^2 + eps^2). When `grad` is
  /// nonempty it receives the dual-pairing gradient phi, i.e. the vector with
  /// d(value)/dx_k = weight_k * phi_k. With eps = 0, phi is the gradient of
  /// the exact norm, extended by 0 where a level vanishes.
  double smoothed(std::span<const double> x, double eps, std::span<double> grad) const;

 private:
  struct Level {
    double p;
    std::size_t out_size;
    std::vector<std::size_t> out_index;  // child position -> parent position
    std::vector<double> weight;          // weight of the summed coordinates
  };
  NormSpec spec_;
  std::size_t size_ = 0;
  std::vector<double> weights_;
  std::vector<Level> levels_;
};

/// Gradient (dual pairing) of the exact norm at x, 0 where undefined.
std::vector<double> norm_gradient(const TensorField& f, const NormSpec& spec);

enum class Coupling { coupled, decoupled };

struct McOptions {
  std::uint64_t samples = 0;
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

struct Estimate {
  double value = 0.0;
  double std_error = 0.0;
  std::uint64_t samples = 0;  // 0 for exact evaluation
};

/// Integral of (sum_i f_i^r)^s over Omega^n (coupled) or (Omega^n)^m
/// (decoupled), where f_i runs over the kernels evaluated at the selected
/// coordinates. Kernels must be nonnegative (NotNonnegative) and scalar.
/// Exact mode enumerates only the coordinates some kernel depends on.
Estimate ustat_moment(const KernelFamily& k, double r, double s, Coupling mode,
                      const std::optional<McOptions>& mc = std::nullopt,
                      std::size_t guard = kDefaultElementGuard);

/// Integral of (sum_i f_i^p)^{1/p}.
Estimate ustat_lhs(const KernelFamily& k, double p, Coupling mode,
                   const std::optional<McOptions>& mc = std::nullopt,
                   std::size_t guard = kDefaultElementGuard);

/// Decoupled LHS of the family represented by a field on (disjoint union of
/// n copies of Omega)^m, using |values|:
///   int_{(Omega^n)^m} (sum_{i in [n]^m} |f_i(x^(1)_{i_1},...,x^(m)_{i_m})|^p)^{1/p}.
double family_lhs(const TensorField& fbar, double p, std::size_t guard = kDefaultElementGuard);

/// sqrt(sum_{|A| <= M} (P_A f)^2). Throws HigherLevelsPresent when f has a
/// component of level > M above 1e-10 (relative to max |f|, floor 1).
TensorField square_function(const TensorField& f, std::size_t M);

}  // namespace ustat
