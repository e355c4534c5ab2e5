#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "ultrajump/space.hpp"

namespace ultrajump {

/// A function lambda on the balls of the tree, non-decreasing along every
/// root-to-leaf path. Below the window it is held at its root value, so the
/// tail of the telescoping sum vanishes.
class LambdaProfile {
 public:
  /// lambda(ball at level m) = q^{alpha m}.
  static LambdaProfile geometric(SpacePtr space, double alpha);
  /// One value per level, k_min..K.
  static LambdaProfile level_table(SpacePtr space, std::vector<double> per_level);
  /// One value per ball, indexed [level - k_min][ball].
  static LambdaProfile node_table(SpacePtr space, std::vector<std::vector<double>> per_node);

  double value(int level, std::size_t ball) const;
  const SpacePtr& space() const { return space_; }
  std::string describe() const { return description_; }

 private:
  LambdaProfile(SpacePtr space, std::vector<std::vector<double>> values, std::string description);

  SpacePtr space_;
  std::vector<std::vector<double>> values_;
  std::string description_;
};

/// Assignment of mixture components (1-based) to pairs of distinct balls.
///
/// Only sibling pairs matter: a leaf pair separated at level r is governed by
/// the entry for its two level-r ancestors. Entries for non-sibling pairs at
/// level k are pushed up to the level where the two balls separate and must
/// agree with anything already assigned there. Precedence: `leaf_matrix`,
/// then `pairs`, then `by_level`, then `default_component`.
struct GammaSpec {
  struct PairEntry {
    int level = 0;
    std::size_t i = 0;
    std::size_t j = 0;
    std::size_t component = 1;
  };

  std::size_t default_component = 1;
  std::map<int, std::size_t> by_level;
  std::vector<PairEntry> pairs;
  std::optional<std::vector<std::vector<std::size_t>>> leaf_matrix;
};

namespace detail {
class KernelImpl;
}

/// Symmetric non-negative jump rate density J(x, y) on leaf pairs.
class JumpKernel {
 public:
  enum class Variant { Kigami, Table, Mixed, Perturbed };

  static JumpKernel kigami(const LambdaProfile& profile);
  /// Dense leaf-pair table; the diagonal is ignored.
  static JumpKernel table(SpacePtr space, const Eigen::MatrixXd& matrix);
  static JumpKernel mixed(const std::vector<LambdaProfile>& components, const GammaSpec& gamma);
  /// J(x,y) (1 + epsilon s(x) s(y)), |epsilon| < 1, s(x) in {-1, +1}.
  static JumpKernel perturbed(const JumpKernel& base, double epsilon, std::vector<int> signs);

  /// J(x, y) for distinct leaves; throws DiagonalQuery when x == y.
  double operator()(std::size_t x, std::size_t y) const;

  Variant variant() const;
  const TreeSpace& space() const;
  const SpacePtr& space_ptr() const;
  std::string describe() const;

  /// Relative tolerance used when comparing kernel values for ball-wise
  /// constancy: zero where values are produced by identical arithmetic.
  double bc_tolerance() const;

  /// Component chosen for a leaf pair (mixed kernels only).
  std::size_t component_of(std::size_t x, std::size_t y) const;
  std::size_t component_count() const;
  /// Component kernels of a mixed kernel, or the base of a perturbed one.
  std::vector<JumpKernel> parts() const;

  /// Dense leaf-pair matrix with zero diagonal.
  Eigen::MatrixXd leaf_matrix() const;

 private:
  explicit JumpKernel(std::shared_ptr<const detail::KernelImpl> impl) : impl_(std::move(impl)) {}
  std::shared_ptr<const detail::KernelImpl> impl_;
};

/// Evaluates the telescoping sum
///   sum_{m = k_min + 1}^{r(x,y)} (lambda({x}_m) - lambda({x}_{m-1})) / mu({x}_m).
/// Throws DiagonalQuery for x == y.
double kigami_eval(const LambdaProfile& profile, std::size_t x, std::size_t y);

/// Ball-pair averages J^k(i, j) of a kernel at level k, zero on the diagonal.
struct AveragedKernel {
  int level = 0;
  Eigen::MatrixXd rates;
};

AveragedKernel average(const JumpKernel& kernel, int k);

struct BcWitness {
  std::size_t i = 0;   // level-k ball
  std::size_t j = 0;   // level-k ball
  std::size_t x = 0;   // leaf in i
  std::size_t x2 = 0;  // leaf in i with J(x2, y) != J(x, y)
  std::size_t y = 0;   // leaf in j
};

struct BcResult {
  bool holds = true;
  std::optional<BcWitness> witness;
};

/// Ball-wise constancy of level k: J constant on every B_i x B_j, i != j.
BcResult detect_bc(const JumpKernel& kernel, int k);

/// Finite-truncation maxima for the integrability conditions. They certify
/// the conditions at resolution K only; nothing is said about the infinite
/// space.
struct ConditionReport {
  int k1 = 0;
  int resolution = 0;
  double a1 = 0.0;  // max_{k, i} int_{B_i x B_i^c} J
  double a3 = 0.0;  // max_{k >= k1, x} mu(B_x^k)^{-1} int_{B_x^k x (B_x^{k1})^c} J
  double a4 = 0.0;  // max_x int_{rho(x,y) >= 1} J(x, y) mu(dy)
  std::string note;
};

ConditionReport validate_conditions(const JumpKernel& kernel, int k1);

/// Builds the mixed kernel J_Gamma(x, y) = J_{Gamma(x, y)}(x, y).
inline JumpKernel mixed_build(const std::vector<LambdaProfile>& components, const GammaSpec& gamma) {
  return JumpKernel::mixed(components, gamma);
}

}  // namespace ultrajump
