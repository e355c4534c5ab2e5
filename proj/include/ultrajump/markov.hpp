#pragma once

#include <Eigen/Sparse>

#include <cstddef>
#include <optional>
#include <vector>

#include "ultrajump/forms.hpp"
#include "ultrajump/kernel.hpp"
#include "ultrajump/space.hpp"

namespace ultrajump {

/// Rate matrix of the level-k chain: q(i, j) = J^k(i, j) mu^k(j) off the
/// diagonal, q(i, i) = -sum_{j != i} q(i, j).
struct GeneratorMatrix {
  using Sparse = Eigen::SparseMatrix<double, Eigen::RowMajor>;

  int level = 0;
  Sparse q;
  std::vector<double> mu;

  std::size_t size() const { return mu.size(); }
  double rate(std::size_t i, std::size_t j) const;
  double exit_rate(std::size_t i) const;
  double max_exit_rate() const;
  double min_exit_rate() const;
  /// Off-diagonal entries summed in column order, then the diagonal added.
  double row_sum(std::size_t i) const;
  Eigen::MatrixXd dense() const { return Eigen::MatrixXd(q); }
};

GeneratorMatrix build_generator(const AveragedKernel& rates, const TreeSpace& space);

/// Generator of the leaf chain and of the level-k chain of a kernel.
inline GeneratorMatrix leaf_generator(const JumpKernel& kernel) {
  return build_generator(average(kernel, kernel.space().k_max()), kernel.space());
}
inline GeneratorMatrix level_generator(const JumpKernel& kernel, int k) {
  return build_generator(average(kernel, k), kernel.space());
}

/// Poisson tail mass at which the uniformization series is cut.
inline constexpr double kUniformizationTail = 1e-12;

/// P_t f = exp(tQ) f by uniformization.
LevelFunction semigroup_apply(const GeneratorMatrix& q, double t, const LevelFunction& f);

/// G_lambda f = (lambda I - Q)^{-1} f.
LevelFunction resolvent_apply(const GeneratorMatrix& q, double lambda, const LevelFunction& f);

/// || P_t^K E f - E P_t^k f ||_{L^2(mu)} for a level-k function f.
double commutation_residual(const JumpKernel& kernel, int k, double t, const LevelFunction& f);
double commutation_residual(const TreeSpace& space, const GeneratorMatrix& leaf, const GeneratorMatrix& coarse,
                            double t, const LevelFunction& f);

/// || G_lambda^K E f - E G_lambda^k f ||_{L^2(mu)} for a level-k function f.
double resolvent_intertwine_residual(const JumpKernel& kernel, int k, double lambda, const LevelFunction& f);
double resolvent_intertwine_residual(const TreeSpace& space, const GeneratorMatrix& leaf,
                                     const GeneratorMatrix& coarse, double lambda, const LevelFunction& f);

struct LumpWitness {
  std::size_t i = 0;  // level-k block containing x and x2
  std::size_t j = 0;  // target block
  std::size_t x = 0;
  std::size_t x2 = 0;
  double rate_x = 0.0;   // sum_{y in j} q(x, y)
  double rate_x2 = 0.0;  // sum_{y in j} q(x2, y)
};

struct LumpabilityResult {
  bool lumpable = false;
  std::optional<GeneratorMatrix> lumped;
  std::optional<LumpWitness> witness;
};

/// Strong lumpability of a chain (at any level >= k) with respect to the
/// partition into level-k balls. Aggregate rates are compared with a
/// tolerance of 1e-12 times the largest exit rate.
LumpabilityResult lumpability_test(const TreeSpace& space, const GeneratorMatrix& q, int k);

struct TightnessReport {
  int k0 = 0;
  std::vector<int> levels;
  std::vector<double> maxima;
  double constant = 0.0;  // max over the window
};

/// sup_i sum_j (g(i) - g(j))^2 J^k(i, j) mu^k(j) for k in [k0, K], with g read
/// through restriction to level k.
TightnessReport tightness_bound(const JumpKernel& kernel, const LevelFunction& g, int k0);

}  // namespace ultrajump
