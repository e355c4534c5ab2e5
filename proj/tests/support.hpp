#pragma once
// Shared helpers for the unit tests: hand-rolled random generators and
// independent dense oracles. Nothing here calls the library's numerics for
// the quantity under test.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "ultrajump/forms.hpp"
#include "ultrajump/kernel.hpp"
#include "ultrajump/markov.hpp"
#include "ultrajump/space.hpp"

namespace testing {

using namespace ultrajump;

// Deterministic generator for property tests.
class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}
  double real(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
  std::size_t index(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng_); }
  std::mt19937_64& engine() { return rng_; }

  LevelFunction function(const TreeSpace& space, int k, double lo = -1.0, double hi = 1.0) {
    LevelFunction u{k, std::vector<double>(space.size(k))};
    for (auto& c : u.coeffs) c = real(lo, hi);
    return u;
  }

  // Random tree: mixed branching (1..3 children, at least one node with 2+
  // per level) and random child fractions.
  SpaceConfig tree(int k_min, int k_max) {
    SpaceConfig c;
    c.q = real(1.5, 4.0);
    c.k_min = k_min;
    c.k_max = k_max;
    c.default_branching = static_cast<std::uint32_t>(integer(2, 3));
    c.root_mass = real(0.5, 2.0);
    // Weights for the root only; deeper nodes stay uniform unless branched.
    const auto b = c.default_branching;
    std::vector<double> w(b);
    double total = 0.0;
    for (auto& x : w) total += (x = real(0.2, 1.0));
    for (auto& x : w) x /= total;
    double s = 0.0;
    for (std::size_t i = 0; i + 1 < w.size(); ++i) s += w[i];
    w.back() = 1.0 - s;
    c.node_weights[""] = w;
    if (k_max - k_min >= 2) c.node_branching["1"] = 1;
    return c;
  }

 private:
  std::mt19937_64 rng_;
};

// A Kigami profile valid on any tree: each child's increment over its
// parent is c * mass(child), with one positive c per parent.
inline LambdaProfile random_profile(Gen& gen, const SpacePtr& s) {
  std::vector<std::vector<double>> v(static_cast<std::size_t>(s->k_max() - s->k_min()) + 1);
  v[0].assign(s->size(s->k_min()), gen.real(0.1, 1.0));
  for (int m = s->k_min() + 1; m <= s->k_max(); ++m) {
    const auto l = static_cast<std::size_t>(m - s->k_min());
    std::vector<double> c(s->size(m - 1));
    for (auto& x : c) x = gen.real(0.5, 5.0) * std::pow(s->q(), m);
    v[l].resize(s->size(m));
    for (std::size_t b = 0; b < s->size(m); ++b) {
      const auto parent = s->parent(m, b);
      v[l][b] = v[l - 1][parent] + c[parent] * s->mass(m, b);
    }
  }
  return LambdaProfile::node_table(s, std::move(v));
}

inline SpacePtr padic(std::uint32_t p, int k_min, int k_max) { return build_space(SpaceConfig::padic(p, k_min, k_max)); }

inline std::size_t leaf(const TreeSpace& space, const std::string& word) {
  BallAddress a;
  a.level = space.k_max();
  a.digits = parse_word(word);
  return space.index_of(a);
}

// Geometric Kigami kernel on a p-adic window straight from the digit
// definition: J = sum_{m=k_min+1}^{r} (p^{a m} - p^{a (m-1)}) p^{m}.
inline double padic_kigami_oracle(std::uint32_t p, double alpha, int k_min, int r) {
  double total = 0.0;
  for (int m = k_min + 1; m <= r; ++m)
    total += (std::pow(p, alpha * m) - std::pow(p, alpha * (m - 1))) * std::pow(p, static_cast<double>(m));
  return total;
}

// Dense generator assembled independently of build_generator.
inline Eigen::MatrixXd dense_generator(const TreeSpace& space, const Eigen::MatrixXd& rates, int k) {
  const auto n = static_cast<Eigen::Index>(space.size(k));
  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j)
      if (i != j) q(i, j) = rates(i, j) * space.mass(k, static_cast<std::size_t>(j));
    q(i, i) = -(q.row(i).sum());
  }
  return q;
}

// Leaf-pair double sum for the averaged kernel.
inline Eigen::MatrixXd average_oracle(const JumpKernel& kernel, int k) {
  const auto& s = kernel.space();
  const auto n = static_cast<Eigen::Index>(s.size(k));
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(n, n);
  const int K = s.k_max();
  for (std::size_t x = 0; x < s.leaf_count(); ++x)
    for (std::size_t y = 0; y < s.leaf_count(); ++y) {
      const auto i = static_cast<Eigen::Index>(s.leaf_ancestor(x, k));
      const auto j = static_cast<Eigen::Index>(s.leaf_ancestor(y, k));
      if (i != j) acc(i, j) += kernel(x, y) * s.mass(K, x) * s.mass(K, y);
    }
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      if (i != j) acc(i, j) /= s.mass(k, static_cast<std::size_t>(i)) * s.mass(k, static_cast<std::size_t>(j));
  return acc;
}

// exp(tQ) f through the symmetrized eigendecomposition of a mu-reversible Q.
inline Eigen::VectorXd expm_oracle(const Eigen::MatrixXd& q, const std::vector<double>& mu, double t,
                                   const Eigen::VectorXd& f) {
  const auto n = q.rows();
  Eigen::VectorXd d(n), dinv(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    d(i) = std::sqrt(mu[static_cast<std::size_t>(i)]);
    dinv(i) = 1.0 / d(i);
  }
  const Eigen::MatrixXd sym = d.asDiagonal() * q * dinv.asDiagonal();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (sym + sym.transpose()));
  const Eigen::VectorXd e = (t * eig.eigenvalues().array()).exp();
  const Eigen::MatrixXd expm = eig.eigenvectors() * e.asDiagonal() * eig.eigenvectors().transpose();
  return dinv.asDiagonal() * (expm * (d.asDiagonal() * f));
}

inline Eigen::VectorXd resolvent_oracle(const Eigen::MatrixXd& q, double lambda, const Eigen::VectorXd& f) {
  const Eigen::MatrixXd a = lambda * Eigen::MatrixXd::Identity(q.rows(), q.cols()) - q;
  return a.fullPivLu().solve(f);
}

inline Eigen::VectorXd vec(const LevelFunction& f) {
  return Eigen::Map<const Eigen::VectorXd>(f.coeffs.data(), static_cast<Eigen::Index>(f.size()));
}

inline LevelFunction func(int level, std::vector<double> c) { return LevelFunction{level, std::move(c)}; }

}  // namespace testing
