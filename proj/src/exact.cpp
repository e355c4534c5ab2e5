#include "ultrajump/exact.hpp"

#include <boost/multiprecision/cpp_int.hpp>

#include <vector>

#include "ultrajump/error.hpp"

namespace ultrajump {

namespace {

using Rational = boost::multiprecision::cpp_rational;

struct ExactLevels {
  std::vector<Rational> leaf_mass;
  std::vector<Rational> ball_mass;  // at level k
};

ExactLevels exact_masses(const TreeSpace& space, int k) {
  ExactLevels out;
  const auto mu = space.masses(space.k_max());
  for (double m : mu) out.leaf_mass.emplace_back(m);
  out.ball_mass.assign(space.size(k), Rational(0));
  for (std::size_t x = 0; x < mu.size(); ++x) out.ball_mass[space.leaf_ancestor(x, k)] += out.leaf_mass[x];
  return out;
}

}  // namespace

ExactIdentityReport exact_identities(const JumpKernel& kernel, const LevelFunction& u, const LevelFunction& v_leaf) {
  const auto& space = kernel.space();
  const int k = u.level;
  const int K = space.k_max();
  if (u.size() != space.size(k) || v_leaf.level != K || v_leaf.size() != space.leaf_count())
    throw Error(ErrorKind::LevelMismatch, "exact identities need a level-k function and a leaf function");
  const auto masses = exact_masses(space, k);
  const auto n = space.leaf_count();
  const auto nk = space.size(k);

  std::vector<Rational> uk(u.coeffs.begin(), u.coeffs.end());
  std::vector<Rational> ext(n);
  for (std::size_t x = 0; x < n; ++x) ext[x] = uk[space.leaf_ancestor(x, k)];

  std::vector<Rational> jvals(n * n);
  for (std::size_t x = 0; x < n; ++x)
    for (std::size_t y = 0; y < n; ++y)
      if (x != y) jvals[x * n + y] = Rational(kernel(x, y));

  // Leaf energy of the extension.
  Rational leaf_energy = 0;
  for (std::size_t x = 0; x < n; ++x)
    for (std::size_t y = x + 1; y < n; ++y) {
      const Rational d = ext[x] - ext[y];
      if (d != 0) leaf_energy += d * d * jvals[x * n + y] * masses.leaf_mass[x] * masses.leaf_mass[y];
    }

  // Averaged kernel, then the level-k energy.
  std::vector<Rational> block(nk * nk, Rational(0));
  for (std::size_t x = 0; x < n; ++x)
    for (std::size_t y = 0; y < n; ++y) {
      const auto i = space.leaf_ancestor(x, k);
      const auto j = space.leaf_ancestor(y, k);
      if (i != j) block[i * nk + j] += jvals[x * n + y] * masses.leaf_mass[x] * masses.leaf_mass[y];
    }
  Rational level_energy = 0;
  for (std::size_t i = 0; i < nk; ++i)
    for (std::size_t j = i + 1; j < nk; ++j) {
      const Rational d = uk[i] - uk[j];
      const Rational rate = block[i * nk + j] / (masses.ball_mass[i] * masses.ball_mass[j]);
      level_energy += d * d * rate * masses.ball_mass[i] * masses.ball_mass[j];
    }

  auto restrict_exact = [&](const std::vector<Rational>& leaf_values) {
    std::vector<Rational> out(nk, Rational(0));
    for (std::size_t x = 0; x < n; ++x) out[space.leaf_ancestor(x, k)] += leaf_values[x] * masses.leaf_mass[x];
    for (std::size_t i = 0; i < nk; ++i) out[i] /= masses.ball_mass[i];
    return out;
  };

  ExactIdentityReport report;
  report.isometry = leaf_energy == level_energy;

  std::vector<Rational> v(v_leaf.coeffs.begin(), v_leaf.coeffs.end());
  const auto pv = restrict_exact(v);
  Rational lhs = 0, rhs = 0;
  for (std::size_t i = 0; i < nk; ++i) lhs += pv[i] * uk[i] * masses.ball_mass[i];
  for (std::size_t x = 0; x < n; ++x) rhs += v[x] * ext[x] * masses.leaf_mass[x];
  report.adjoint = lhs == rhs;

  report.restrict_extend = restrict_exact(ext) == uk;

  const auto pw = restrict_exact(ext);
  Rational coarse_norm = 0, leaf_norm = 0;
  for (std::size_t i = 0; i < nk; ++i) coarse_norm += pw[i] * pw[i] * masses.ball_mass[i];
  for (std::size_t x = 0; x < n; ++x) leaf_norm += ext[x] * ext[x] * masses.leaf_mass[x];
  report.norm_preserved = coarse_norm == leaf_norm;
  return report;
}

}  // namespace ultrajump
