#pragma once

#include <cstddef>
#include <vector>

#include "ultrajump/kernel.hpp"
#include "ultrajump/space.hpp"

namespace ultrajump {

/// Real coefficients indexed by the canonical order of the balls of one level.
/// At level K this is a leaf function, i.e. an element of D_0 at resolution K.
struct LevelFunction {
  int level = 0;
  std::vector<double> coeffs;

  std::size_t size() const { return coeffs.size(); }
  double operator[](std::size_t i) const { return coeffs[i]; }
  double& operator[](std::size_t i) { return coeffs[i]; }
};

LevelFunction constant_function(const TreeSpace& space, int level, double value);
LevelFunction indicator(const TreeSpace& space, int level, std::size_t ball);

/// <u, v>_k = sum_i u(i) v(i) mu^k(i).
double inner(const TreeSpace& space, const LevelFunction& u, const LevelFunction& v);
double norm(const TreeSpace& space, const LevelFunction& u);

/// Extension E: every ball at level `to` takes the value of its ancestor.
LevelFunction extend(const TreeSpace& space, const LevelFunction& u, int to);

/// Restriction Pi: mu-weighted mean over descendants at the finer level.
LevelFunction restrict_to(const TreeSpace& space, const LevelFunction& u, int to);

/// 1/2 sum_{i != j} (u(i) - u(j)) (v(i) - v(j)) J(i, j) mu(i) mu(j) over the
/// kernel's level. Pass average(J, K) for the leaf form.
double energy(const TreeSpace& space, const AveragedKernel& rates, const LevelFunction& u, const LevelFunction& v);

/// E(u, v) + lambda <u, v>.
double energy_lambda(const TreeSpace& space, const AveragedKernel& rates, double lambda, const LevelFunction& u,
                     const LevelFunction& v);

/// Least window level on whose balls the leaf function is constant.
int m_of(const TreeSpace& space, const LevelFunction& u);

}  // namespace ultrajump
