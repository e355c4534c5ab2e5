#include "ultrajump/forms.hpp"

#include <cmath>

#include "ultrajump/error.hpp"

namespace ultrajump {

namespace {

void check_function(const TreeSpace& space, const LevelFunction& u) {
  if (!space.in_window(u.level))
    throw Error(ErrorKind::LevelOutOfWindow, "function level " + std::to_string(u.level) + " outside window");
  if (u.coeffs.size() != space.size(u.level))
    throw Error(ErrorKind::LevelMismatch, "function has " + std::to_string(u.coeffs.size()) + " coefficients, level " +
                                              std::to_string(u.level) + " has " + std::to_string(space.size(u.level)) +
                                              " balls");
}

}  // namespace

LevelFunction constant_function(const TreeSpace& space, int level, double value) {
  return {level, std::vector<double>(space.size(level), value)};
}

LevelFunction indicator(const TreeSpace& space, int level, std::size_t ball) {
  auto u = constant_function(space, level, 0.0);
  u.coeffs.at(ball) = 1.0;
  return u;
}

double inner(const TreeSpace& space, const LevelFunction& u, const LevelFunction& v) {
  check_function(space, u);
  check_function(space, v);
  if (u.level != v.level) throw Error(ErrorKind::LevelMismatch, "inner product across levels");
  const auto mu = space.masses(u.level);
  double total = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) total += u[i] * v[i] * mu[i];
  return total;
}

double norm(const TreeSpace& space, const LevelFunction& u) { return std::sqrt(inner(space, u, u)); }

LevelFunction extend(const TreeSpace& space, const LevelFunction& u, int to) {
  check_function(space, u);
  if (!space.in_window(to)) throw Error(ErrorKind::LevelOutOfWindow, "extend target " + std::to_string(to));
  if (to < u.level)
    throw Error(ErrorKind::LevelOrderViolation,
                "extend goes to finer levels, got " + std::to_string(u.level) + " -> " + std::to_string(to));
  LevelFunction out{to, std::vector<double>(space.size(to))};
  for (std::size_t b = 0; b < out.size(); ++b) out[b] = u[space.ancestor(to, b, u.level)];
  return out;
}

LevelFunction restrict_to(const TreeSpace& space, const LevelFunction& u, int to) {
  check_function(space, u);
  if (!space.in_window(to)) throw Error(ErrorKind::LevelOutOfWindow, "restrict target " + std::to_string(to));
  if (to > u.level)
    throw Error(ErrorKind::LevelOrderViolation,
                "restrict goes to coarser levels, got " + std::to_string(u.level) + " -> " + std::to_string(to));
  if (to == u.level) return u;
  const auto mu = space.masses(u.level);
  LevelFunction out{to, std::vector<double>(space.size(to), 0.0)};
  // Descendants of a level-`to` ball are contiguous at every finer level.
  std::size_t b = 0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    double total = 0.0;
    const auto first = b;
    bool constant = true;
    const auto ball = space.leaves(to, i);
    for (; b < u.size() && space.leaves(u.level, b).end <= ball.end; ++b) {
      total += u[b] * mu[b];
      constant = constant && u[b] == u[first];
    }
    out[i] = constant ? u[first] : total / space.mass(to, i);
  }
  return out;
}

double energy(const TreeSpace& space, const AveragedKernel& rates, const LevelFunction& u, const LevelFunction& v) {
  check_function(space, u);
  check_function(space, v);
  if (u.level != rates.level || v.level != rates.level)
    throw Error(ErrorKind::LevelMismatch, "energy: functions at levels " + std::to_string(u.level) + ", " +
                                              std::to_string(v.level) + " against a level-" +
                                              std::to_string(rates.level) + " kernel");
  const auto mu = space.masses(u.level);
  const auto n = u.size();
  // Sum over unordered pairs: the ordered sum carries a factor 1/2.
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double row = 0.0;
    for (std::size_t j = i + 1; j < n; ++j)
      row += (u[i] - u[j]) * (v[i] - v[j]) * rates.rates(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) *
             mu[j];
    total += row * mu[i];
  }
  return total;
}

double energy_lambda(const TreeSpace& space, const AveragedKernel& rates, double lambda, const LevelFunction& u,
                     const LevelFunction& v) {
  return energy(space, rates, u, v) + lambda * inner(space, u, v);
}

int m_of(const TreeSpace& space, const LevelFunction& u) {
  check_function(space, u);
  if (u.level != space.k_max()) throw Error(ErrorKind::LevelMismatch, "m(u) is defined for leaf functions");
  for (int k = space.k_min(); k < space.k_max(); ++k) {
    bool constant = true;
    for (std::size_t b = 0; b < space.size(k) && constant; ++b) {
      const auto range = space.leaves(k, b);
      for (auto x = range.begin + 1; x < range.end && constant; ++x) constant = u[x] == u[range.begin];
    }
    if (constant) return k;
  }
  return space.k_max();
}

}  // namespace ultrajump
