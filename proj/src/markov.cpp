#include "ultrajump/markov.hpp"

#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>

#include "ultrajump/error.hpp"

namespace ultrajump {

double GeneratorMatrix::rate(std::size_t i, std::size_t j) const {
  return q.coeff(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
}

double GeneratorMatrix::exit_rate(std::size_t i) const { return -rate(i, i); }

double GeneratorMatrix::max_exit_rate() const {
  double out = 0.0;
  for (std::size_t i = 0; i < size(); ++i) out = std::max(out, exit_rate(i));
  return out;
}

double GeneratorMatrix::min_exit_rate() const {
  double out = size() ? exit_rate(0) : 0.0;
  for (std::size_t i = 0; i < size(); ++i) out = std::min(out, exit_rate(i));
  return out;
}

double GeneratorMatrix::row_sum(std::size_t i) const {
  double off = 0.0;
  double diag = 0.0;
  for (Sparse::InnerIterator it(q, static_cast<Eigen::Index>(i)); it; ++it) {
    if (static_cast<std::size_t>(it.col()) == i) diag = it.value();
    else off += it.value();
  }
  return off + diag;
}

GeneratorMatrix build_generator(const AveragedKernel& rates, const TreeSpace& space) {
  const int k = rates.level;
  const auto n = space.size(k);
  if (rates.rates.rows() != static_cast<Eigen::Index>(n) || rates.rates.cols() != static_cast<Eigen::Index>(n))
    throw Error(ErrorKind::LevelMismatch, "averaged kernel does not match level " + std::to_string(k));
  const auto mu = space.masses(k);

  GeneratorMatrix out;
  out.level = k;
  out.mu.assign(mu.begin(), mu.end());
  std::vector<Eigen::Triplet<double>> triplets;
  for (std::size_t i = 0; i < n; ++i) {
    double exit = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double rate = rates.rates(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) * mu[j];
      if (rate < 0.0 || !std::isfinite(rate))
        throw Error(ErrorKind::NegativeRate, "rate " + std::to_string(rate) + " from ball " + std::to_string(i) +
                                                 " to " + std::to_string(j));
      if (rate == 0.0) continue;
      exit += rate;
      triplets.emplace_back(static_cast<int>(i), static_cast<int>(j), rate);
    }
    triplets.emplace_back(static_cast<int>(i), static_cast<int>(i), -exit);
  }
  out.q.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  out.q.setFromTriplets(triplets.begin(), triplets.end());
  out.q.makeCompressed();
  return out;
}

namespace {

Eigen::Map<const Eigen::VectorXd> as_vector(const LevelFunction& f) {
  return {f.coeffs.data(), static_cast<Eigen::Index>(f.coeffs.size())};
}

LevelFunction from_vector(int level, const Eigen::VectorXd& v) {
  return {level, std::vector<double>(v.data(), v.data() + v.size())};
}

void check_level(const GeneratorMatrix& q, const LevelFunction& f) {
  if (f.level != q.level || f.size() != q.size())
    throw Error(ErrorKind::LevelMismatch, "function at level " + std::to_string(f.level) + " against a level-" +
                                              std::to_string(q.level) + " generator");
}

double l2_distance(const TreeSpace& space, const LevelFunction& a, const LevelFunction& b) {
  const auto mu = space.masses(a.level);
  double total = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) total += (a[i] - b[i]) * (a[i] - b[i]) * mu[i];
  return std::sqrt(total);
}

}  // namespace

LevelFunction semigroup_apply(const GeneratorMatrix& q, double t, const LevelFunction& f) {
  check_level(q, f);
  if (t < 0.0 || !std::isfinite(t)) throw Error(ErrorKind::NegativeTime, "t = " + std::to_string(t));
  const double rate = q.max_exit_rate();
  if (t == 0.0 || rate == 0.0) return f;

  // P = I + Q / rate is stochastic; exp(tQ) = sum_n Poisson(rate t)(n) P^n.
  const double mean = rate * t;
  const double log_mean = std::log(mean);
  const auto max_terms = static_cast<std::size_t>(mean + 40.0 * std::sqrt(mean) + 100.0);
  Eigen::VectorXd power = as_vector(f);
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(power.size());
  double weight_sum = 0.0;
  for (std::size_t n = 0; n <= max_terms; ++n) {
    const double dn = static_cast<double>(n);
    const double w = std::exp(-mean + dn * log_mean - std::lgamma(dn + 1.0));
    acc += w * power;
    weight_sum += w;
    // Past the mode the remaining mass is bounded by the unit complement.
    if (dn > mean && 1.0 - weight_sum < kUniformizationTail) break;
    power += (q.q * power) / rate;
  }
  return from_vector(f.level, acc / weight_sum);
}

LevelFunction resolvent_apply(const GeneratorMatrix& q, double lambda, const LevelFunction& f) {
  check_level(q, f);
  if (!(lambda > 0.0) || !std::isfinite(lambda))
    throw Error(ErrorKind::NonPositiveLambda, "lambda = " + std::to_string(lambda));
  const auto n = static_cast<Eigen::Index>(q.size());
  Eigen::SparseMatrix<double> system(n, n);
  system.setIdentity();
  system *= lambda;
  system -= Eigen::SparseMatrix<double>(q.q);
  system.makeCompressed();

  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  lu.compute(system);
  if (lu.info() != Eigen::Success) throw Error(ErrorKind::SingularSystem, "factorization of lambda I - Q failed");
  const Eigen::VectorXd rhs = as_vector(f);
  const double rhs_norm = rhs.norm();
  Eigen::VectorXd g = lu.solve(rhs);
  if (rhs_norm == 0.0) return from_vector(f.level, g);
  for (int step = 0; step < 3; ++step) {
    const Eigen::VectorXd residual = rhs - system * g;
    if (residual.norm() <= 1e-13 * rhs_norm) break;
    g += lu.solve(residual);
  }
  if (!((rhs - system * g).norm() < 1e-12 * rhs_norm) || !g.allFinite())
    throw Error(ErrorKind::SingularSystem, "resolvent solve did not reach 1e-12 relative residual");
  return from_vector(f.level, g);
}

double commutation_residual(const TreeSpace& space, const GeneratorMatrix& leaf, const GeneratorMatrix& coarse,
                            double t, const LevelFunction& f) {
  if (leaf.level != space.k_max()) throw Error(ErrorKind::LevelMismatch, "first generator must be the leaf chain");
  const int K = space.k_max();
  const auto lhs = semigroup_apply(leaf, t, extend(space, f, K));
  const auto rhs = extend(space, semigroup_apply(coarse, t, f), K);
  return l2_distance(space, lhs, rhs);
}

double commutation_residual(const JumpKernel& kernel, int k, double t, const LevelFunction& f) {
  const auto& space = kernel.space();
  if (!space.in_window(k) || k >= space.k_max())
    throw Error(ErrorKind::LevelOutOfWindow, "commutation needs k_min <= k < K, got " + std::to_string(k));
  return commutation_residual(space, leaf_generator(kernel), level_generator(kernel, k), t, f);
}

double resolvent_intertwine_residual(const TreeSpace& space, const GeneratorMatrix& leaf,
                                     const GeneratorMatrix& coarse, double lambda, const LevelFunction& f) {
  if (leaf.level != space.k_max()) throw Error(ErrorKind::LevelMismatch, "first generator must be the leaf chain");
  const int K = space.k_max();
  const auto lhs = resolvent_apply(leaf, lambda, extend(space, f, K));
  const auto rhs = extend(space, resolvent_apply(coarse, lambda, f), K);
  return l2_distance(space, lhs, rhs);
}

double resolvent_intertwine_residual(const JumpKernel& kernel, int k, double lambda, const LevelFunction& f) {
  const auto& space = kernel.space();
  if (!space.in_window(k) || k >= space.k_max())
    throw Error(ErrorKind::LevelOutOfWindow, "intertwining needs k_min <= k < K, got " + std::to_string(k));
  return resolvent_intertwine_residual(space, leaf_generator(kernel), level_generator(kernel, k), lambda, f);
}

LumpabilityResult lumpability_test(const TreeSpace& space, const GeneratorMatrix& q, int k) {
  if (!space.in_window(k)) throw Error(ErrorKind::LevelOutOfWindow, "lumpability level " + std::to_string(k));
  if (k > q.level) throw Error(ErrorKind::LevelOrderViolation, "cannot lump onto a finer level");
  const auto n = q.size();
  const auto blocks = space.size(k);
  const double tol = 1e-12 * std::max(q.max_exit_rate(), 1e-300);

  // aggregate(x, j) = sum_{y in block j} q(x, y)
  Eigen::MatrixXd aggregate = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(blocks));
  for (std::size_t x = 0; x < n; ++x)
    for (GeneratorMatrix::Sparse::InnerIterator it(q.q, static_cast<Eigen::Index>(x)); it; ++it) {
      if (static_cast<std::size_t>(it.col()) == x) continue;
      aggregate(static_cast<Eigen::Index>(x),
                static_cast<Eigen::Index>(space.ancestor(q.level, static_cast<std::size_t>(it.col()), k))) += it.value();
    }

  LumpabilityResult result;
  std::vector<Eigen::Triplet<double>> triplets;
  for (std::size_t i = 0; i < blocks; ++i) {
    // States of block i at the generator's level.
    std::vector<std::size_t> members;
    for (std::size_t x = 0; x < n; ++x)
      if (space.ancestor(q.level, x, k) == i) members.push_back(x);
    double exit = 0.0;
    for (std::size_t j = 0; j < blocks; ++j) {
      if (i == j) continue;
      const auto ej = static_cast<Eigen::Index>(j);
      const double ref = aggregate(static_cast<Eigen::Index>(members.front()), ej);
      for (auto x : members) {
        const double v = aggregate(static_cast<Eigen::Index>(x), ej);
        if (std::abs(v - ref) > tol) {
          result.witness = LumpWitness{i, j, members.front(), x, ref, v};
          return result;
        }
      }
      if (ref == 0.0) continue;
      exit += ref;
      triplets.emplace_back(static_cast<int>(i), static_cast<int>(j), ref);
    }
    triplets.emplace_back(static_cast<int>(i), static_cast<int>(i), -exit);
  }
  result.lumpable = true;
  GeneratorMatrix lumped;
  lumped.level = k;
  const auto mu = space.masses(k);
  lumped.mu.assign(mu.begin(), mu.end());
  lumped.q.resize(static_cast<Eigen::Index>(blocks), static_cast<Eigen::Index>(blocks));
  lumped.q.setFromTriplets(triplets.begin(), triplets.end());
  lumped.q.makeCompressed();
  result.lumped = std::move(lumped);
  return result;
}

TightnessReport tightness_bound(const JumpKernel& kernel, const LevelFunction& g, int k0) {
  const auto& space = kernel.space();
  if (!space.in_window(k0)) throw Error(ErrorKind::LevelOutOfWindow, "k0 = " + std::to_string(k0));
  const int m = m_of(space, g);
  if (k0 < m)
    throw Error(ErrorKind::K0BelowM, "k0 = " + std::to_string(k0) + " is below m(g) = " + std::to_string(m));
  TightnessReport report;
  report.k0 = k0;
  for (int k = k0; k <= space.k_max(); ++k) {
    const auto rates = average(kernel, k);
    const auto gk = restrict_to(space, g, k);
    const auto mu = space.masses(k);
    double sup = 0.0;
    for (std::size_t i = 0; i < gk.size(); ++i) {
      double total = 0.0;
      for (std::size_t j = 0; j < gk.size(); ++j) {
        if (i == j) continue;
        const double d = gk[i] - gk[j];
        total += d * d * rates.rates(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) * mu[j];
      }
      sup = std::max(sup, total);
    }
    report.levels.push_back(k);
    report.maxima.push_back(sup);
    report.constant = std::max(report.constant, sup);
  }
  return report;
}

}  // namespace ultrajump
