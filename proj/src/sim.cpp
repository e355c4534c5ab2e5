#include "ultrajump/sim.hpp"

#include <algorithm>
#include <cstdlib>
#include <functional>
#include <numeric>
#include <string>
#include <thread>

#include "ultrajump/error.hpp"
#include "ultrajump/stats.hpp"

namespace ultrajump {

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream, std::uint64_t index) {
  auto mix = [](std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  };
  return mix(mix(mix(master) ^ stream) ^ index);
}

unsigned worker_count() {
  unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("ULTRAJUMP_THREADS")) {
    try {
      const long cap = std::stol(env);
      if (cap >= 1) return static_cast<unsigned>(std::min<long>(cap, 256));
    } catch (const std::exception&) {
    }
  }
  return hw;
}

namespace {

// Runs body(worker, begin, end) over contiguous chunks of [0, n).
void parallel_chunks(std::size_t n, unsigned workers, const std::function<void(unsigned, std::size_t, std::size_t)>& body) {
  workers = static_cast<unsigned>(std::max<std::size_t>(1, std::min<std::size_t>(workers, n)));
  if (workers == 1) {
    body(0, 0, n);
    return;
  }
  std::vector<std::jthread> pool;
  const std::size_t chunk = (n + workers - 1) / workers;
  for (unsigned w = 0; w < workers; ++w) {
    const std::size_t begin = std::min(n, w * chunk);
    const std::size_t end = std::min(n, begin + chunk);
    pool.emplace_back([&body, w, begin, end] { body(w, begin, end); });
  }
}

std::size_t sample_categorical(const std::vector<double>& weights, double total, Rng& rng) {
  const double target = rng.uniform() * total;
  double acc = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] <= 0.0) continue;
    acc += weights[i];
    last_positive = i;
    if (target < acc) return i;
  }
  return last_positive;
}

}  // namespace

std::size_t PathSample::state_at(double t) const {
  auto it = std::upper_bound(events.begin(), events.end(), t,
                             [](double value, const Event& e) { return value < e.time; });
  return it == events.begin() ? initial : std::prev(it)->state;
}

PathSample sample_path(const GeneratorMatrix& q, std::size_t x0, double horizon, Rng& rng) {
  if (!(horizon > 0.0) || !std::isfinite(horizon))
    throw Error(ErrorKind::NonPositiveHorizon, "horizon = " + std::to_string(horizon));
  if (x0 >= q.size()) throw Error(ErrorKind::LevelMismatch, "initial state out of range");
  PathSample path;
  path.level = q.level;
  path.initial = x0;
  path.horizon = horizon;
  std::size_t x = x0;
  double t = 0.0;
  for (;;) {
    const double exit = q.exit_rate(x);
    if (exit <= 0.0) {
      path.absorbed = true;
      break;
    }
    t += rng.exponential(exit);
    if (t > horizon) break;
    const double target = rng.uniform() * exit;
    double acc = 0.0;
    std::size_t next = x;
    for (GeneratorMatrix::Sparse::InnerIterator it(q.q, static_cast<Eigen::Index>(x)); it; ++it) {
      if (static_cast<std::size_t>(it.col()) == x) continue;
      acc += it.value();
      next = static_cast<std::size_t>(it.col());
      if (target < acc) break;
    }
    x = next;
    path.events.push_back({t, x});
  }
  return path;
}

PathSample sample_path(const GeneratorMatrix& q, std::size_t x0, double horizon, std::uint64_t seed) {
  Rng rng(seed);
  return sample_path(q, x0, horizon, rng);
}

namespace {

void check_density(const TreeSpace& space, const LevelFunction& psi) {
  if (psi.level != space.k_max() || psi.size() != space.leaf_count())
    throw Error(ErrorKind::LevelMismatch, "initial density must be a leaf function");
  double mass = 0.0;
  for (std::size_t x = 0; x < psi.size(); ++x) {
    if (!(psi[x] >= 0.0) || !std::isfinite(psi[x]))
      throw Error(ErrorKind::ZeroDensity, "initial density must be finite and non-negative");
    mass += psi[x] * space.mass(space.k_max(), x);
  }
  if (!(mass > 0.0)) throw Error(ErrorKind::ZeroDensity, "initial density has zero mass");
}

}  // namespace

std::vector<double> initial_law(const TreeSpace& space, const LevelFunction& psi, int level) {
  check_density(space, psi);
  const auto psi_k = restrict_to(space, psi, level);
  const auto mu = space.masses(level);
  std::vector<double> law(psi_k.size());
  for (std::size_t i = 0; i < law.size(); ++i) law[i] = psi_k[i] * mu[i];
  const double total = std::accumulate(law.begin(), law.end(), 0.0);
  for (auto& p : law) p /= total;
  return law;
}

std::size_t sample_initial(const TreeSpace& space, const LevelFunction& psi, int level, Rng& rng) {
  check_density(space, psi);
  const auto psi_k = restrict_to(space, psi, level);
  const auto mu = space.masses(level);
  std::vector<double> weights(psi_k.size());
  for (std::size_t i = 0; i < weights.size(); ++i) weights[i] = psi_k[i] * mu[i];
  return sample_categorical(weights, std::accumulate(weights.begin(), weights.end(), 0.0), rng);
}

std::size_t sample_initial_two_step(const TreeSpace& space, const LevelFunction& psi, int level, Rng& rng) {
  check_density(space, psi);
  const auto mu = space.masses(space.k_max());
  std::vector<double> weights(psi.size());
  for (std::size_t x = 0; x < weights.size(); ++x) weights[x] = psi[x] * mu[x];
  const auto leaf = sample_categorical(weights, std::accumulate(weights.begin(), weights.end(), 0.0), rng);
  return space.leaf_ancestor(leaf, level);
}

PathSample project_path(const TreeSpace& space, const PathSample& path, int k) {
  if (!space.in_window(k)) throw Error(ErrorKind::LevelOutOfWindow, "project_path level " + std::to_string(k));
  if (k > path.level)
    throw Error(ErrorKind::LevelOrderViolation, "cannot project a level-" + std::to_string(path.level) +
                                                    " path to level " + std::to_string(k));
  PathSample out;
  out.level = k;
  out.horizon = path.horizon;
  out.absorbed = path.absorbed;
  out.initial = space.ancestor(path.level, path.initial, k);
  std::size_t current = out.initial;
  for (const auto& e : path.events) {
    const auto s = space.ancestor(path.level, e.state, k);
    if (s == current) continue;
    out.events.push_back({e.time, s});
    current = s;
  }
  return out;
}

double path_sup_distance(const TreeSpace& space, const PathSample& path, const QuotientLevel& section) {
  if (path.level != space.k_max()) throw Error(ErrorKind::LevelMismatch, "sup distance needs a leaf path");
  const int k = section.level;
  auto gap = [&](std::size_t leaf) { return space.distance(section.section[space.leaf_ancestor(leaf, k)], leaf); };
  double sup = gap(path.initial);
  for (const auto& e : path.events) sup = std::max(sup, gap(e.state));
  return sup;
}

double path_sup_distance(const TreeSpace& space, const PathSample& path, int k) {
  return path_sup_distance(space, path, enumerate_level(space, k));
}

ComparisonReport fdd_compare(const JumpKernel& kernel, const LevelFunction& psi, int k,
                             const std::vector<double>& grid, std::size_t n_paths, std::uint64_t seed,
                             double sigma_band) {
  const auto& space = kernel.space();
  if (!space.in_window(k) || k >= space.k_max())
    throw Error(ErrorKind::LevelOutOfWindow, "fdd_compare needs k_min <= k < K, got " + std::to_string(k));
  if (n_paths < 1000)
    throw Error(ErrorKind::InsufficientSamples, "fdd_compare needs at least 1000 paths, got " + std::to_string(n_paths));
  if (grid.empty()) throw Error(ErrorKind::InsufficientSamples, "empty time grid");
  for (double t : grid)
    if (!(t > 0.0) || !std::isfinite(t)) throw Error(ErrorKind::NonPositiveHorizon, "grid times must be positive");
  check_density(space, psi);
  const double horizon = *std::max_element(grid.begin(), grid.end());

  const auto coarse = level_generator(kernel, k);
  const auto leaf = leaf_generator(kernel);
  const auto nk = space.size(k);
  const auto nt = grid.size();

  ComparisonReport report;
  report.level = k;
  report.n_paths = n_paths;
  report.seed = seed;
  report.sigma_band = sigma_band;
  report.bc_holds = detect_bc(kernel, k).holds;

  // Per-worker tallies; integer counts make the reduction order irrelevant.
  const unsigned workers = worker_count();
  using Table = std::vector<std::vector<std::uint64_t>>;
  std::vector<Table> coarse_counts(workers, Table(nt, std::vector<std::uint64_t>(nk, 0)));
  std::vector<Table> leaf_counts(workers, Table(nt, std::vector<std::uint64_t>(nk, 0)));
  std::vector<std::uint64_t> coarse_jumps(workers, 0), leaf_jumps(workers, 0);

  parallel_chunks(n_paths, workers, [&](unsigned w, std::size_t begin, std::size_t end) {
    for (std::size_t p = begin; p < end; ++p) {
      Rng rc(derive_seed(seed, 1, p));
      const auto x0 = sample_initial(space, psi, k, rc);
      const auto path = sample_path(coarse, x0, horizon, rc);
      coarse_jumps[w] += path.jump_count();
      for (std::size_t ti = 0; ti < nt; ++ti) ++coarse_counts[w][ti][path.state_at(grid[ti])];

      Rng rl(derive_seed(seed, 2, p));
      const auto y0 = sample_initial(space, psi, space.k_max(), rl);
      const auto leaf_path = sample_path(leaf, y0, horizon, rl);
      leaf_jumps[w] += leaf_path.jump_count();
      for (std::size_t ti = 0; ti < nt; ++ti)
        ++leaf_counts[w][ti][space.leaf_ancestor(leaf_path.state_at(grid[ti]), k)];
    }
  });

  // Law of X^k_t: by mu-symmetry, pi_t(j) = mu(j) (P_t h)(j) with h the
  // initial density psi^k / mu^k(psi^k).
  const auto law0 = initial_law(space, psi, k);
  const auto mu = space.masses(k);
  LevelFunction density{k, std::vector<double>(nk)};
  for (std::size_t i = 0; i < nk; ++i) density[i] = law0[i] / mu[i];

  report.chi_square_pass = true;
  report.coarse_marginals_pass = true;
  report.projected_marginals_pass = true;
  const double per_test_alpha = report.alpha / static_cast<double>(nt);
  for (std::size_t ti = 0; ti < nt; ++ti) {
    TimeComparison row;
    row.time = grid[ti];
    row.coarse_counts.assign(nk, 0);
    row.projected_counts.assign(nk, 0);
    for (unsigned w = 0; w < workers; ++w)
      for (std::size_t i = 0; i < nk; ++i) {
        row.coarse_counts[i] += coarse_counts[w][ti][i];
        row.projected_counts[i] += leaf_counts[w][ti][i];
      }
    const auto evolved = semigroup_apply(coarse, grid[ti], density);
    row.exact.resize(nk);
    for (std::size_t i = 0; i < nk; ++i) row.exact[i] = mu[i] * evolved[i];
    const auto chi = chi_square_two_sample(row.coarse_counts, row.projected_counts);
    row.statistic = chi.statistic;
    row.dof = chi.dof;
    row.p_value = chi.p_value;
    row.coarse_sigma = max_multinomial_sigma(row.coarse_counts, row.exact);
    row.projected_sigma = max_multinomial_sigma(row.projected_counts, row.exact);
    report.chi_square_pass = report.chi_square_pass && row.p_value >= per_test_alpha;
    report.coarse_marginals_pass = report.coarse_marginals_pass && row.coarse_sigma <= sigma_band;
    report.projected_marginals_pass = report.projected_marginals_pass && row.projected_sigma <= sigma_band;
    report.times.push_back(std::move(row));
  }
  report.mean_coarse_jumps = static_cast<double>(std::accumulate(coarse_jumps.begin(), coarse_jumps.end(), std::uint64_t{0})) /
                             static_cast<double>(n_paths);
  report.mean_leaf_jumps = static_cast<double>(std::accumulate(leaf_jumps.begin(), leaf_jumps.end(), std::uint64_t{0})) /
                           static_cast<double>(n_paths);
  return report;
}

EnsembleStats leaf_ensemble(const JumpKernel& kernel, const LevelFunction& psi, double horizon,
                            std::size_t n_paths, std::uint64_t seed) {
  const auto& space = kernel.space();
  check_density(space, psi);
  const auto leaf = leaf_generator(kernel);
  const int levels = space.k_max() - space.k_min() + 1;
  std::vector<QuotientLevel> sections;
  for (int k = space.k_min(); k <= space.k_max(); ++k) sections.push_back(enumerate_level(space, k));

  const unsigned workers = worker_count();
  struct Tally {
    std::uint64_t jumps = 0;
    std::size_t max_jumps = 0;
    std::size_t absorbed = 0;
    std::size_t violations = 0;
    std::vector<double> ratio;
  };
  std::vector<Tally> tallies(workers);
  for (auto& t : tallies) t.ratio.assign(static_cast<std::size_t>(levels), 0.0);

  parallel_chunks(n_paths, workers, [&](unsigned w, std::size_t begin, std::size_t end) {
    auto& tally = tallies[w];
    for (std::size_t p = begin; p < end; ++p) {
      Rng rng(derive_seed(seed, 3, p));
      const auto x0 = sample_initial(space, psi, space.k_max(), rng);
      const auto path = sample_path(leaf, x0, horizon, rng);
      tally.jumps += path.jump_count();
      tally.max_jumps = std::max(tally.max_jumps, path.jump_count());
      tally.absorbed += path.absorbed ? 1 : 0;
      for (int l = 0; l < levels; ++l) {
        const int k = space.k_min() + l;
        const double sup = path_sup_distance(space, path, sections[static_cast<std::size_t>(l)]);
        const double bound = space.radius(k);
        if (sup > bound) ++tally.violations;
        tally.ratio[static_cast<std::size_t>(l)] = std::max(tally.ratio[static_cast<std::size_t>(l)], sup / bound);
      }
    }
  });

  EnsembleStats stats;
  stats.n_paths = n_paths;
  stats.horizon = horizon;
  stats.min_exit_rate = leaf.min_exit_rate();
  stats.max_exit_rate = leaf.max_exit_rate();
  stats.envelope_ratio.assign(static_cast<std::size_t>(levels), 0.0);
  std::uint64_t jumps = 0;
  for (const auto& t : tallies) {
    jumps += t.jumps;
    stats.max_jumps = std::max(stats.max_jumps, t.max_jumps);
    stats.absorbed += t.absorbed;
    stats.envelope_violations += t.violations;
    for (int l = 0; l < levels; ++l)
      stats.envelope_ratio[static_cast<std::size_t>(l)] =
          std::max(stats.envelope_ratio[static_cast<std::size_t>(l)], t.ratio[static_cast<std::size_t>(l)]);
  }
  stats.mean_jumps = static_cast<double>(jumps) / static_cast<double>(std::max<std::size_t>(n_paths, 1));
  return stats;
}

}  // namespace ultrajump
