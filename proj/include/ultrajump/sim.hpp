#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "ultrajump/forms.hpp"
#include "ultrajump/kernel.hpp"
#include "ultrajump/markov.hpp"
#include "ultrajump/space.hpp"

namespace ultrajump {

/// Engine for all sampling. Draws are turned into variates by explicit
/// inverse transforms so results do not depend on the standard library's
/// distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  /// Uniform on [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double exponential(double rate) { return -std::log1p(-uniform()) / rate; }
  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

/// Seed of path `index` in stream `stream` under a master seed (SplitMix64
/// finalizer over a counter), so ensembles can be split across workers.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream, std::uint64_t index);

/// Worker count from ULTRAJUMP_THREADS, else the hardware concurrency.
unsigned worker_count();

/// Right-continuous step path: `initial` on [0, t_1), then events[i].state
/// from events[i].time on.
struct PathSample {
  struct Event {
    double time = 0.0;
    std::size_t state = 0;
    bool operator==(const Event&) const = default;
  };

  int level = 0;
  std::size_t initial = 0;
  std::vector<Event> events;
  double horizon = 0.0;
  /// True when the path reached a state with zero exit rate before the horizon.
  bool absorbed = false;

  std::size_t state_at(double t) const;
  std::size_t jump_count() const { return events.size(); }
};

PathSample sample_path(const GeneratorMatrix& q, std::size_t x0, double horizon, Rng& rng);
PathSample sample_path(const GeneratorMatrix& q, std::size_t x0, double horizon, std::uint64_t seed);

/// Draws ball i of `level` with probability psi^k(i) mu^k(i) / mu^k(psi^k),
/// psi^k the restriction of the leaf density psi.
std::size_t sample_initial(const TreeSpace& space, const LevelFunction& psi, int level, Rng& rng);
/// Same law, drawn as a leaf by psi mu and then projected.
std::size_t sample_initial_two_step(const TreeSpace& space, const LevelFunction& psi, int level, Rng& rng);
/// Exact probabilities of sample_initial.
std::vector<double> initial_law(const TreeSpace& space, const LevelFunction& psi, int level);

/// pi^k applied to a path; jumps inside a level-k ball disappear.
PathSample project_path(const TreeSpace& space, const PathSample& path, int k);

/// sup_t rho(I^k(pi^k X_t), X_t) for a leaf path, with the canonical section
/// or the one given.
double path_sup_distance(const TreeSpace& space, const PathSample& path, int k);
double path_sup_distance(const TreeSpace& space, const PathSample& path, const QuotientLevel& section);

struct TimeComparison {
  double time = 0.0;
  std::vector<std::uint64_t> coarse_counts;     // X^k
  std::vector<std::uint64_t> projected_counts;  // pi^k X^K
  std::vector<double> exact;                    // law of X^k_t from psi^k
  double statistic = 0.0;
  int dof = 0;
  double p_value = 1.0;
  double coarse_sigma = 0.0;     // max multinomial deviation against `exact`
  double projected_sigma = 0.0;
};

struct ComparisonReport {
  int level = 0;
  std::size_t n_paths = 0;
  std::uint64_t seed = 0;
  double alpha = 0.01;
  double sigma_band = 4.0;
  bool bc_holds = false;
  std::vector<TimeComparison> times;
  bool chi_square_pass = false;        // min p >= alpha / #times
  bool coarse_marginals_pass = false;  // every coarse sigma <= band
  bool projected_marginals_pass = false;
  double mean_coarse_jumps = 0.0;
  double mean_leaf_jumps = 0.0;
};

/// Simulates n_paths of X^k from psi^k and n_paths of the leaf chain from psi
/// projected to level k, compares occupancies at each grid time by a
/// two-sample chi-square test (Bonferroni at alpha) and both ensembles
/// against the exact semigroup marginal.
ComparisonReport fdd_compare(const JumpKernel& kernel, const LevelFunction& psi, int k,
                             const std::vector<double>& grid, std::size_t n_paths, std::uint64_t seed,
                             double sigma_band = 4.0);

struct EnsembleStats {
  std::size_t n_paths = 0;
  double horizon = 0.0;
  double mean_jumps = 0.0;
  std::size_t max_jumps = 0;
  std::size_t absorbed = 0;
  double min_exit_rate = 0.0;
  double max_exit_rate = 0.0;
  /// Largest sup-distance per level over all paths, divided by q^{-k}.
  std::vector<double> envelope_ratio;
  std::size_t envelope_violations = 0;
};

/// Leaf-chain ensemble from psi: jump counts, absorption and the pathwise
/// envelope sup_t rho(pi^k X_t, X_t) <= q^{-k} at every window level.
EnsembleStats leaf_ensemble(const JumpKernel& kernel, const LevelFunction& psi, double horizon,
                            std::size_t n_paths, std::uint64_t seed);

}  // namespace ultrajump
