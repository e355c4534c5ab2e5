#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace ultrajump {

/// Separation index of a point with itself.
inline constexpr int kInfiniteSeparation = std::numeric_limits<int>::max();

/// Construction parameters for a truncated tree.
///
/// Levels run from `k_min` (a single root ball) to `k_max` (the leaves). A
/// node at level m has digit word (d_{k_min+1}, ..., d_m). Child counts are
/// resolved per node: an entry in `node_branching` wins, then
/// `level_branching[m - k_min]`, then `default_branching`. Child mass
/// fractions default to uniform.
struct SpaceConfig {
  double q = 2.0;
  int k_min = 0;
  int k_max = 0;
  std::uint32_t default_branching = 2;
  std::vector<std::uint32_t> level_branching;
  std::map<std::string, std::uint32_t> node_branching;
  std::map<std::string, std::vector<double>> node_weights;
  double root_mass = 1.0;

  /// p children everywhere, uniform weights, every level-0 ball of mass 1.
  static SpaceConfig padic(std::uint32_t p, int k_min, int k_max);
};

/// A ball of the truncated tree, named by its level and digit word.
struct BallAddress {
  std::uint64_t space_id = 0;
  int level = 0;
  std::vector<std::uint32_t> digits;

  bool operator==(const BallAddress&) const = default;
};

/// Digit words render as one base-36 character per digit ("01", "2a"); words
/// containing a digit >= 36 are written dot-separated ("3.40.1").
std::string format_word(std::span<const std::uint32_t> digits);
std::vector<std::uint32_t> parse_word(const std::string& word);

struct IndexRange {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t size() const { return end - begin; }
};

/// Truncated ultrametric space: leaves of a finite multibranching tree with a
/// measure that is additive over the ball decomposition.
///
/// Balls of each level are stored in lexicographic digit order, so the
/// children of a node and the leaves below it occupy contiguous index ranges.
/// Instances are immutable after construction.
class TreeSpace {
 public:
  static std::shared_ptr<const TreeSpace> build(const SpaceConfig& config);

  std::uint64_t id() const { return id_; }
  double q() const { return q_; }
  int k_min() const { return k_min_; }
  int k_max() const { return k_max_; }
  bool in_window(int level) const { return level >= k_min_ && level <= k_max_; }

  std::size_t size(int level) const;
  std::size_t leaf_count() const { return size(k_max_); }

  double mass(int level, std::size_t ball) const;
  std::span<const double> masses(int level) const;
  double total_mass() const { return mass(k_min_, 0); }

  std::size_t parent(int level, std::size_t ball) const;
  IndexRange children(int level, std::size_t ball) const;
  IndexRange leaves(int level, std::size_t ball) const;
  std::uint32_t digit(int level, std::size_t ball) const;

  /// Level-k ancestor of a ball at level `from` (k <= from).
  std::size_t ancestor(int from, std::size_t ball, int k) const;
  std::size_t leaf_ancestor(std::size_t leaf, int k) const;

  BallAddress address(int level, std::size_t ball) const;
  std::size_t index_of(const BallAddress& address) const;

  /// Smallest digit position where two leaves differ; kInfiniteSeparation
  /// for equal leaves.
  int separation_index(std::size_t x, std::size_t y) const;
  int separation_index(const BallAddress& x, const BallAddress& y) const;

  /// rho = q^{-r}.
  double distance(std::size_t x, std::size_t y) const;
  double radius(int level) const;

  /// Level-k ball containing the leaf `x`, as an address (the projection pi^k).
  BallAddress project(const BallAddress& x, int k) const;

  /// Configured child count for a word at a level, before construction.
  const SpaceConfig& config() const { return config_; }

 private:
  struct Level {
    std::vector<std::size_t> parent;
    std::vector<std::size_t> first_child;
    std::vector<std::uint32_t> child_count;
    std::vector<std::uint32_t> digit;
    std::vector<double> mass;
    std::vector<std::size_t> leaf_begin;
    std::vector<std::size_t> leaf_end;
  };

  TreeSpace() = default;
  const Level& level_data(int level) const;
  void check_level(int level) const;

  std::uint64_t id_ = 0;
  double q_ = 2.0;
  int k_min_ = 0;
  int k_max_ = 0;
  std::vector<Level> levels_;
  // leaf_ancestors_[k - k_min][leaf]
  std::vector<std::vector<std::size_t>> leaf_ancestors_;
  SpaceConfig config_;
};

using SpacePtr = std::shared_ptr<const TreeSpace>;

inline SpacePtr build_space(const SpaceConfig& config) { return TreeSpace::build(config); }

/// The quotient S^k together with a section I^k: one chosen leaf per ball.
struct QuotientLevel {
  int level = 0;
  std::vector<BallAddress> members;
  std::vector<std::size_t> section;
};

/// Canonical section: the all-zero-digit extension of each ball.
QuotientLevel enumerate_level(const TreeSpace& space, int k);

/// A uniformly random admissible section, for section-independence checks.
QuotientLevel enumerate_level(const TreeSpace& space, int k, std::mt19937_64& rng);

}  // namespace ultrajump
