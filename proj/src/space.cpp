#include "ultrajump/space.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <sstream>

#include "ultrajump/error.hpp"

namespace ultrajump {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::NonPositiveMass: return "NonPositiveMass";
    case ErrorKind::InconsistentWeights: return "InconsistentWeights";
    case ErrorKind::EmptyWindow: return "EmptyWindow";
    case ErrorKind::MixedSpaces: return "MixedSpaces";
    case ErrorKind::LevelOutOfWindow: return "LevelOutOfWindow";
    case ErrorKind::DiagonalQuery: return "DiagonalQuery";
    case ErrorKind::NonMonotoneLambda: return "NonMonotoneLambda";
    case ErrorKind::AsymmetricKernel: return "AsymmetricKernel";
    case ErrorKind::ComponentCountMismatch: return "ComponentCountMismatch";
    case ErrorKind::InconsistentGamma: return "InconsistentGamma";
    case ErrorKind::LevelOrderViolation: return "LevelOrderViolation";
    case ErrorKind::LevelMismatch: return "LevelMismatch";
    case ErrorKind::NegativeRate: return "NegativeRate";
    case ErrorKind::NegativeTime: return "NegativeTime";
    case ErrorKind::NonPositiveLambda: return "NonPositiveLambda";
    case ErrorKind::SingularSystem: return "SingularSystem";
    case ErrorKind::K0BelowM: return "K0BelowM";
    case ErrorKind::NonPositiveHorizon: return "NonPositiveHorizon";
    case ErrorKind::ZeroDensity: return "ZeroDensity";
    case ErrorKind::InsufficientSamples: return "InsufficientSamples";
    case ErrorKind::ConfigParseError: return "ConfigParseError";
  }
  return "Unknown";
}

namespace {

std::atomic<std::uint64_t> next_space_id{1};

constexpr char kDigitChars[] = "0123456789abcdefghijklmnopqrstuvwxyz";

}  // namespace

SpaceConfig SpaceConfig::padic(std::uint32_t p, int k_min, int k_max) {
  SpaceConfig config;
  config.q = static_cast<double>(p);
  config.k_min = k_min;
  config.k_max = k_max;
  config.default_branching = p;
  config.root_mass = std::pow(static_cast<double>(p), -static_cast<double>(k_min));
  return config;
}

std::string format_word(std::span<const std::uint32_t> digits) {
  const bool compact = std::all_of(digits.begin(), digits.end(), [](auto d) { return d < 36; });
  std::string out;
  if (compact) {
    for (auto d : digits) out.push_back(kDigitChars[d]);
    return out;
  }
  for (std::size_t i = 0; i < digits.size(); ++i) {
    if (i) out.push_back('.');
    out += std::to_string(digits[i]);
  }
  return out;
}

std::vector<std::uint32_t> parse_word(const std::string& word) {
  std::vector<std::uint32_t> digits;
  if (word.find('.') != std::string::npos) {
    std::stringstream in(word);
    std::string part;
    while (std::getline(in, part, '.')) {
      if (part.empty() || !std::all_of(part.begin(), part.end(), ::isdigit))
        throw Error(ErrorKind::ConfigParseError, "bad digit word '" + word + "'");
      digits.push_back(static_cast<std::uint32_t>(std::stoul(part)));
    }
    return digits;
  }
  for (char c : word) {
    if (c >= '0' && c <= '9') digits.push_back(static_cast<std::uint32_t>(c - '0'));
    else if (c >= 'a' && c <= 'z') digits.push_back(static_cast<std::uint32_t>(c - 'a' + 10));
    else throw Error(ErrorKind::ConfigParseError, "bad digit word '" + word + "'");
  }
  return digits;
}

SpacePtr TreeSpace::build(const SpaceConfig& config) {
  if (config.k_min >= config.k_max)
    throw Error(ErrorKind::EmptyWindow, "window [" + std::to_string(config.k_min) + ", " +
                                            std::to_string(config.k_max) + "] has no leaves below the root");
  if (!(config.q > 1.0) || !std::isfinite(config.q))
    throw Error(ErrorKind::ConfigParseError, "base q must be a finite real > 1");
  if (!(config.root_mass > 0.0) || !std::isfinite(config.root_mass))
    throw Error(ErrorKind::NonPositiveMass, "root mass must be positive and finite");
  const int depth = config.k_max - config.k_min;
  if (!config.level_branching.empty() && config.level_branching.size() != static_cast<std::size_t>(depth))
    throw Error(ErrorKind::ConfigParseError, "level branching needs one entry per non-leaf level");

  std::shared_ptr<TreeSpace> space(new TreeSpace());
  space->id_ = next_space_id.fetch_add(1);
  space->q_ = config.q;
  space->k_min_ = config.k_min;
  space->k_max_ = config.k_max;
  space->config_ = config;
  space->levels_.resize(static_cast<std::size_t>(depth) + 1);

  // Words of the current level, kept only during construction to resolve
  // per-node overrides.
  std::vector<std::vector<std::uint32_t>> words{{}};
  std::vector<double> fraction_mass{config.root_mass};

  auto& root = space->levels_[0];
  root.parent = {0};
  root.digit = {0};

  std::map<std::string, bool> used_overrides;
  for (int l = 0; l < depth; ++l) {
    auto& cur = space->levels_[static_cast<std::size_t>(l)];
    auto& next = space->levels_[static_cast<std::size_t>(l) + 1];
    std::vector<std::vector<std::uint32_t>> next_words;
    std::vector<double> next_mass;
    bool branches = false;
    for (std::size_t node = 0; node < words.size(); ++node) {
      const std::string word = format_word(words[node]);
      std::uint32_t count = config.level_branching.empty() ? config.default_branching
                                                           : config.level_branching[static_cast<std::size_t>(l)];
      if (auto it = config.node_branching.find(word); it != config.node_branching.end()) {
        count = it->second;
        used_overrides[word] = true;
      }
      if (count < 1)
        throw Error(ErrorKind::ConfigParseError, "node '" + word + "' must have at least one child");
      branches = branches || count >= 2;

      std::vector<double> fractions(count, 1.0 / static_cast<double>(count));
      if (auto it = config.node_weights.find(word); it != config.node_weights.end()) {
        if (it->second.size() != count)
          throw Error(ErrorKind::InconsistentWeights,
                      "node '" + word + "' has " + std::to_string(count) + " children but " +
                          std::to_string(it->second.size()) + " weights");
        fractions = it->second;
        for (double w : fractions)
          if (!(w > 0.0) || !std::isfinite(w))
            throw Error(ErrorKind::NonPositiveMass, "node '" + word + "' has a non-positive child weight");
        const double total = std::accumulate(fractions.begin(), fractions.end(), 0.0);
        if (std::abs(total - 1.0) > 1e-12)
          throw Error(ErrorKind::InconsistentWeights, "child fractions of node '" + word + "' sum to " +
                                                          std::to_string(total));
      }

      cur.first_child.push_back(next_words.size());
      cur.child_count.push_back(count);
      for (std::uint32_t d = 0; d < count; ++d) {
        auto child = words[node];
        child.push_back(d);
        next_words.push_back(std::move(child));
        next_mass.push_back(fraction_mass[node] * fractions[d]);
        next.parent.push_back(node);
        next.digit.push_back(d);
      }
    }
    if (!branches)
      throw Error(ErrorKind::ConfigParseError, "level " + std::to_string(config.k_min + l) +
                                                   " has no node with two or more children");
    words = std::move(next_words);
    fraction_mass = std::move(next_mass);
  }
  for (const auto& [word, count] : config.node_branching) {
    (void)count;
    if (!used_overrides.count(word))
      throw Error(ErrorKind::ConfigParseError, "branching override for unknown node '" + word + "'");
  }
  for (const auto& [word, w] : config.node_weights) {
    (void)w;
    const auto digits = parse_word(word);
    if (static_cast<int>(digits.size()) >= depth)
      throw Error(ErrorKind::InconsistentWeights, "weights given for leaf or unknown node '" + word + "'");
  }

  // Leaves carry the products of fractions; every internal mass is the sum of
  // its children, so additivity holds exactly in floating point.
  auto& leaves = space->levels_.back();
  leaves.mass = fraction_mass;
  leaves.child_count.assign(leaves.parent.size(), 0);
  leaves.first_child.assign(leaves.parent.size(), 0);
  for (double m : leaves.mass)
    if (!(m > 0.0) || !std::isfinite(m))
      throw Error(ErrorKind::NonPositiveMass, "leaf mass underflowed or is not finite");
  for (int l = depth - 1; l >= 0; --l) {
    auto& cur = space->levels_[static_cast<std::size_t>(l)];
    const auto& next = space->levels_[static_cast<std::size_t>(l) + 1];
    cur.mass.assign(cur.child_count.size(), 0.0);
    for (std::size_t node = 0; node < cur.mass.size(); ++node) {
      double total = 0.0;
      for (std::size_t c = 0; c < cur.child_count[node]; ++c) total += next.mass[cur.first_child[node] + c];
      cur.mass[node] = total;
    }
  }

  // Leaf ranges, bottom-up.
  leaves.leaf_begin.resize(leaves.parent.size());
  leaves.leaf_end.resize(leaves.parent.size());
  std::iota(leaves.leaf_begin.begin(), leaves.leaf_begin.end(), std::size_t{0});
  for (std::size_t i = 0; i < leaves.leaf_end.size(); ++i) leaves.leaf_end[i] = i + 1;
  for (int l = depth - 1; l >= 0; --l) {
    auto& cur = space->levels_[static_cast<std::size_t>(l)];
    const auto& next = space->levels_[static_cast<std::size_t>(l) + 1];
    cur.leaf_begin.resize(cur.child_count.size());
    cur.leaf_end.resize(cur.child_count.size());
    for (std::size_t node = 0; node < cur.child_count.size(); ++node) {
      cur.leaf_begin[node] = next.leaf_begin[cur.first_child[node]];
      cur.leaf_end[node] = next.leaf_end[cur.first_child[node] + cur.child_count[node] - 1];
    }
  }

  space->leaf_ancestors_.resize(static_cast<std::size_t>(depth) + 1);
  for (int l = 0; l <= depth; ++l) {
    auto& table = space->leaf_ancestors_[static_cast<std::size_t>(l)];
    table.resize(leaves.parent.size());
    const auto& lev = space->levels_[static_cast<std::size_t>(l)];
    for (std::size_t node = 0; node < lev.leaf_begin.size(); ++node)
      for (std::size_t leaf = lev.leaf_begin[node]; leaf < lev.leaf_end[node]; ++leaf) table[leaf] = node;
  }
  return space;
}

void TreeSpace::check_level(int level) const {
  if (!in_window(level))
    throw Error(ErrorKind::LevelOutOfWindow, "level " + std::to_string(level) + " outside [" +
                                                 std::to_string(k_min_) + ", " + std::to_string(k_max_) + "]");
}

const TreeSpace::Level& TreeSpace::level_data(int level) const {
  check_level(level);
  return levels_[static_cast<std::size_t>(level - k_min_)];
}

std::size_t TreeSpace::size(int level) const { return level_data(level).mass.size(); }

double TreeSpace::mass(int level, std::size_t ball) const { return level_data(level).mass.at(ball); }

std::span<const double> TreeSpace::masses(int level) const { return level_data(level).mass; }

std::size_t TreeSpace::parent(int level, std::size_t ball) const {
  if (level == k_min_) throw Error(ErrorKind::LevelOutOfWindow, "the root has no parent");
  return level_data(level).parent.at(ball);
}

IndexRange TreeSpace::children(int level, std::size_t ball) const {
  const auto& lev = level_data(level);
  return {lev.first_child.at(ball), lev.first_child[ball] + lev.child_count[ball]};
}

IndexRange TreeSpace::leaves(int level, std::size_t ball) const {
  const auto& lev = level_data(level);
  return {lev.leaf_begin.at(ball), lev.leaf_end.at(ball)};
}

std::uint32_t TreeSpace::digit(int level, std::size_t ball) const { return level_data(level).digit.at(ball); }

std::size_t TreeSpace::ancestor(int from, std::size_t ball, int k) const {
  check_level(k);
  check_level(from);
  if (k > from)
    throw Error(ErrorKind::LevelOrderViolation,
                "ancestor level " + std::to_string(k) + " is finer than " + std::to_string(from));
  // Any leaf below the ball has the same level-k ancestor.
  return leaf_ancestor(leaves(from, ball).begin, k);
}

std::size_t TreeSpace::leaf_ancestor(std::size_t leaf, int k) const {
  check_level(k);
  return leaf_ancestors_[static_cast<std::size_t>(k - k_min_)].at(leaf);
}

BallAddress TreeSpace::address(int level, std::size_t ball) const {
  BallAddress out;
  out.space_id = id_;
  out.level = level;
  out.digits.resize(static_cast<std::size_t>(level - k_min_));
  if (ball >= size(level)) throw Error(ErrorKind::LevelOutOfWindow, "ball index out of range");
  for (int l = level; l > k_min_; --l) {
    out.digits[static_cast<std::size_t>(l - k_min_ - 1)] = digit(l, ball);
    ball = parent(l, ball);
  }
  return out;
}

std::size_t TreeSpace::index_of(const BallAddress& address) const {
  if (address.space_id != 0 && address.space_id != id_)
    throw Error(ErrorKind::MixedSpaces, "address belongs to another space");
  check_level(address.level);
  if (address.digits.size() != static_cast<std::size_t>(address.level - k_min_))
    throw Error(ErrorKind::LevelMismatch, "digit word length does not match level");
  std::size_t ball = 0;
  for (int l = k_min_; l < address.level; ++l) {
    const auto range = children(l, ball);
    const auto d = address.digits[static_cast<std::size_t>(l - k_min_)];
    if (d >= range.size())
      throw Error(ErrorKind::LevelOutOfWindow, "digit " + std::to_string(d) + " exceeds branching at level " +
                                                   std::to_string(l));
    ball = range.begin + d;
  }
  return ball;
}

int TreeSpace::separation_index(std::size_t x, std::size_t y) const {
  if (x == y) return kInfiniteSeparation;
  // First level whose ancestors differ; the root is shared.
  int lo = k_min_;
  int hi = k_max_;
  while (hi - lo > 1) {
    const int mid = lo + (hi - lo) / 2;
    if (leaf_ancestor(x, mid) == leaf_ancestor(y, mid)) lo = mid;
    else hi = mid;
  }
  return hi;
}

int TreeSpace::separation_index(const BallAddress& x, const BallAddress& y) const {
  if (x.space_id != y.space_id || (x.space_id != 0 && x.space_id != id_))
    throw Error(ErrorKind::MixedSpaces, "addresses come from different spaces");
  if (x.level != k_max_ || y.level != k_max_)
    throw Error(ErrorKind::LevelMismatch, "separation index is defined on leaves");
  return separation_index(index_of(x), index_of(y));
}

double TreeSpace::distance(std::size_t x, std::size_t y) const {
  const int r = separation_index(x, y);
  return r == kInfiniteSeparation ? 0.0 : radius(r);
}

double TreeSpace::radius(int level) const { return std::pow(q_, -static_cast<double>(level)); }

BallAddress TreeSpace::project(const BallAddress& x, int k) const {
  check_level(k);
  if (x.space_id != 0 && x.space_id != id_) throw Error(ErrorKind::MixedSpaces, "address belongs to another space");
  if (k > x.level)
    throw Error(ErrorKind::LevelOrderViolation, "cannot project level " + std::to_string(x.level) +
                                                    " to finer level " + std::to_string(k));
  BallAddress out = x;
  out.space_id = id_;
  out.level = k;
  out.digits.resize(static_cast<std::size_t>(k - k_min_));
  return out;
}

QuotientLevel enumerate_level(const TreeSpace& space, int k) {
  QuotientLevel out;
  out.level = k;
  const auto n = space.size(k);
  out.members.reserve(n);
  out.section.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.members.push_back(space.address(k, i));
    out.section.push_back(space.leaves(k, i).begin);
  }
  return out;
}

QuotientLevel enumerate_level(const TreeSpace& space, int k, std::mt19937_64& rng) {
  auto out = enumerate_level(space, k);
  for (std::size_t i = 0; i < out.section.size(); ++i) {
    const auto range = space.leaves(k, i);
    std::uniform_int_distribution<std::size_t> pick(range.begin, range.end - 1);
    out.section[i] = pick(rng);
  }
  return out;
}

}  // namespace ultrajump
