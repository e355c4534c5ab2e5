#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "support.hpp"
#include "ultrajump/error.hpp"

using namespace ultrajump;
using testing::Gen;
using testing::leaf;
using testing::padic;

namespace {

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an ultrajump::Error");
  return ErrorKind::ConfigParseError;
}

}  // namespace

TEST_CASE("p-adic window [0,2] has four quarter-mass leaves") {
  const auto s = padic(2, 0, 2);
  CHECK(s->leaf_count() == 4);
  for (std::size_t x = 0; x < 4; ++x) CHECK(s->mass(2, x) == 0.25);
  CHECK(s->total_mass() == 1.0);
}

TEST_CASE("p = 3 window [0,1] has three leaves of mass 1/3") {
  const auto s = padic(3, 0, 1);
  CHECK(s->leaf_count() == 3);
  for (std::size_t x = 0; x < 3; ++x) CHECK(s->mass(1, x) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("level-0 balls have unit mass for any window") {
  const auto s = padic(2, -1, 3);
  CHECK(s->total_mass() == 2.0);
  for (std::size_t b = 0; b < s->size(0); ++b) CHECK(s->mass(0, b) == 1.0);
}

TEST_CASE("degenerate and invalid configurations are rejected") {
  CHECK(kind_of([] { padic(2, 0, 0); }) == ErrorKind::EmptyWindow);
  CHECK(kind_of([] { padic(2, 2, 1); }) == ErrorKind::EmptyWindow);

  auto c = SpaceConfig::padic(2, 0, 2);
  c.node_weights[""] = {0.7, 0.2};
  CHECK(kind_of([&] { build_space(c); }) == ErrorKind::InconsistentWeights);
  c.node_weights[""] = {1.2, -0.2};
  CHECK(kind_of([&] { build_space(c); }) == ErrorKind::NonPositiveMass);
  c = SpaceConfig::padic(2, 0, 2);
  c.root_mass = 0.0;
  CHECK(kind_of([&] { build_space(c); }) == ErrorKind::NonPositiveMass);
  c = SpaceConfig::padic(2, 0, 2);
  c.default_branching = 1;
  CHECK(kind_of([&] { build_space(c); }) == ErrorKind::ConfigParseError);
}

TEST_CASE("separation index and metric on Q_2[0,2]") {
  const auto s = padic(2, 0, 2);
  const auto a = leaf(*s, "00"), b = leaf(*s, "01"), c = leaf(*s, "10");
  CHECK(s->separation_index(a, b) == 2);
  CHECK(s->distance(a, b) == 0.25);
  CHECK(s->separation_index(a, c) == 1);
  CHECK(s->distance(a, c) == 0.5);
  CHECK(s->separation_index(a, a) == kInfiniteSeparation);
  CHECK(s->distance(a, a) == 0.0);
}

TEST_CASE("addresses from another space are rejected") {
  const auto s = padic(2, 0, 2);
  const auto t = padic(2, 0, 2);
  auto x = s->address(2, 0);
  auto y = t->address(2, 1);
  CHECK(kind_of([&] { s->separation_index(x, y); }) == ErrorKind::MixedSpaces);
  CHECK(s->separation_index(x, s->address(2, 1)) == 2);
}

TEST_CASE("projection truncates digit words") {
  const auto s = padic(2, 0, 2);
  const auto x = s->address(2, leaf(*s, "01"));
  const auto p = s->project(x, 1);
  CHECK(p.level == 1);
  CHECK(format_word(p.digits) == "0");
  CHECK(s->project(x, 2) == x);
  CHECK(kind_of([&] { s->project(x, 3); }) == ErrorKind::LevelOutOfWindow);
}

TEST_CASE("level enumeration on Q_2[0,2]") {
  const auto s = padic(2, 0, 2);
  const auto l1 = enumerate_level(*s, 1);
  REQUIRE(l1.members.size() == 2);
  CHECK(s->mass(1, 0) == 0.5);
  CHECK(s->mass(1, 1) == 0.5);
  const auto l0 = enumerate_level(*s, 0);
  CHECK(l0.members.size() == 1);
  CHECK(s->mass(0, 0) == 1.0);
  const auto m = s->masses(2);
  CHECK(std::accumulate(m.begin(), m.end(), 0.0) == 1.0);
  CHECK(kind_of([&] { enumerate_level(*s, 5); }) == ErrorKind::LevelOutOfWindow);
}

TEST_CASE("digit words round-trip") {
  for (const std::string w : {"", "0", "01", "2a", "z9"}) CHECK(format_word(parse_word(w)) == w);
  const std::vector<std::uint32_t> big{3, 40, 1};
  CHECK(format_word(big) == "3.40.1");
  CHECK(parse_word("3.40.1") == big);
}

TEST_CASE("property: ultrametric inequality, tower and block-constant separation") {
  Gen gen(7);
  for (int trial = 0; trial < 30; ++trial) {
    const int k_min = gen.integer(-2, 1);
    const int k_max = k_min + gen.integer(1, 4);
    const auto cfg = gen.tree(k_min, k_max);
    const auto s = build_space(cfg);
    const auto n = s->leaf_count();
    for (int i = 0; i < 200; ++i) {
      const auto x = gen.index(n), y = gen.index(n), z = gen.index(n);
      // Integer form: r(x,z) >= min(r(x,y), r(y,z)).
      CHECK(s->separation_index(x, z) >= std::min(s->separation_index(x, y), s->separation_index(y, z)));
      CHECK(s->distance(x, z) <= std::max(s->distance(x, y), s->distance(y, z)));
      const int k = gen.integer(k_min, k_max);
      const int k2 = gen.integer(k, k_max);
      CHECK(s->ancestor(k2, s->leaf_ancestor(x, k2), k) == s->leaf_ancestor(x, k));
      const auto ax = s->address(k_max, x);
      CHECK(s->project(s->project(ax, k2), k) == s->project(ax, k));
      // Separation depends only on the level-k balls once they differ.
      const auto y2 = s->leaves(k, s->leaf_ancestor(y, k)).begin;
      const auto x2 = s->leaves(k, s->leaf_ancestor(x, k)).end - 1;
      if (s->leaf_ancestor(x, k) != s->leaf_ancestor(y, k))
        CHECK(s->separation_index(x, y) == s->separation_index(x2, y2));
    }
  }
}

TEST_CASE("property: measure additivity is exact and sections stay inside their balls") {
  Gen gen(11);
  for (int trial = 0; trial < 30; ++trial) {
    const int k_min = gen.integer(-1, 1);
    const int k_max = k_min + gen.integer(1, 4);
    const auto s = build_space(gen.tree(k_min, k_max));
    for (int k = k_min; k < k_max; ++k)
      for (std::size_t b = 0; b < s->size(k); ++b) {
        const auto ch = s->children(k, b);
        double sum = 0.0;
        for (auto c = ch.begin; c < ch.end; ++c) sum += s->mass(k + 1, c);
        CHECK(sum == s->mass(k, b));
        CHECK(s->mass(k, b) > 0.0);
      }
    for (int k = k_min; k <= k_max; ++k) {
      const auto level = enumerate_level(*s, k, gen.engine());
      std::vector<int> covered(s->leaf_count(), 0);
      for (std::size_t i = 0; i < level.members.size(); ++i) {
        CHECK(s->leaf_ancestor(level.section[i], k) == i);
        const auto r = s->leaves(k, i);
        for (auto x = r.begin; x < r.end; ++x) ++covered[x];
      }
      CHECK(std::all_of(covered.begin(), covered.end(), [](int c) { return c == 1; }));
      for (std::size_t x = 0; x < s->leaf_count(); ++x)
        CHECK(s->distance(level.section[s->leaf_ancestor(x, k)], x) <= s->radius(k));
    }
  }
}
