#include <doctest.h>

#include "support.hpp"
#include "ultrajump/error.hpp"

using namespace ultrajump;
using testing::Gen;
using testing::leaf;
using testing::padic;

namespace {

template <class F>
ErrorKind kind_of(F&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an ultrajump::Error");
  return ErrorKind::ConfigParseError;
}

JumpKernel stable(const SpacePtr& s, double alpha = 1.0) { return JumpKernel::kigami(LambdaProfile::geometric(s, alpha)); }

}  // namespace

TEST_CASE("Kigami values on Q_2[0,2] with alpha = 1") {
  const auto s = padic(2, 0, 2);
  const auto j = stable(s);
  CHECK(j(leaf(*s, "00"), leaf(*s, "10")) == 2.0);
  CHECK(j(leaf(*s, "00"), leaf(*s, "01")) == 10.0);
  CHECK(testing::padic_kigami_oracle(2, 1.0, 0, 1) == 2.0);
  CHECK(testing::padic_kigami_oracle(2, 1.0, 0, 2) == 10.0);
  CHECK(kind_of([&] { j(0, 0); }) == ErrorKind::DiagonalQuery);
  CHECK(kind_of([&] { kigami_eval(LambdaProfile::geometric(s, 1.0), 1, 1); }) == ErrorKind::DiagonalQuery);
}

TEST_CASE("Kigami kernel matches the digit formula on p-adic windows") {
  for (std::uint32_t p : {2u, 3u, 5u})
    for (double alpha : {0.5, 1.0, 1.7}) {
      const auto s = padic(p, -1, 2);
      const auto j = stable(s, alpha);
      for (std::size_t x = 0; x < s->leaf_count(); ++x)
        for (std::size_t y = 0; y < s->leaf_count(); ++y) {
          if (x == y) continue;
          const double want = testing::padic_kigami_oracle(p, alpha, -1, s->separation_index(x, y));
          CHECK(j(x, y) == doctest::Approx(want).epsilon(1e-13));
        }
    }
}

TEST_CASE("constant lambda gives the zero kernel") {
  const auto s = padic(2, 0, 2);
  const auto j = JumpKernel::kigami(LambdaProfile::level_table(s, {3.0, 3.0, 3.0}));
  for (std::size_t x = 0; x < 4; ++x)
    for (std::size_t y = 0; y < 4; ++y)
      if (x != y) CHECK(j(x, y) == 0.0);
  const auto c = validate_conditions(j, 1);
  CHECK(c.a1 == 0.0);
  CHECK(c.a3 == 0.0);
  CHECK(c.a4 == 0.0);
}

TEST_CASE("decreasing lambda is rejected") {
  const auto s = padic(2, 0, 2);
  CHECK(kind_of([&] { LambdaProfile::level_table(s, {1.0, 3.0, 2.0}); }) == ErrorKind::NonMonotoneLambda);
  CHECK(kind_of([&] { LambdaProfile::geometric(s, -1.0); }) == ErrorKind::NonMonotoneLambda);
}

TEST_CASE("averaged kernel") {
  const auto s = padic(2, 0, 2);
  const auto j = stable(s);
  const auto a1 = average(j, 1);
  CHECK(a1.rates(0, 1) == 2.0);
  CHECK(a1.rates(1, 0) == 2.0);
  CHECK(a1.rates(0, 0) == 0.0);
  const auto a2 = average(j, 2);
  CHECK((a2.rates - j.leaf_matrix()).cwiseAbs().maxCoeff() == 0.0);
  CHECK(kind_of([&] { average(j, 3); }) == ErrorKind::LevelOutOfWindow);
}

TEST_CASE("conditions on the worked instance") {
  const auto s = padic(2, 0, 2);
  const auto c = validate_conditions(stable(s), 1);
  CHECK(c.a3 == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(c.a4 == 0.0);
  CHECK(std::isfinite(c.a1));
  CHECK(c.resolution == 2);
}

TEST_CASE("ball-wise constancy: Kigami holds, the perturbed control fails with a witness") {
  const auto s = padic(2, 0, 2);
  for (int k = 0; k <= 2; ++k) CHECK(detect_bc(stable(s), k).holds);
  const auto pert = JumpKernel::perturbed(stable(s), 0.5, {1, -1, 1, -1});
  const auto r = detect_bc(pert, 1);
  CHECK_FALSE(r.holds);
  REQUIRE(r.witness);
  const auto& w = *r.witness;
  CHECK(s->leaf_ancestor(w.x, 1) == w.i);
  CHECK(s->leaf_ancestor(w.x2, 1) == w.i);
  CHECK(s->leaf_ancestor(w.y, 1) == w.j);
  CHECK(pert(w.x, w.y) != pert(w.x2, w.y));
  CHECK(detect_bc(pert, 0).holds);
  CHECK(kind_of([&] { JumpKernel::perturbed(stable(s), 1.0, {1, 1, 1, 1}); }) == ErrorKind::NegativeRate);
}

TEST_CASE("perturbed leaf matrix on the worked instance") {
  const auto s = padic(2, 0, 2);
  const auto pert = JumpKernel::perturbed(stable(s), 0.5, {1, -1, 1, 1});
  const auto m = pert.leaf_matrix();
  Eigen::Matrix4d want;
  want << 0, 5, 3, 3, 5, 0, 1, 1, 3, 1, 0, 15, 3, 1, 15, 0;
  CHECK((m - want).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("mixed kernels") {
  const auto s = padic(2, 0, 2);
  const auto c1 = LambdaProfile::geometric(s, 1.0);
  const auto c2 = LambdaProfile::geometric(s, 0.5);
  SUBCASE("one component equals that component") {
    const auto j = JumpKernel::mixed({c1}, GammaSpec{});
    const auto base = stable(s);
    CHECK((j.leaf_matrix() - base.leaf_matrix()).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("component by separation level") {
    GammaSpec g;
    g.by_level = {{1, 1}, {2, 2}};
    const auto j = JumpKernel::mixed({c1, c2}, g);
    CHECK(j(leaf(*s, "00"), leaf(*s, "10")) == kigami_eval(c1, leaf(*s, "00"), leaf(*s, "10")));
    CHECK(j(leaf(*s, "00"), leaf(*s, "01")) == kigami_eval(c2, leaf(*s, "00"), leaf(*s, "01")));
    CHECK(j.component_of(0, 1) == 2);
    CHECK(j.component_of(0, 2) == 1);
    for (int k = 0; k <= 2; ++k) CHECK(detect_bc(j, k).holds);
  }
  SUBCASE("gamma varying inside a ball pair is rejected") {
    GammaSpec g;
    g.leaf_matrix = std::vector<std::vector<std::size_t>>{{1, 1, 1, 2}, {1, 1, 1, 1}, {1, 1, 1, 1}, {2, 1, 1, 1}};
    CHECK(kind_of([&] { JumpKernel::mixed({c1, c2}, g); }) == ErrorKind::InconsistentGamma);
  }
  SUBCASE("component index out of range") {
    GammaSpec g;
    g.default_component = 3;
    CHECK(kind_of([&] { JumpKernel::mixed({c1, c2}, g); }) == ErrorKind::ComponentCountMismatch);
  }
}

TEST_CASE("table kernels must be symmetric and non-negative") {
  const auto s = padic(2, 0, 1);
  Eigen::MatrixXd m(2, 2);
  m << 0, 1, 2, 0;
  CHECK(kind_of([&] { JumpKernel::table(s, m); }) == ErrorKind::AsymmetricKernel);
  m << 0, -1, -1, 0;
  CHECK(kind_of([&] { JumpKernel::table(s, m); }) == ErrorKind::NegativeRate);
  m << 7, 3, 3, 7;
  const auto j = JumpKernel::table(s, m);
  CHECK(j(0, 1) == 3.0);
  CHECK(average(j, 1).rates(0, 0) == 0.0);
}

TEST_CASE("property: symmetry, averaging tower, BC implies exact block constants") {
  Gen gen(21);
  for (int trial = 0; trial < 25; ++trial) {
    const int k_min = gen.integer(-1, 0);
    const int k_max = k_min + gen.integer(2, 3);
    const auto s = build_space(gen.tree(k_min, k_max));
    std::vector<JumpKernel> kernels{JumpKernel::kigami(testing::random_profile(gen, s))};
    std::vector<int> signs(s->leaf_count());
    for (auto& x : signs) x = gen.integer(0, 1) ? 1 : -1;
    kernels.push_back(JumpKernel::perturbed(kernels[0], gen.real(-0.9, 0.9), signs));
    for (const auto& j : kernels) {
      for (std::size_t x = 0; x < s->leaf_count(); ++x)
        for (std::size_t y = 0; y < s->leaf_count(); ++y)
          if (x != y) {
            CHECK(j(x, y) == j(y, x));
            CHECK(j(x, y) >= 0.0);
          }
      for (int k = k_min; k <= k_max; ++k) {
        const auto a = average(j, k);
        const auto oracle = testing::average_oracle(j, k);
        const double scale = 1.0 + oracle.cwiseAbs().maxCoeff();
        CHECK((a.rates - oracle).cwiseAbs().maxCoeff() <= 1e-12 * scale);
        CHECK((a.rates - a.rates.transpose()).cwiseAbs().maxCoeff() == 0.0);
        // Tower: averaging the level-k2 rates down to level k.
        const int k2 = gen.integer(k, k_max);
        const auto fine = average(j, k2);
        Eigen::MatrixXd tower = Eigen::MatrixXd::Zero(a.rates.rows(), a.rates.cols());
        for (std::size_t i = 0; i < s->size(k2); ++i)
          for (std::size_t l = 0; l < s->size(k2); ++l) {
            const auto bi = s->ancestor(k2, i, k), bl = s->ancestor(k2, l, k);
            if (bi != bl)
              tower(static_cast<Eigen::Index>(bi), static_cast<Eigen::Index>(bl)) +=
                  fine.rates(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(l)) * s->mass(k2, i) * s->mass(k2, l);
          }
        for (std::size_t i = 0; i < s->size(k); ++i)
          for (std::size_t l = 0; l < s->size(k); ++l)
            if (i != l) {
              const double t = tower(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(l)) / (s->mass(k, i) * s->mass(k, l));
              CHECK(t == doctest::Approx(a.rates(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(l))).epsilon(1e-12));
            }
        if (detect_bc(j, k).holds)
          for (std::size_t x = 0; x < s->leaf_count(); ++x)
            for (std::size_t y = 0; y < s->leaf_count(); ++y) {
              const auto i = s->leaf_ancestor(x, k), l = s->leaf_ancestor(y, k);
              if (i != l && j.variant() == JumpKernel::Variant::Kigami)
                CHECK(a.rates(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(l)) == j(x, y));
            }
      }
    }
    CHECK(detect_bc(kernels[0], gen.integer(k_min, k_max)).holds);
  }
}

TEST_CASE("property: mixed kernel is bounded by the sum of its components") {
  Gen gen(33);
  for (int trial = 0; trial < 20; ++trial) {
    const auto s = padic(static_cast<std::uint32_t>(gen.integer(2, 4)), 0, gen.integer(2, 3));
    std::vector<LambdaProfile> comps;
    const int l = gen.integer(1, 3);
    for (int c = 0; c < l; ++c) comps.push_back(LambdaProfile::geometric(s, gen.real(0.2, 2.0)));
    GammaSpec g;
    g.default_component = static_cast<std::size_t>(gen.integer(1, l));
    for (int k = 1; k <= s->k_max(); ++k) g.by_level[k] = static_cast<std::size_t>(gen.integer(1, l));
    GammaSpec::PairEntry e;
    e.level = 1;
    e.i = 0;
    e.j = 1;
    e.component = static_cast<std::size_t>(gen.integer(1, l));
    g.pairs.push_back(e);
    const auto j = JumpKernel::mixed(comps, g);
    for (std::size_t x = 0; x < s->leaf_count(); ++x)
      for (std::size_t y = 0; y < s->leaf_count(); ++y) {
        if (x == y) continue;
        double sum = 0.0;
        for (const auto& c : comps) sum += kigami_eval(c, x, y);
        CHECK(j(x, y) <= sum);
        CHECK(j(x, y) == kigami_eval(comps[j.component_of(x, y) - 1], x, y));
      }
    for (int k = s->k_min(); k <= s->k_max(); ++k) CHECK(detect_bc(j, k).holds);
  }
}
