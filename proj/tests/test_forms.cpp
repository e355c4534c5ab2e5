#include <doctest.h>

#include "support.hpp"
#include "ultrajump/error.hpp"
#include "ultrajump/exact.hpp"
#include "ultrajump/io.hpp"

using namespace ultrajump;
using testing::func;
using testing::Gen;
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

}  // namespace

TEST_CASE("extension and restriction on Q_2[0,2]") {
  const auto s = padic(2, 0, 2);
  const auto u = func(1, {1, 0});
  CHECK(extend(*s, u, 2).coeffs == std::vector<double>{1, 1, 0, 0});
  CHECK(extend(*s, u, 1).coeffs == u.coeffs);
  CHECK(inner(*s, u, u) == 0.5);
  const auto eu = extend(*s, u, 2);
  CHECK(inner(*s, eu, eu) == 0.5);

  const auto w = func(2, {1, 2, 3, 4});
  CHECK(restrict_to(*s, w, 1).coeffs == std::vector<double>{1.5, 3.5});
  CHECK(restrict_to(*s, extend(*s, u, 2), 1).coeffs == u.coeffs);
  CHECK(inner(*s, restrict_to(*s, w, 1), u) == 0.75);
  CHECK(inner(*s, w, extend(*s, u, 2)) == 0.75);

  CHECK(kind_of([&] { extend(*s, w, 1); }) == ErrorKind::LevelOrderViolation);
  CHECK(kind_of([&] { restrict_to(*s, u, 2); }) == ErrorKind::LevelOrderViolation);
}

TEST_CASE("energies on the worked instance") {
  const auto s = padic(2, 0, 2);
  const auto j = JumpKernel::kigami(LambdaProfile::geometric(s, 1.0));
  const auto leaf_rates = average(j, 2);
  const auto u1 = indicator(*s, 1, 0);
  const auto u = extend(*s, u1, 2);
  CHECK(energy(*s, leaf_rates, u, u) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(energy(*s, average(j, 1), u1, u1) == doctest::Approx(0.5).epsilon(1e-15));
  // Hand sum for the single-leaf indicator: (10 + 2 + 2) * 1/16.
  const auto leaf00 = indicator(*s, 2, 0);
  CHECK(energy(*s, leaf_rates, leaf00, leaf00) == doctest::Approx(0.875).epsilon(1e-15));
  CHECK(energy(*s, leaf_rates, constant_function(*s, 2, 3.0), constant_function(*s, 2, 3.0)) == 0.0);
  CHECK(kind_of([&] { energy(*s, leaf_rates, u1, u1); }) == ErrorKind::LevelMismatch);
  CHECK(energy_lambda(*s, leaf_rates, 2.0, u, u) == doctest::Approx(0.5 + 2.0 * 0.5));
}

TEST_CASE("m(u)") {
  const auto s = padic(2, 0, 2);
  CHECK(m_of(*s, extend(*s, indicator(*s, 1, 0), 2)) == 1);
  CHECK(m_of(*s, constant_function(*s, 2, 1.0)) == 0);
  CHECK(m_of(*s, func(2, {1, 2, 3, 4})) == 2);
}

TEST_CASE("property: operator axioms and averaging isometry on random trees") {
  Gen gen(5);
  for (int trial = 0; trial < 25; ++trial) {
    const int k_min = gen.integer(-1, 0);
    const int K = k_min + gen.integer(1, 3);
    const auto s = build_space(gen.tree(k_min, K));
    const auto j = JumpKernel::kigami(testing::random_profile(gen, s));
    const auto leaf_rates = average(j, K);
    for (int rep = 0; rep < 10; ++rep) {
      const int k = gen.integer(k_min, K);
      const auto u = gen.function(*s, k);
      const auto v = gen.function(*s, K);
      const auto eu = extend(*s, u, K);
      const auto pv = restrict_to(*s, v, k);
      // (ER.1) adjointness, (ER.2) restriction after extension.
      CHECK(std::abs(inner(*s, pv, u) - inner(*s, v, eu)) <= 1e-12);
      const auto pe = restrict_to(*s, eu, k);
      for (std::size_t i = 0; i < u.size(); ++i) CHECK(std::abs(pe[i] - u[i]) <= 1e-12);
      // (ER.3) contraction.
      CHECK(norm(*s, pv) <= norm(*s, v) * (1.0 + 1e-12));
      // Tower of extensions.
      const int k2 = gen.integer(k, K);
      CHECK(extend(*s, extend(*s, u, k2), K).coeffs == eu.coeffs);
      // Averaging isometry.
      const double ek = energy(*s, average(j, k), u, u);
      const double e = energy(*s, leaf_rates, eu, eu);
      CHECK(std::abs(ek - e) <= 1e-10 * (1.0 + e));
      CHECK(e >= 0.0);
      // Cauchy-Schwarz.
      const double evv = energy(*s, leaf_rates, v, v);
      const double euv = energy(*s, leaf_rates, eu, v);
      CHECK(euv * euv <= e * evv * (1.0 + 1e-12) + 1e-300);
      // Exact rational identities.
      const auto r = exact_identities(j, u, v);
      CHECK(r.isometry);
      CHECK(r.adjoint);
      CHECK(r.restrict_extend);
      CHECK(r.norm_preserved);
    }
  }
}

TEST_CASE("property: energy of Pi^k u equals that of u for k >= m(u)") {
  Gen gen(9);
  for (std::uint32_t p : {2u, 3u}) {
    const auto s = padic(p, 0, 3);
    const auto j = JumpKernel::kigami(LambdaProfile::geometric(s, 1.0));
    const auto leaf_rates = average(j, 3);
    for (int m = 0; m <= 3; ++m)
      for (int rep = 0; rep < 5; ++rep) {
        const auto u = extend(*s, gen.function(*s, m), 3);
        CHECK(m_of(*s, u) <= m);
        const double e = energy(*s, leaf_rates, u, u);
        for (int k = m_of(*s, u); k <= 3; ++k) {
          const auto pu = restrict_to(*s, u, k);
          CHECK(extend(*s, pu, 3).coeffs == u.coeffs);
          CHECK(std::abs(energy(*s, average(j, k), pu, pu) - e) <= 1e-12 * (1.0 + e));
          CHECK(exact_identities(j, pu, u).isometry);
        }
      }
  }
}

TEST_CASE("level functions round-trip through JSON and CSV rows") {
  const auto s = padic(3, 0, 2);
  LevelFunction f{1, {0.5, -1.25, 1e-17}};
  const auto back = level_function_from_json(level_function_to_json(f), *s);
  CHECK(back.level == 1);
  CHECK(back.coeffs == f.coeffs);
  const auto table = level_function_table("f", *s, f);
  REQUIRE(table.rows.size() == 3);
  CHECK(table.rows[1] == std::vector<std::string>{"1", "1", "-1.25"});
  CHECK(std::stod(table.rows[2][2]) == 1e-17);
  CHECK(kind_of([&] { level_function_from_json({{"level", 1}, {"coeffs", {1.0, 2.0}}}, *s); }) == ErrorKind::LevelMismatch);
  CHECK(kind_of([&] { level_function_from_json({{"level", 5}, {"coeffs", {1.0}}}, *s); }) == ErrorKind::LevelOutOfWindow);
  CHECK(kind_of([&] { level_function_from_json({{"level", "x"}, {"coeffs", {}}}, *s); }) == ErrorKind::ConfigParseError);
}
