#include "ultrajump/stats.hpp"

#include <boost/math/distributions/chi_squared.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace ultrajump {

double chi_square_survival(double statistic, int dof) {
  if (dof <= 0) return 1.0;
  if (statistic <= 0.0) return 1.0;
  boost::math::chi_squared_distribution<double> dist(static_cast<double>(dof));
  return boost::math::cdf(boost::math::complement(dist, statistic));
}

ChiSquareResult chi_square_two_sample(const std::vector<std::uint64_t>& a, const std::vector<std::uint64_t>& b) {
  ChiSquareResult out;
  const auto cells = std::min(a.size(), b.size());
  const double na = static_cast<double>(std::accumulate(a.begin(), a.end(), std::uint64_t{0}));
  const double nb = static_cast<double>(std::accumulate(b.begin(), b.end(), std::uint64_t{0}));
  if (na == 0.0 || nb == 0.0) return out;
  const double total = na + nb;

  struct Cell {
    double a = 0.0;
    double b = 0.0;
    double min_expected(double na_, double nb_, double total_) const {
      return std::min(na_, nb_) * (a + b) / total_;
    }
  };
  std::vector<Cell> kept;
  Cell pooled;
  for (std::size_t c = 0; c < cells; ++c) {
    Cell cell{static_cast<double>(a[c]), static_cast<double>(b[c])};
    if (cell.a + cell.b == 0.0) continue;
    if (cell.min_expected(na, nb, total) >= 5.0) kept.push_back(cell);
    else {
      pooled.a += cell.a;
      pooled.b += cell.b;
    }
  }
  if (pooled.a + pooled.b > 0.0) {
    if (pooled.min_expected(na, nb, total) >= 5.0 || kept.empty()) {
      kept.push_back(pooled);
    } else {
      auto smallest = std::min_element(kept.begin(), kept.end(),
                                       [](const Cell& x, const Cell& y) { return x.a + x.b < y.a + y.b; });
      smallest->a += pooled.a;
      smallest->b += pooled.b;
    }
  }
  out.cells = kept.size();
  if (kept.size() <= 1) return out;

  double stat = 0.0;
  for (const auto& cell : kept) {
    const double ea = na * (cell.a + cell.b) / total;
    const double eb = nb * (cell.a + cell.b) / total;
    stat += (cell.a - ea) * (cell.a - ea) / ea + (cell.b - eb) * (cell.b - eb) / eb;
  }
  out.statistic = stat;
  out.dof = static_cast<int>(kept.size()) - 1;
  out.p_value = chi_square_survival(stat, out.dof);
  return out;
}

double max_multinomial_sigma(const std::vector<std::uint64_t>& counts, const std::vector<double>& probabilities) {
  const double n = static_cast<double>(std::accumulate(counts.begin(), counts.end(), std::uint64_t{0}));
  double worst = 0.0;
  for (std::size_t c = 0; c < counts.size(); ++c) {
    const double p = std::clamp(probabilities.at(c), 0.0, 1.0);
    const double expected = n * p;
    const double sd = std::sqrt(n * p * (1.0 - p));
    const double diff = std::abs(static_cast<double>(counts[c]) - expected);
    if (sd == 0.0) {
      if (diff > 1e-9) return std::numeric_limits<double>::infinity();
      continue;
    }
    worst = std::max(worst, diff / sd);
  }
  return worst;
}

}  // namespace ultrajump
