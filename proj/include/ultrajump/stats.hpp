#pragma once

#include <cstdint>
#include <vector>

namespace ultrajump {

struct ChiSquareResult {
  double statistic = 0.0;
  int dof = 0;
  double p_value = 1.0;
  std::size_t cells = 0;  // after pooling
};

/// Two-sample chi-square homogeneity test on a 2 x C table of counts. Cells
/// whose expected count is below 5 in either sample are pooled into one cell;
/// a pooled cell that is still too small is merged into the smallest kept
/// cell. With one cell left the statistic is 0 and p = 1.
ChiSquareResult chi_square_two_sample(const std::vector<std::uint64_t>& a, const std::vector<std::uint64_t>& b);

/// Upper tail of the chi-square distribution.
double chi_square_survival(double statistic, int dof);

/// Largest |count - n p| / sqrt(n p (1 - p)) over cells. Cells with zero
/// variance contribute 0 when the count matches exactly and +inf otherwise.
double max_multinomial_sigma(const std::vector<std::uint64_t>& counts, const std::vector<double>& probabilities);

}  // namespace ultrajump
