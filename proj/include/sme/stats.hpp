#pragma once

#include <vector>

namespace sme {

enum class StatMethod { KruskalWallis, WilcoxonRankSum };

struct StatResult {
  double statistic = 0.0;
  double p_value = 1.0;
  StatMethod method = StatMethod::KruskalWallis;
  bool exact = false;
  double alpha = 0.05;
};

// Upper-tail probability of the chi-squared distribution.
double chi_squared_sf(double x, int df);

// Upper-tail probability of the standard normal.
double normal_sf(double z);

// Mid-ranks of the pooled sample, tie groups averaged.
std::vector<double> mid_ranks(const std::vector<double>& pooled);

// Kruskal-Wallis H with tie correction; p from the chi-squared upper
// tail with groups-1 degrees of freedom. All-identical input yields
// H = 0, p = 1.
StatResult kruskal_wallis(const std::vector<std::vector<double>>& groups);

enum class RankSumMode { Auto, Exact, Approx };

// Two-sided Wilcoxon rank-sum. The statistic is U of the first sample.
// Auto uses full enumeration when both sizes are <= 10 and there are no
// ties, otherwise the tie-corrected normal approximation with continuity
// correction.
StatResult wilcoxon_ranksum(const std::vector<double>& a, const std::vector<double>& b,
                            RankSumMode mode = RankSumMode::Auto);

}  // namespace sme
