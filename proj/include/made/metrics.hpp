#pragma once

#include <optional>
#include <string>
#include <vector>

#include <made/episode.hpp>

namespace made::metrics {

// Cumulative discovery counts D(0..B); D(0) = 0, increments of 0 or 1.
struct DiscoveryCurve {
  int budget = 0;
  std::vector<int> d;  // length budget + 1
};

// Throws std::invalid_argument when the curve violates its invariants.
void validate_curve(const DiscoveryCurve& c);

DiscoveryCurve curve_from_log(const env::EpisodeLog& log);

// D(B)/B.
double msun(const DiscoveryCurve& c);

// Trapezoidal discretization of (2/B^2) * integral of D; the one-discovery-
// per-query curve scores exactly 1.
double audc(const DiscoveryCurve& c);

// t at which the k-th discovery happened (1-based k), strictly increasing.
std::vector<int> discovery_times(const DiscoveryCurve& c);

// t_baseline(k) / t_policy(k). When the baseline never reaches k,
// t_baseline falls back to the budget. Empty when the policy itself never
// reached k.
std::optional<double> acceleration_factor(const DiscoveryCurve& policy,
                                          const DiscoveryCurve& baseline, int k);

// D_policy(t) / D_baseline(t); empty when D_baseline(t) = 0.
std::optional<double> enhancement_factor(const DiscoveryCurve& policy,
                                         const DiscoveryCurve& baseline, int t);

// Diversity over the episode's mSUN structures. Zero discoveries give all
// zeros; one discovery gives zero distances and unit counts.
struct DiversityStats {
  double mean_comp_l1 = 0.0;
  int unique_reduced_compositions = 0;
  int unique_structures_amd = 0;
  double mean_pairwise_amd = 0.0;  // L-inf between AMD vectors
};
DiversityStats diversity_metrics(const env::EpisodeLog& log);

// Unique reduced formulas among all evaluated structures (coverage view).
int evaluated_unique_compositions(const env::EpisodeLog& log);

struct Aggregate {
  double mean = 0.0;
  double sem = 0.0;  // sample stddev / sqrt(n); 0 when n == 1
  int n = 0;
};
Aggregate aggregate_values(const std::vector<double>& values);

}  // namespace made::metrics
