#include <made/metrics.hpp>

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace made::metrics {

void validate_curve(const DiscoveryCurve& c) {
  if (c.budget < 1 || static_cast<int>(c.d.size()) != c.budget + 1)
    throw std::invalid_argument("discovery curve must have budget+1 values");
  if (c.d[0] != 0) throw std::invalid_argument("discovery curve must start at 0");
  for (int t = 1; t <= c.budget; ++t) {
    const int step = c.d[t] - c.d[t - 1];
    if (step != 0 && step != 1)
      throw std::invalid_argument("discovery curve increments must be 0 or 1");
  }
}

DiscoveryCurve curve_from_log(const env::EpisodeLog& log) {
  DiscoveryCurve c;
  c.budget = log.budget;
  c.d.assign(1, 0);
  for (const auto& r : log.records) c.d.push_back(r.cumulative);
  while (static_cast<int>(c.d.size()) < c.budget + 1) c.d.push_back(c.d.back());
  validate_curve(c);
  return c;
}

double msun(const DiscoveryCurve& c) {
  validate_curve(c);
  return double(c.d[c.budget]) / double(c.budget);
}

double audc(const DiscoveryCurve& c) {
  validate_curve(c);
  double sum = 0.0;
  for (int t = 1; t <= c.budget; ++t) sum += 0.5 * (c.d[t - 1] + c.d[t]);
  return 2.0 * sum / (double(c.budget) * double(c.budget));
}

std::vector<int> discovery_times(const DiscoveryCurve& c) {
  std::vector<int> times;
  for (int t = 1; t <= c.budget; ++t) {
    if (c.d[t] > c.d[t - 1]) times.push_back(t);
  }
  return times;
}

namespace {

// First t with D(t) >= k, or nullopt.
std::optional<int> time_to_k(const DiscoveryCurve& c, int k) {
  for (int t = 1; t <= c.budget; ++t) {
    if (c.d[t] >= k) return t;
  }
  return std::nullopt;
}

}  // namespace

std::optional<double> acceleration_factor(const DiscoveryCurve& policy,
                                          const DiscoveryCurve& baseline, int k) {
  if (k < 1) throw std::invalid_argument("acceleration factor needs k >= 1");
  const auto tp = time_to_k(policy, k);
  if (!tp) return std::nullopt;
  const auto tb = time_to_k(baseline, k);
  const double t_baseline = tb ? double(*tb) : double(baseline.budget);
  return t_baseline / double(*tp);
}

std::optional<double> enhancement_factor(const DiscoveryCurve& policy,
                                         const DiscoveryCurve& baseline, int t) {
  if (t < 1 || t > policy.budget || t > baseline.budget)
    throw std::invalid_argument("enhancement factor t out of range");
  if (baseline.d[t] == 0) return std::nullopt;
  return double(policy.d[t]) / double(baseline.d[t]);
}

DiversityStats diversity_metrics(const env::EpisodeLog& log) {
  const auto sys = log.system();
  std::vector<const chem::Structure*> discovered;
  for (const auto& r : log.records) {
    if (r.stable && r.unique && r.novel) discovered.push_back(&r.relaxed);
  }

  DiversityStats out;
  if (discovered.empty()) return out;

  std::set<std::string> reduced;
  for (const auto* s : discovered) reduced.insert(s->composition().reduced_formula());
  out.unique_reduced_compositions = static_cast<int>(reduced.size());

  std::vector<geo::AmdVector> amds;
  amds.reserve(discovered.size());
  for (const auto* s : discovered) amds.push_back(geo::amd(*s, log.match.amd_k));

  // Greedy clustering under the episode's match policy.
  std::vector<size_t> reps;
  for (size_t i = 0; i < discovered.size(); ++i) {
    bool matched = false;
    for (size_t r : reps) {
      const bool same_formula =
          discovered[i]->composition().reduced() == discovered[r]->composition().reduced();
      if (log.match.require_same_reduced_formula && !same_formula) continue;
      if (geo::amd_linf(amds[i], amds[r]) <= log.match.amd_tol) {
        matched = true;
        break;
      }
    }
    if (!matched) reps.push_back(i);
  }
  out.unique_structures_amd = static_cast<int>(reps.size());

  double l1_sum = 0.0, amd_sum = 0.0;
  int pairs = 0;
  for (size_t i = 0; i < discovered.size(); ++i) {
    for (size_t j = i + 1; j < discovered.size(); ++j) {
      l1_sum += chem::composition_l1(discovered[i]->composition(),
                                     discovered[j]->composition(), sys);
      amd_sum += geo::amd_linf(amds[i], amds[j]);
      ++pairs;
    }
  }
  if (pairs > 0) {
    out.mean_comp_l1 = l1_sum / pairs;
    out.mean_pairwise_amd = amd_sum / pairs;
  }
  return out;
}

int evaluated_unique_compositions(const env::EpisodeLog& log) {
  std::set<std::string> reduced;
  for (const auto& r : log.records) reduced.insert(r.relaxed.composition().reduced_formula());
  return static_cast<int>(reduced.size());
}

Aggregate aggregate_values(const std::vector<double>& values) {
  Aggregate a;
  a.n = static_cast<int>(values.size());
  if (a.n == 0) return a;
  double sum = 0.0;
  for (double v : values) sum += v;
  a.mean = sum / a.n;
  if (a.n == 1) return a;
  double ss = 0.0;
  for (double v : values) ss += (v - a.mean) * (v - a.mean);
  const double sd = std::sqrt(ss / (a.n - 1));
  a.sem = sd / std::sqrt(double(a.n));
  return a;
}

}  // namespace made::metrics
