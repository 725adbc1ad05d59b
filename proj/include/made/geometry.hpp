#pragma once

#include <vector>

#include <made/chem.hpp>

namespace made::geo {

// Average minimum distance fingerprint: values[j] is the mean over atoms of
// the distance to the (j+1)-th nearest periodic neighbor. Nondecreasing, > 0.
struct AmdVector {
  std::vector<double> values;
  int k() const { return static_cast<int>(values.size()); }
};

// Uniqueness matching policy. Substitutes a lattice/site/angle-tolerance
// matcher with an AMD fingerprint comparison.
struct MatchPolicy {
  int amd_k = 100;
  double amd_tol = 0.05;  // angstrom, max-norm on AMD vectors
  bool require_same_reduced_formula = true;
};

// Throws std::invalid_argument when k < 1.
AmdVector amd(const chem::Structure& s, int k);

double amd_linf(const AmdVector& a, const AmdVector& b);

bool structures_match(const chem::Structure& a, const chem::Structure& b, const MatchPolicy& p);

// Minimum over all atom pairs (self periodic images included) of the
// minimum-image distance.
double min_pair_distance(const chem::Structure& s);

// Early-exit form of min_pair_distance(s) < threshold; exact.
bool has_pair_below(const chem::Structure& s, double threshold);

}  // namespace made::geo
