#include <made/geometry.hpp>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace made::geo {

using chem::Structure;

namespace {

struct ImagePoint {
  Vec3 pos;        // cartesian position of an atom image
  uint32_t atom;   // source atom index
  bool home;       // true for the T = 0 image
};

// All atom images whose cells can contain a point within `radius` of any
// atom in the home cell.
std::vector<ImagePoint> build_pool(const Structure& s, double radius) {
  const auto w = s.lattice().perpendicular_widths();
  const int n0 = static_cast<int>(std::ceil(radius / w[0])) + 1;
  const int n1 = static_cast<int>(std::ceil(radius / w[1])) + 1;
  const int n2 = static_cast<int>(std::ceil(radius / w[2])) + 1;

  std::vector<ImagePoint> pool;
  pool.reserve(s.num_atoms() * (2 * n0 + 1) * (2 * n1 + 1) * (2 * n2 + 1));
  for (uint32_t j = 0; j < s.num_atoms(); ++j) {
    const Vec3 rj = s.cartesian(j);
    for (int l = -n0; l <= n0; ++l) {
      for (int m = -n1; m <= n1; ++m) {
        for (int n = -n2; n <= n2; ++n) {
          const Vec3 t = s.lattice().cartesian({double(l), double(m), double(n)});
          pool.push_back({rj + t, j, l == 0 && m == 0 && n == 0});
        }
      }
    }
  }
  return pool;
}

}  // namespace

AmdVector amd(const Structure& s, int k) {
  if (k < 1) throw std::invalid_argument("amd requires k >= 1");
  const size_t n_atoms = s.num_atoms();
  const double volume = s.lattice().volume();

  // Radius sized so the expected neighbor count exceeds k, grown on demand.
  double radius = 1.3 * std::cbrt(3.0 * k * volume / (4.0 * M_PI * double(n_atoms))) + 1.0;

  std::vector<std::vector<double>> nearest(n_atoms);
  for (;;) {
    const auto pool = build_pool(s, radius);
    bool enough = true;
    for (size_t i = 0; i < n_atoms; ++i) {
      const Vec3 ri = s.cartesian(i);
      auto& dists = nearest[i];
      dists.clear();
      for (const auto& p : pool) {
        if (p.home && p.atom == i) continue;  // the atom itself
        const double d2 = (p.pos - ri).norm2();
        if (d2 <= radius * radius) dists.push_back(std::sqrt(d2));
      }
      if (static_cast<int>(dists.size()) < k) {
        enough = false;
        break;
      }
      std::nth_element(dists.begin(), dists.begin() + (k - 1), dists.end());
      dists.resize(k);
      std::sort(dists.begin(), dists.end());
    }
    if (enough) break;
    radius *= 1.5;
  }

  AmdVector out;
  out.values.assign(k, 0.0);
  for (size_t i = 0; i < n_atoms; ++i)
    for (int j = 0; j < k; ++j) out.values[j] += nearest[i][j];
  for (int j = 0; j < k; ++j) out.values[j] /= double(n_atoms);
  return out;
}

double amd_linf(const AmdVector& a, const AmdVector& b) {
  if (a.k() != b.k()) throw std::invalid_argument("AMD vectors have different lengths");
  double d = 0.0;
  for (int i = 0; i < a.k(); ++i) d = std::max(d, std::abs(a.values[i] - b.values[i]));
  return d;
}

bool structures_match(const Structure& a, const Structure& b, const MatchPolicy& p) {
  if (p.require_same_reduced_formula &&
      !(a.composition().reduced() == b.composition().reduced()))
    return false;
  return amd_linf(amd(a, p.amd_k), amd(b, p.amd_k)) <= p.amd_tol;
}

double min_pair_distance(const Structure& s) {
  const size_t n = s.num_atoms();
  // Upper bound: direct wrapped distances plus the shortest lattice row.
  const auto lens = s.lattice().lengths();
  double best = std::min({lens[0], lens[1], lens[2]});
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = i + 1; j < n; ++j) {
      Vec3 df = s.frac_coords()[j] - s.frac_coords()[i];
      df = {df.x - std::round(df.x), df.y - std::round(df.y), df.z - std::round(df.z)};
      best = std::min(best, s.lattice().cartesian(df).norm());
    }
  }
  // Verified pass over every image cell that could beat the bound.
  const auto pool = build_pool(s, best);
  for (size_t i = 0; i < n; ++i) {
    const Vec3 ri = s.cartesian(i);
    for (const auto& p : pool) {
      if (p.home && p.atom == i) continue;
      if (p.home && p.atom < i) continue;  // home pairs counted once
      best = std::min(best, (p.pos - ri).norm());
    }
  }
  return best;
}

bool has_pair_below(const Structure& s, double threshold) {
  const auto pool = build_pool(s, threshold);
  const double t2 = threshold * threshold;
  for (size_t i = 0; i < s.num_atoms(); ++i) {
    const Vec3 ri = s.cartesian(i);
    for (const auto& p : pool) {
      if (p.home && p.atom == i) continue;
      if ((p.pos - ri).norm2() < t2) return true;
    }
  }
  return false;
}

}  // namespace made::geo
