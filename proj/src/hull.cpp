#include <made/hull.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>

#include <made/simplex_lp.hpp>

namespace made::hull {

HullState::HullState(chem::ChemicalSystem system, double epsilon)
    : system_(std::move(system)), epsilon_(epsilon) {
  if (epsilon_ < 0.0) throw std::invalid_argument("epsilon must be >= 0");
}

HullPoint HullState::hull_energy_at(const std::vector<double>& x,
                                    std::optional<int> exclude_entry) const {
  const int d = system_.size();
  if (static_cast<int>(x.size()) != d)
    throw std::invalid_argument("query point dimension mismatch");

  std::vector<int> cols;  // entry index per LP column
  cols.reserve(entries_.size());
  for (size_t j = 0; j < entries_.size(); ++j) {
    if (exclude_entry && entries_[j].entry_id == *exclude_entry) continue;
    cols.push_back(static_cast<int>(j));
  }
  const int n = static_cast<int>(cols.size());
  if (n == 0) throw std::logic_error("hull has no entries");

  // Equality constraints sum(w_j x_j[i]) = x[i]; since every composition
  // vector sums to 1 these also pin sum(w_j) = 1.
  std::vector<double> a(size_t(d) * n);
  std::vector<double> c(n);
  for (int jj = 0; jj < n; ++jj) {
    const auto& e = entries_[cols[jj]];
    for (int i = 0; i < d; ++i) a[size_t(i) * n + jj] = e.composition[i];
    c[jj] = e.energy_per_atom;
  }

  const auto lp = lp::solve_min_equality(a, d, n, x, c);
  if (!lp.feasible)
    throw std::logic_error("hull LP infeasible: simplex vertices not covered");

  HullPoint out;
  out.energy = lp.objective;
  for (int jj = 0; jj < n; ++jj) {
    if (lp.x[jj] > 1e-9)
      out.decomposition.emplace_back(entries_[cols[jj]].entry_id, lp.x[jj]);
  }
  return out;
}

StabilityResult HullState::energy_above_hull(int entry_id) const {
  const HullEntry* entry = nullptr;
  for (const auto& e : entries_) {
    if (e.entry_id == entry_id) {
      entry = &e;
      break;
    }
  }
  if (!entry) throw std::invalid_argument("unknown hull entry id");

  const auto hp = hull_energy_at(entry->composition);
  StabilityResult r;
  r.e_above_hull = std::max(0.0, entry->energy_per_atom - hp.energy);
  r.is_stable = r.e_above_hull <= epsilon_;
  r.decomposition = hp.decomposition;
  return r;
}

double HullState::screen_candidate(const std::vector<double>& x, double predicted_energy) const {
  return predicted_energy - hull_energy_at(x).energy;
}

HullState::AddResult HullState::add_entry(HullEntry e) {
  if (static_cast<int>(e.composition.size()) != system_.size())
    throw std::invalid_argument("entry composition dimension mismatch");

  std::vector<bool> before(entries_.size());
  for (size_t i = 0; i < entries_.size(); ++i)
    before[i] = energy_above_hull(entries_[i].entry_id).is_stable;

  e.entry_id = entries_.empty() ? 0 : entries_.back().entry_id + 1;
  entries_.push_back(std::move(e));

  AddResult out;
  out.entry_id = entries_.back().entry_id;
  for (size_t i = 0; i + 1 < entries_.size(); ++i) {
    if (energy_above_hull(entries_[i].entry_id).is_stable != before[i])
      out.stability_changed.push_back(entries_[i].entry_id);
  }
  return out;
}

std::vector<int> HullState::stable_entry_ids() const {
  std::vector<int> out;
  for (const auto& e : entries_)
    if (energy_above_hull(e.entry_id).is_stable) out.push_back(e.entry_id);
  return out;
}

namespace {

void simplex_grid(int d, int resolution, std::vector<int>& point, int pos, int remaining,
                  const std::function<void(const std::vector<int>&)>& fn) {
  if (pos == d - 1) {
    point[pos] = remaining;
    fn(point);
    return;
  }
  for (int v = 0; v <= remaining; ++v) {
    point[pos] = v;
    simplex_grid(d, resolution, point, pos + 1, remaining - v, fn);
  }
}

}  // namespace

nlohmann::json phase_diagram_export(const HullState& h, int resolution) {
  nlohmann::json j;
  j["system"] = h.system().name();
  j["epsilon"] = h.epsilon();
  auto& entries = j["entries"];
  entries = nlohmann::json::array();
  for (const auto& e : h.entries()) {
    const auto st = h.energy_above_hull(e.entry_id);
    nlohmann::json je;
    je["entry_id"] = e.entry_id;
    je["composition"] = e.composition;
    je["formula"] = e.structure.composition().formula();
    je["energy_per_atom"] = e.energy_per_atom;
    je["e_above_hull"] = st.e_above_hull;
    je["stable"] = st.is_stable;
    je["origin"] = e.initial ? "initial" : ("proposed:" + std::to_string(e.query_index));
    entries.push_back(std::move(je));
  }

  auto& samples = j["hull_samples"];
  samples = nlohmann::json::array();
  const int d = h.system().size();
  std::vector<int> point(d, 0);
  simplex_grid(d, resolution, point, 0, resolution, [&](const std::vector<int>& p) {
    std::vector<double> x(d);
    for (int i = 0; i < d; ++i) x[i] = double(p[i]) / double(resolution);
    nlohmann::json js;
    js["x"] = x;
    js["energy"] = h.hull_energy_at(x).energy;
    samples.push_back(std::move(js));
  });
  return j;
}

}  // namespace made::hull
