#pragma once

#include <optional>
#include <string>
#include <vector>

#include <made/chem.hpp>

#include <json.hpp>

namespace made::hull {

struct HullEntry {
  int entry_id = -1;  // assigned by HullState::add_entry
  chem::Structure structure;
  std::vector<double> composition;  // simplex point in system element order
  double energy_per_atom = 0.0;     // formation energy, eV/atom
  bool initial = true;              // false for proposed entries
  int query_index = -1;             // proposal step for proposed entries
};

struct StabilityResult {
  double e_above_hull = 0.0;  // >= 0
  bool is_stable = false;     // e_above_hull <= epsilon
  std::vector<std::pair<int, double>> decomposition;  // (entry_id, weight)
};

struct HullPoint {
  double energy = 0.0;
  std::vector<std::pair<int, double>> decomposition;
};

// Set of evaluated entries plus the lower convex hull over composition
// fractions x formation energy. Energy-above-hull queries are solved as
// exact small LPs rather than by facet construction.
class HullState {
 public:
  HullState(chem::ChemicalSystem system, double epsilon);

  const chem::ChemicalSystem& system() const { return system_; }
  double epsilon() const { return epsilon_; }
  const std::vector<HullEntry>& entries() const { return entries_; }

  // min sum(w_j E_j) with sum(w_j x_j) = x, w >= 0 over entries (minus the
  // excluded one). Throws std::logic_error when infeasible, which cannot
  // happen while every simplex vertex is covered.
  HullPoint hull_energy_at(const std::vector<double>& x,
                           std::optional<int> exclude_entry = std::nullopt) const;

  // Delta of an existing entry against the hull including itself; >= 0.
  StabilityResult energy_above_hull(int entry_id) const;

  // Hull distance of a candidate that is not in the hull yet; negative
  // values mean the candidate would break the current hull.
  double screen_candidate(const std::vector<double>& x, double predicted_energy) const;

  // Adds the entry (id assigned, returned inside the result) and reports
  // which existing entries flipped their is_stable flag.
  struct AddResult {
    int entry_id;
    std::vector<int> stability_changed;
  };
  AddResult add_entry(HullEntry e);

  std::vector<int> stable_entry_ids() const;

 private:
  chem::ChemicalSystem system_;
  double epsilon_;
  std::vector<HullEntry> entries_;
};

// Fig.-5-style export: all entries with stability data plus hull-energy
// samples on a simplex grid with `resolution` subdivisions per axis.
nlohmann::json phase_diagram_export(const HullState& h, int resolution);

}  // namespace made::hull
