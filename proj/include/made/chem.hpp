#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <made/vec3.hpp>

#include <json.hpp>

namespace made::chem {

struct Element {
  std::string symbol;
  int atomic_number = 0;

  bool operator==(const Element& o) const { return atomic_number == o.atomic_number; }
  bool operator<(const Element& o) const { return atomic_number < o.atomic_number; }
};

// Lookup against the 118 known symbols; throws std::invalid_argument on unknown.
Element element_from_symbol(const std::string& symbol);
Element element_from_z(int atomic_number);
bool is_known_symbol(const std::string& symbol);

// Atoms per formula unit, keyed by atomic number. All counts >= 1.
class Composition {
 public:
  Composition() = default;
  explicit Composition(std::map<int, int> counts);

  const std::map<int, int>& counts() const { return counts_; }
  int total_atoms() const;
  bool contains(int z) const { return counts_.count(z) > 0; }

  // Counts divided by their gcd; idempotent.
  Composition reduced() const;

  // Alphabetical by symbol, count suffix omitted when 1 (e.g. "Al2Ni").
  std::string formula() const;
  std::string reduced_formula() const { return reduced().formula(); }

  bool operator==(const Composition& o) const { return counts_ == o.counts_; }
  bool operator<(const Composition& o) const { return counts_ < o.counts_; }

 private:
  std::map<int, int> counts_;
};

struct ChemicalSystem {
  std::vector<Element> elements;  // ordered, unique; defines composition-vector axes
  int max_atoms = 20;

  int size() const { return static_cast<int>(elements.size()); }
  std::optional<int> index_of(int z) const;
  std::string name() const;  // e.g. "Al-Ni-Ti" in element order
};

// Throws std::invalid_argument when invariants are violated.
ChemicalSystem make_system(const std::vector<std::string>& symbols, int max_atoms);

// Rows are lattice vectors in angstrom. det > 0 required.
class Lattice {
 public:
  Lattice() = default;
  explicit Lattice(const Mat3& rows);

  // Canonical embedding: a along x, b in the xy plane.
  // Throws std::domain_error when the parameters do not close a cell.
  static Lattice from_parameters(double a, double b, double c, double alpha_deg,
                                 double beta_deg, double gamma_deg);

  const Mat3& rows() const { return rows_; }
  double volume() const { return rows_.det(); }
  Vec3 cartesian(const Vec3& frac) const { return rows_.row_times(frac); }
  std::array<double, 3> lengths() const;

  // Perpendicular distances between {b,c}, {a,c}, {a,b} plane pairs; bounds
  // how many image cells are needed to cover a given radius.
  std::array<double, 3> perpendicular_widths() const;

 private:
  Mat3 rows_;
};

class Structure {
 public:
  // Coordinates are wrapped into [0,1) on construction.
  // Throws std::invalid_argument on size mismatch or empty species.
  Structure(Lattice lattice, std::vector<Element> species, std::vector<Vec3> frac_coords);

  const Lattice& lattice() const { return lattice_; }
  const std::vector<Element>& species() const { return species_; }
  const std::vector<Vec3>& frac_coords() const { return frac_coords_; }
  size_t num_atoms() const { return species_.size(); }

  Vec3 cartesian(size_t i) const { return lattice_.cartesian(frac_coords_[i]); }
  Composition composition() const;

  // Same lattice and species with new fractional coordinates (wrapped).
  Structure with_coords(std::vector<Vec3> frac) const;

 private:
  Lattice lattice_;
  std::vector<Element> species_;
  std::vector<Vec3> frac_coords_;
};

// --- chem-core operations ---

// Atom fractions in system element order; entries sum to 1.
// Throws std::domain_error when c has an element outside sys.
std::vector<double> composition_vector(const Composition& c, const ChemicalSystem& sys);

Composition reduce(const Composition& c);

// All full formulas with total atoms in [2, sys.max_atoms] and at least two
// distinct system elements, ordered by (total atoms, counts lexicographic).
// Pure-element formulas are excluded; elemental references live in the hull.
std::vector<Composition> enumerate_compositions(const ChemicalSystem& sys);

// Minimum distance over periodic images. i == j gives the nearest periodic
// self-image. Throws std::out_of_range on bad indices.
double min_image_distance(const Structure& s, size_t i, size_t j);

// L1 distance between normalized composition vectors; in [0, 2].
double composition_l1(const Composition& a, const Composition& b, const ChemicalSystem& sys);

// --- serialization ---

nlohmann::json structure_to_json(const Structure& s);
Structure structure_from_json(const nlohmann::json& j);

// Structure-set file: JSON array of structure objects.
std::vector<Structure> load_structure_set(const std::string& path);
void save_structure_set(const std::string& path, const std::vector<Structure>& structures);

// Content hash over lattice, species and coordinates (exact double bits).
uint64_t structure_hash(const Structure& s);

// Validation against a chemical system (element membership and atom budget).
void validate_in_system(const Structure& s, const ChemicalSystem& sys);

}  // namespace made::chem
