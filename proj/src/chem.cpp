#include <made/chem.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include <made/rng.hpp>

namespace made::chem {

namespace {

const char* kSymbols[118] = {
    "H",  "He", "Li", "Be", "B",  "C",  "N",  "O",  "F",  "Ne", "Na", "Mg", "Al", "Si", "P",
    "S",  "Cl", "Ar", "K",  "Ca", "Sc", "Ti", "V",  "Cr", "Mn", "Fe", "Co", "Ni", "Cu", "Zn",
    "Ga", "Ge", "As", "Se", "Br", "Kr", "Rb", "Sr", "Y",  "Zr", "Nb", "Mo", "Tc", "Ru", "Rh",
    "Pd", "Ag", "Cd", "In", "Sn", "Sb", "Te", "I",  "Xe", "Cs", "Ba", "La", "Ce", "Pr", "Nd",
    "Pm", "Sm", "Eu", "Gd", "Tb", "Dy", "Ho", "Er", "Tm", "Yb", "Lu", "Hf", "Ta", "W",  "Re",
    "Os", "Ir", "Pt", "Au", "Hg", "Tl", "Pb", "Bi", "Po", "At", "Rn", "Fr", "Ra", "Ac", "Th",
    "Pa", "U",  "Np", "Pu", "Am", "Cm", "Bk", "Cf", "Es", "Fm", "Md", "No", "Lr", "Rf", "Db",
    "Sg", "Bh", "Hs", "Mt", "Ds", "Rg", "Cn", "Nh", "Fl", "Mc", "Lv", "Ts", "Og"};

int z_from_symbol(const std::string& symbol) {
  for (int i = 0; i < 118; ++i) {
    if (symbol == kSymbols[i]) return i + 1;
  }
  return 0;
}

void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw std::invalid_argument(std::string(what) + " is not finite");
}

}  // namespace

Element element_from_symbol(const std::string& symbol) {
  const int z = z_from_symbol(symbol);
  if (z == 0) throw std::invalid_argument("unknown element symbol: " + symbol);
  return Element{symbol, z};
}

Element element_from_z(int atomic_number) {
  if (atomic_number < 1 || atomic_number > 118)
    throw std::invalid_argument("atomic number out of range: " + std::to_string(atomic_number));
  return Element{kSymbols[atomic_number - 1], atomic_number};
}

bool is_known_symbol(const std::string& symbol) { return z_from_symbol(symbol) != 0; }

Composition::Composition(std::map<int, int> counts) : counts_(std::move(counts)) {
  if (counts_.empty()) throw std::invalid_argument("composition must have at least one element");
  for (const auto& [z, n] : counts_) {
    element_from_z(z);
    if (n < 1) throw std::invalid_argument("composition counts must be >= 1");
  }
}

int Composition::total_atoms() const {
  int total = 0;
  for (const auto& [z, n] : counts_) total += n;
  return total;
}

Composition Composition::reduced() const {
  int g = 0;
  for (const auto& [z, n] : counts_) g = std::gcd(g, n);
  std::map<int, int> out;
  for (const auto& [z, n] : counts_) out[z] = n / g;
  return Composition(std::move(out));
}

std::string Composition::formula() const {
  std::vector<std::pair<std::string, int>> parts;
  parts.reserve(counts_.size());
  for (const auto& [z, n] : counts_) parts.emplace_back(kSymbols[z - 1], n);
  std::sort(parts.begin(), parts.end());
  std::string out;
  for (const auto& [sym, n] : parts) {
    out += sym;
    if (n > 1) out += std::to_string(n);
  }
  return out;
}

std::optional<int> ChemicalSystem::index_of(int z) const {
  for (size_t i = 0; i < elements.size(); ++i) {
    if (elements[i].atomic_number == z) return static_cast<int>(i);
  }
  return std::nullopt;
}

std::string ChemicalSystem::name() const {
  std::string out;
  for (size_t i = 0; i < elements.size(); ++i) {
    if (i) out += "-";
    out += elements[i].symbol;
  }
  return out;
}

ChemicalSystem make_system(const std::vector<std::string>& symbols, int max_atoms) {
  if (symbols.size() < 2) throw std::invalid_argument("chemical system needs >= 2 elements");
  ChemicalSystem sys;
  std::set<int> seen;
  for (const auto& s : symbols) {
    Element e = element_from_symbol(s);
    if (!seen.insert(e.atomic_number).second)
      throw std::invalid_argument("duplicate element in system: " + s);
    sys.elements.push_back(e);
  }
  if (max_atoms < static_cast<int>(symbols.size()))
    throw std::invalid_argument("max_atoms must be >= number of elements");
  sys.max_atoms = max_atoms;
  return sys;
}

Lattice::Lattice(const Mat3& rows) : rows_(rows) {
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) require_finite(rows.m[i][j], "lattice entry");
  if (rows_.det() <= 0.0) throw std::invalid_argument("lattice must be right-handed with positive volume");
  for (int i = 0; i < 3; ++i) {
    if (rows_.row(i).norm() <= 0.0) throw std::invalid_argument("lattice vector has zero length");
  }
}

Lattice Lattice::from_parameters(double a, double b, double c, double alpha_deg,
                                 double beta_deg, double gamma_deg) {
  const double deg = M_PI / 180.0;
  const double ca = std::cos(alpha_deg * deg);
  const double cb = std::cos(beta_deg * deg);
  const double cg = std::cos(gamma_deg * deg);
  const double sg = std::sin(gamma_deg * deg);
  if (sg <= 1e-12) throw std::domain_error("gamma too close to 0 or 180 degrees");
  const double cx = c * cb;
  const double cy = c * (ca - cb * cg) / sg;
  const double cz2 = c * c - cx * cx - cy * cy;
  if (cz2 <= 0.0) throw std::domain_error("lattice parameters do not close a cell");
  Mat3 m;
  m.set_row(0, {a, 0.0, 0.0});
  m.set_row(1, {b * cg, b * sg, 0.0});
  m.set_row(2, {cx, cy, std::sqrt(cz2)});
  return Lattice(m);
}

std::array<double, 3> Lattice::lengths() const {
  return {rows_.row(0).norm(), rows_.row(1).norm(), rows_.row(2).norm()};
}

std::array<double, 3> Lattice::perpendicular_widths() const {
  const double v = volume();
  const Vec3 a = rows_.row(0), b = rows_.row(1), c = rows_.row(2);
  return {v / b.cross(c).norm(), v / c.cross(a).norm(), v / a.cross(b).norm()};
}

namespace {

double wrap01(double v) {
  double w = v - std::floor(v);
  if (w >= 1.0) w = 0.0;  // tiny negatives wrap to 1.0 exactly
  return w;
}

}  // namespace

Structure::Structure(Lattice lattice, std::vector<Element> species, std::vector<Vec3> frac_coords)
    : lattice_(std::move(lattice)), species_(std::move(species)), frac_coords_(std::move(frac_coords)) {
  if (species_.empty()) throw std::invalid_argument("structure must have at least one atom");
  if (species_.size() != frac_coords_.size())
    throw std::invalid_argument("species and frac_coords length mismatch");
  for (auto& f : frac_coords_) {
    require_finite(f.x, "frac coord");
    require_finite(f.y, "frac coord");
    require_finite(f.z, "frac coord");
    f = {wrap01(f.x), wrap01(f.y), wrap01(f.z)};
  }
}

Composition Structure::composition() const {
  std::map<int, int> counts;
  for (const auto& e : species_) counts[e.atomic_number]++;
  return Composition(std::move(counts));
}

Structure Structure::with_coords(std::vector<Vec3> frac) const {
  return Structure(lattice_, species_, std::move(frac));
}

std::vector<double> composition_vector(const Composition& c, const ChemicalSystem& sys) {
  std::vector<double> x(sys.elements.size(), 0.0);
  const double total = c.total_atoms();
  for (const auto& [z, n] : c.counts()) {
    auto idx = sys.index_of(z);
    if (!idx) throw std::domain_error("composition element " + element_from_z(z).symbol +
                                      " outside system " + sys.name());
    x[*idx] = n / total;
  }
  return x;
}

Composition reduce(const Composition& c) { return c.reduced(); }

std::vector<Composition> enumerate_compositions(const ChemicalSystem& sys) {
  const int d = sys.size();
  std::vector<Composition> out;
  std::vector<int> counts(d, 0);
  // Lexicographically ascending count tuples for each total.
  auto emit = [&](auto&& self, int pos, int remaining) -> void {
    if (pos == d - 1) {
      counts[pos] = remaining;
      int nonzero = 0;
      for (int v : counts) nonzero += v > 0 ? 1 : 0;
      if (nonzero >= 2) {
        std::map<int, int> m;
        for (int i = 0; i < d; ++i)
          if (counts[i] > 0) m[sys.elements[i].atomic_number] = counts[i];
        out.push_back(Composition(std::move(m)));
      }
      return;
    }
    for (int v = 0; v <= remaining; ++v) {
      counts[pos] = v;
      self(self, pos + 1, remaining - v);
    }
  };
  for (int total = 2; total <= sys.max_atoms; ++total) emit(emit, 0, total);
  return out;
}

double min_image_distance(const Structure& s, size_t i, size_t j) {
  if (i >= s.num_atoms() || j >= s.num_atoms())
    throw std::out_of_range("atom index out of range");
  const Lattice& lat = s.lattice();

  Vec3 df = s.frac_coords()[j] - s.frac_coords()[i];
  df = {df.x - std::round(df.x), df.y - std::round(df.y), df.z - std::round(df.z)};
  Vec3 d0 = lat.cartesian(df);

  const bool self_pair = (i == j);
  double bound = d0.norm();
  if (self_pair || bound == 0.0) {
    auto lens = lat.lengths();
    bound = std::min({lens[0], lens[1], lens[2]});
    if (!self_pair) return 0.0;  // distinct atoms coincide
  }

  const auto w = lat.perpendicular_widths();
  int n0 = static_cast<int>(std::ceil(2.0 * bound / w[0])) + 1;
  int n1 = static_cast<int>(std::ceil(2.0 * bound / w[1])) + 1;
  int n2 = static_cast<int>(std::ceil(2.0 * bound / w[2])) + 1;

  double best2 = self_pair ? bound * bound : d0.norm2();
  for (int l = -n0; l <= n0; ++l) {
    for (int m = -n1; m <= n1; ++m) {
      for (int n = -n2; n <= n2; ++n) {
        if (self_pair && l == 0 && m == 0 && n == 0) continue;
        const Vec3 t = lat.cartesian({double(l), double(m), double(n)});
        const double d2 = (d0 + t).norm2();
        if (d2 < best2) best2 = d2;
      }
    }
  }
  return std::sqrt(best2);
}

double composition_l1(const Composition& a, const Composition& b, const ChemicalSystem& sys) {
  const auto xa = composition_vector(a, sys);
  const auto xb = composition_vector(b, sys);
  double d = 0.0;
  for (size_t i = 0; i < xa.size(); ++i) d += std::abs(xa[i] - xb[i]);
  return d;
}

nlohmann::json structure_to_json(const Structure& s) {
  nlohmann::json j;
  auto& lat = j["lattice"];
  for (int i = 0; i < 3; ++i)
    lat.push_back({s.lattice().rows().m[i][0], s.lattice().rows().m[i][1], s.lattice().rows().m[i][2]});
  auto& sp = j["species"];
  for (const auto& e : s.species()) sp.push_back(e.symbol);
  auto& fc = j["frac_coords"];
  for (const auto& f : s.frac_coords()) fc.push_back({f.x, f.y, f.z});
  return j;
}

Structure structure_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("lattice") || !j.contains("species") || !j.contains("frac_coords"))
    throw std::invalid_argument("structure object needs lattice, species, frac_coords");
  Mat3 m;
  const auto& lat = j.at("lattice");
  if (!lat.is_array() || lat.size() != 3) throw std::invalid_argument("lattice must be a 3x3 array");
  for (int i = 0; i < 3; ++i) {
    if (!lat[i].is_array() || lat[i].size() != 3)
      throw std::invalid_argument("lattice must be a 3x3 array");
    for (int k = 0; k < 3; ++k) m.m[i][k] = lat[i][k].get<double>();
  }
  std::vector<Element> species;
  for (const auto& s : j.at("species")) species.push_back(element_from_symbol(s.get<std::string>()));
  std::vector<Vec3> coords;
  for (const auto& f : j.at("frac_coords")) {
    if (!f.is_array() || f.size() != 3) throw std::invalid_argument("frac_coords entries must be 3-vectors");
    coords.push_back({f[0].get<double>(), f[1].get<double>(), f[2].get<double>()});
  }
  return Structure(Lattice(m), std::move(species), std::move(coords));
}

std::vector<Structure> load_structure_set(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open structure set: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("parse error in " + path + ": " + e.what());
  }
  if (!j.is_array()) throw std::runtime_error("structure set must be a JSON array: " + path);
  std::vector<Structure> out;
  for (size_t i = 0; i < j.size(); ++i) {
    try {
      out.push_back(structure_from_json(j[i]));
    } catch (const std::exception& e) {
      throw std::runtime_error("record " + std::to_string(i) + " in " + path + ": " + e.what());
    }
  }
  return out;
}

void save_structure_set(const std::string& path, const std::vector<Structure>& structures) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& s : structures) j.push_back(structure_to_json(s));
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write structure set: " + path);
  out << j.dump() << "\n";
}

uint64_t structure_hash(const Structure& s) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (int i = 0; i < 3; ++i)
    for (int k = 0; k < 3; ++k) h = hash_double(s.lattice().rows().m[i][k], h);
  for (const auto& e : s.species()) {
    uint64_t z = static_cast<uint64_t>(e.atomic_number);
    h = fnv1a(&z, sizeof(z), h);
  }
  for (const auto& f : s.frac_coords()) {
    h = hash_double(f.x, h);
    h = hash_double(f.y, h);
    h = hash_double(f.z, h);
  }
  return h;
}

void validate_in_system(const Structure& s, const ChemicalSystem& sys) {
  for (const auto& e : s.species()) {
    if (!sys.index_of(e.atomic_number))
      throw std::domain_error("structure element " + e.symbol + " outside system " + sys.name());
  }
  if (static_cast<int>(s.num_atoms()) > sys.max_atoms)
    throw std::domain_error("structure exceeds max atoms for system " + sys.name());
}

}  // namespace made::chem
