#include <made/oracle.hpp>

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <made/rng.hpp>

namespace made::oracle {

using chem::Structure;

PairParams pair_params(uint64_t seed, int z1, int z2) {
  const uint64_t zlo = static_cast<uint64_t>(std::min(z1, z2));
  const uint64_t zhi = static_cast<uint64_t>(std::max(z1, z2));
  uint64_t s = derive_seed(seed, {zlo, zhi});
  auto unit = [&s]() { return static_cast<double>(splitmix64(s) >> 11) * 0x1.0p-53; };
  PairParams p;
  p.well_depth = 0.2 + 0.8 * unit();
  p.r_eq = 2.2 + 1.2 * unit();
  p.width = 1.0 + 1.0 * unit();
  return p;
}

namespace {

double morse(const PairParams& p, double r) {
  const double e = std::exp(-p.width * (r - p.r_eq));
  const double q = 1.0 - e;
  return p.well_depth * (q * q - 1.0);
}

double morse_deriv(const PairParams& p, double r) {
  const double e = std::exp(-p.width * (r - p.r_eq));
  return 2.0 * p.well_depth * p.width * e * (1.0 - e);
}

// Fixed-lattice evaluator: image translations and per-pair parameters are
// computed once and reused across relaxation steps.
class MorseEvaluator {
 public:
  MorseEvaluator(const Structure& s, const SyntheticOracleSpec& spec)
      : cutoff_(spec.cutoff), n_atoms_(s.num_atoms()) {
    const auto& lat = s.lattice();
    const auto w = lat.perpendicular_widths();
    const int n0 = static_cast<int>(std::ceil(cutoff_ / w[0])) + 1;
    const int n1 = static_cast<int>(std::ceil(cutoff_ / w[1])) + 1;
    const int n2 = static_cast<int>(std::ceil(cutoff_ / w[2])) + 1;
    for (int l = -n0; l <= n0; ++l) {
      for (int m = -n1; m <= n1; ++m) {
        for (int n = -n2; n <= n2; ++n) {
          const Vec3 t = lat.cartesian({double(l), double(m), double(n)});
          if (l == 0 && m == 0 && n == 0) continue;
          images_.push_back(t);
          // Half space for self interactions: each {T, -T} pair once.
          if (l > 0 || (l == 0 && (m > 0 || (m == 0 && n > 0)))) half_images_.push_back(t);
        }
      }
    }
    params_.resize(n_atoms_ * n_atoms_);
    shift_.resize(n_atoms_ * n_atoms_);
    for (size_t i = 0; i < n_atoms_; ++i) {
      for (size_t j = 0; j < n_atoms_; ++j) {
        const auto p = pair_params(spec.seed, s.species()[i].atomic_number,
                                   s.species()[j].atomic_number);
        params_[i * n_atoms_ + j] = p;
        shift_[i * n_atoms_ + j] = morse(p, cutoff_);
      }
    }
  }

  EnergyForces evaluate(const std::vector<Vec3>& pos) const {
    EnergyForces out;
    out.forces.assign(n_atoms_, Vec3{});
    const double rc2 = cutoff_ * cutoff_;

    auto accumulate = [&](size_t i, size_t j, const Vec3& delta, bool with_force) {
      const double r2 = delta.norm2();
      if (r2 > rc2 || r2 == 0.0) return;
      const auto& p = params_[i * n_atoms_ + j];
      const double r = std::sqrt(r2);
      out.energy += morse(p, r) - shift_[i * n_atoms_ + j];
      if (with_force) {
        const Vec3 f = (morse_deriv(p, r) / r) * delta;
        out.forces[i] += f;
        out.forces[j] -= f;
      }
    };

    for (size_t i = 0; i < n_atoms_; ++i) {
      for (size_t j = i + 1; j < n_atoms_; ++j) {
        accumulate(i, j, pos[j] - pos[i], true);
        for (const auto& t : images_) accumulate(i, j, pos[j] + t - pos[i], true);
      }
      // Self images: energy only; force contributions of +-T cancel exactly.
      for (const auto& t : half_images_) {
        const double r2 = t.norm2();
        if (r2 > rc2) continue;
        const auto& p = params_[i * n_atoms_ + i];
        out.energy += morse(p, std::sqrt(r2)) - shift_[i * n_atoms_ + i];
      }
    }
    return out;
  }

 private:
  double cutoff_;
  size_t n_atoms_;
  std::vector<Vec3> images_;       // all T != 0 within range
  std::vector<Vec3> half_images_;  // one of each {T, -T}
  std::vector<PairParams> params_;
  std::vector<double> shift_;
};

std::vector<Vec3> cartesian_coords(const Structure& s) {
  std::vector<Vec3> pos(s.num_atoms());
  for (size_t i = 0; i < s.num_atoms(); ++i) pos[i] = s.cartesian(i);
  return pos;
}

std::vector<Vec3> to_frac(const Structure& s, const std::vector<Vec3>& pos) {
  // Invert the row-vector lattice: frac = cart * L^-1.
  const Mat3& m = s.lattice().rows();
  const double det = m.det();
  Mat3 inv;
  inv.m[0][0] = (m.m[1][1] * m.m[2][2] - m.m[1][2] * m.m[2][1]) / det;
  inv.m[1][0] = -(m.m[1][0] * m.m[2][2] - m.m[1][2] * m.m[2][0]) / det;
  inv.m[2][0] = (m.m[1][0] * m.m[2][1] - m.m[1][1] * m.m[2][0]) / det;
  inv.m[0][1] = -(m.m[0][1] * m.m[2][2] - m.m[0][2] * m.m[2][1]) / det;
  inv.m[1][1] = (m.m[0][0] * m.m[2][2] - m.m[0][2] * m.m[2][0]) / det;
  inv.m[2][1] = -(m.m[0][0] * m.m[2][1] - m.m[0][1] * m.m[2][0]) / det;
  inv.m[0][2] = (m.m[0][1] * m.m[1][2] - m.m[0][2] * m.m[1][1]) / det;
  inv.m[1][2] = -(m.m[0][0] * m.m[1][2] - m.m[0][2] * m.m[1][0]) / det;
  inv.m[2][2] = (m.m[0][0] * m.m[1][1] - m.m[0][1] * m.m[1][0]) / det;
  std::vector<Vec3> frac(pos.size());
  for (size_t i = 0; i < pos.size(); ++i) frac[i] = inv.row_times(pos[i]);
  return frac;
}

double max_force_norm(const EnergyForces& ef) {
  double m = 0.0;
  for (const auto& f : ef.forces) m = std::max(m, f.norm());
  return m;
}

bool all_finite(const EnergyForces& ef) {
  if (!std::isfinite(ef.energy)) return false;
  for (const auto& f : ef.forces)
    if (!std::isfinite(f.x) || !std::isfinite(f.y) || !std::isfinite(f.z)) return false;
  return true;
}

}  // namespace

EnergyForces pair_energy_and_forces(const Structure& s, const SyntheticOracleSpec& spec) {
  return MorseEvaluator(s, spec).evaluate(cartesian_coords(s));
}

RelaxResult relax(const Structure& s, const SyntheticOracleSpec& spec) {
  const RelaxSpec& rs = spec.relax;
  const MorseEvaluator eval(s, spec);
  std::vector<Vec3> pos = cartesian_coords(s);

  EnergyForces ef = eval.evaluate(pos);
  if (!all_finite(ef)) return {s, 0.0, 0, false};

  struct State {
    std::vector<Vec3> pos;
    double energy;
    double fmax;
  };
  State best{pos, ef.energy, max_force_norm(ef)};

  auto finish = [&](const State& st, int steps) {
    return RelaxResult{s.with_coords(to_frac(s, st.pos)), st.energy, steps, st.fmax < rs.fmax};
  };

  if (best.fmax < rs.fmax) return finish(best, 0);

  std::vector<Vec3> vel(pos.size(), Vec3{});
  double dt = rs.dt_initial;
  double alpha = rs.alpha_start;
  int n_pos = 0;

  for (int step = 1; step <= rs.max_steps; ++step) {
    double power = 0.0;
    for (size_t i = 0; i < pos.size(); ++i) power += ef.forces[i].dot(vel[i]);

    if (power > 0.0) {
      ++n_pos;
      if (n_pos > rs.n_min) {
        dt = std::min(dt * rs.f_inc, rs.dt_max);
        alpha *= rs.f_alpha;
      }
      double vnorm2 = 0.0, fnorm2 = 0.0;
      for (size_t i = 0; i < pos.size(); ++i) {
        vnorm2 += vel[i].norm2();
        fnorm2 += ef.forces[i].norm2();
      }
      const double scale = fnorm2 > 0.0 ? std::sqrt(vnorm2 / fnorm2) : 0.0;
      for (size_t i = 0; i < pos.size(); ++i)
        vel[i] = (1.0 - alpha) * vel[i] + alpha * scale * ef.forces[i];
    } else {
      for (auto& v : vel) v = Vec3{};
      alpha = rs.alpha_start;
      dt *= rs.f_dec;
      n_pos = 0;
    }

    double dr_norm2 = 0.0;
    for (size_t i = 0; i < pos.size(); ++i) {
      vel[i] += dt * ef.forces[i];
      dr_norm2 += (dt * dt) * vel[i].norm2();
    }
    double cap = 1.0;
    const double dr_norm = std::sqrt(dr_norm2);
    if (dr_norm > rs.max_step) cap = rs.max_step / dr_norm;
    for (size_t i = 0; i < pos.size(); ++i) pos[i] += (dt * cap) * vel[i];

    ef = eval.evaluate(pos);
    if (!all_finite(ef)) return finish(best, step);

    const State cur{pos, ef.energy, max_force_norm(ef)};
    if (cur.energy < best.energy) best = cur;
    if (cur.fmax < rs.fmax)
      return finish(cur.energy <= best.energy ? cur : best, step);
  }
  return finish(best, rs.max_steps);
}

SyntheticOracle::SyntheticOracle(SyntheticOracleSpec spec) : spec_(std::move(spec)) {
  // Largest possible r_eq is 3.4 A; the cutoff must cover twice that.
  if (spec_.cutoff < 6.8)
    throw std::invalid_argument("oracle cutoff must be >= 6.8 angstrom");
}

chem::Structure SyntheticOracle::reference_structure(int z) const {
  const auto p = pair_params(spec_.seed, z, z);
  const double a = std::sqrt(2.0) * p.r_eq;  // nearest neighbor at r_eq
  Mat3 m;
  m.set_row(0, {a, 0.0, 0.0});
  m.set_row(1, {0.0, a, 0.0});
  m.set_row(2, {0.0, 0.0, a});
  const chem::Element el = chem::element_from_z(z);
  return Structure(chem::Lattice(m), {el, el, el, el},
                   {{0.0, 0.0, 0.0}, {0.0, 0.5, 0.5}, {0.5, 0.0, 0.5}, {0.5, 0.5, 0.0}});
}

double SyntheticOracle::reference_energy(int z) {
  auto it = mu_.find(z);
  if (it != mu_.end()) return it->second;
  const auto ref = reference_structure(z);
  const auto r = relax(ref, spec_);
  const double mu = r.energy / double(ref.num_atoms());
  mu_.emplace(z, mu);
  return mu;
}

OracleResult SyntheticOracle::evaluate(const Structure& s) {
  const auto r = relax(s, spec_);
  const double n = double(s.num_atoms());
  double reference = 0.0;
  for (const auto& [z, count] : s.composition().counts())
    reference += (count / n) * reference_energy(z);

  return OracleResult{r.energy / n - reference, r.relaxed, r.steps_used, r.converged};
}

OracleResult formation_energy(const Structure& s, const SyntheticOracleSpec& spec) {
  SyntheticOracle oracle(spec);
  return oracle.evaluate(s);
}

double surrogate_energy(const Structure& s, const SurrogateSpec& spec) {
  const double base = formation_energy(s, spec.base).energy_per_atom;
  if (spec.noise_sigma == 0.0) return base;
  Rng rng(derive_seed(spec.noise_seed, {chem::structure_hash(s)}));
  return base + spec.noise_sigma * rng.normal();
}

double Surrogate::energy(const chem::Structure& s) {
  const uint64_t h = chem::structure_hash(s);
  auto it = cache_.find(h);
  if (it != cache_.end()) return it->second;
  const double e = surrogate_energy(s, spec_);
  cache_.emplace(h, e);
  return e;
}

ExternalOracle::ExternalOracle(std::vector<std::string> command, double timeout_s)
    : proc_(std::move(command), timeout_s) {}

OracleResult ExternalOracle::evaluate(const Structure& s) {
  const int id = next_id_++;
  nlohmann::json req;
  req["type"] = "evaluate";
  req["id"] = id;
  req["structure"] = chem::structure_to_json(s);
  const auto resp = proc_.request(req);

  auto fail = [&](const std::string& why) -> std::runtime_error {
    return std::runtime_error("oracle plugin response invalid (" + why +
                              "); payload: " + resp.dump());
  };
  if (!resp.is_object() || !resp.contains("id") || !resp.contains("energy_per_atom"))
    throw fail("missing id or energy_per_atom");
  if (resp.at("id").get<int>() != id) throw fail("id mismatch");
  const double e = resp.at("energy_per_atom").get<double>();
  if (!std::isfinite(e)) throw fail("non-finite energy");

  if (resp.contains("relaxed_structure")) {
    try {
      return OracleResult{e, chem::structure_from_json(resp.at("relaxed_structure")), 0,
                          resp.value("converged", true)};
    } catch (const std::exception& e2) {
      throw fail(std::string("bad relaxed_structure: ") + e2.what());
    }
  }
  return OracleResult{e, s, 0, resp.value("converged", true)};
}

}  // namespace made::oracle
