#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <vector>

#include <made/chem.hpp>
#include <made/plugin.hpp>
#include <made/vec3.hpp>

namespace made::oracle {

// FIRE parameters (Bitzek et al. values) plus the displacement cap applied
// by the ASE-style optimizer loop.
struct RelaxSpec {
  int max_steps = 500;
  double fmax = 0.02;  // eV/angstrom
  double dt_initial = 0.1;
  double dt_max = 1.0;
  double alpha_start = 0.1;
  double f_inc = 1.1;
  double f_dec = 0.5;
  int n_min = 5;
  double f_alpha = 0.99;
  double max_step = 0.2;  // cap on |dr| per step, angstrom
};

struct PairParams {
  double well_depth;  // D_e, eV
  double r_eq;        // r_e, angstrom
  double width;       // a, 1/angstrom
};

// Deterministic synthetic oracle: Morse pair potential with per-element-pair
// parameters derived from the seed, truncated and shifted to zero at the
// cutoff, positions-only FIRE relaxation, elemental FCC references.
struct SyntheticOracleSpec {
  uint64_t seed = 0;
  double cutoff = 8.0;  // must cover 2x the largest possible r_eq
  RelaxSpec relax;
};

// Pure function of (seed, unordered element pair):
// D_e in [0.2, 1.0] eV, r_e in [2.2, 3.4] A, a in [1.0, 2.0] 1/A.
PairParams pair_params(uint64_t seed, int z1, int z2);

struct EnergyForces {
  double energy = 0.0;              // total, eV
  std::vector<Vec3> forces;         // eV/angstrom, analytic negative gradient
};

EnergyForces pair_energy_and_forces(const chem::Structure& s, const SyntheticOracleSpec& spec);

struct RelaxResult {
  chem::Structure relaxed;
  double energy = 0.0;  // total energy of relaxed, eV
  int steps_used = 0;
  bool converged = false;
};

// Positions-only FIRE descent at fixed cell. Returns the lowest-energy state
// seen, so energy(relaxed) <= energy(input) holds for any input; aborts on
// non-finite energies/forces with converged=false.
RelaxResult relax(const chem::Structure& s, const SyntheticOracleSpec& spec);

struct OracleResult {
  double energy_per_atom = 0.0;  // formation energy, eV/atom
  chem::Structure relaxed;
  int steps_used = 0;
  bool converged = false;
};

// Oracle interface of the environment; substitutable by external plugins.
class Oracle {
 public:
  virtual ~Oracle() = default;
  virtual OracleResult evaluate(const chem::Structure& s) = 0;
};

class SyntheticOracle : public Oracle {
 public:
  explicit SyntheticOracle(SyntheticOracleSpec spec);

  OracleResult evaluate(const chem::Structure& s) override;

  // Per-atom energy of the relaxed canonical elemental FCC cell; cached.
  double reference_energy(int z);
  chem::Structure reference_structure(int z) const;

  const SyntheticOracleSpec& spec() const { return spec_; }

 private:
  SyntheticOracleSpec spec_;
  std::map<int, double> mu_;
};

OracleResult formation_energy(const chem::Structure& s, const SyntheticOracleSpec& spec);

// Noise-corrupted copy of the base oracle standing in for a lower-fidelity
// surrogate. Noise is keyed on (noise_seed, structure content hash), so
// repeated queries for the same structure agree.
struct SurrogateSpec {
  SyntheticOracleSpec base;
  double noise_sigma = 0.0;  // eV/atom
  uint64_t noise_seed = 0;
};

double surrogate_energy(const chem::Structure& s, const SurrogateSpec& spec);

// Caching wrapper used by selectors that re-rank a fixed pool.
class Surrogate {
 public:
  explicit Surrogate(SurrogateSpec spec) : spec_(std::move(spec)) {}
  double energy(const chem::Structure& s);
  const SurrogateSpec& spec() const { return spec_; }

 private:
  SurrogateSpec spec_;
  std::map<uint64_t, double> cache_;
};

// One evaluate request per call over the line-delimited JSON protocol:
//   request:  {"type":"evaluate","id":<int>,"structure":{...}}
//   response: {"id":<int>,"energy_per_atom":<float>,
//              "relaxed_structure":{...}?, "converged":<bool>?}
class ExternalOracle : public Oracle {
 public:
  ExternalOracle(std::vector<std::string> command, double timeout_s = 300.0);
  OracleResult evaluate(const chem::Structure& s) override;

 private:
  plugin::PluginProcess proc_;
  int next_id_ = 1;
};

}  // namespace made::oracle
