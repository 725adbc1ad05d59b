#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <made/chem.hpp>
#include <made/geometry.hpp>
#include <made/hull.hpp>
#include <made/oracle.hpp>
#include <made/plugin.hpp>
#include <made/rng.hpp>

namespace made::policy {

struct HistoryRecord {
  int t = 0;                    // query index, 1-based
  chem::Structure structure;    // relaxed form
  double energy_per_atom = 0.0;
  double e_above_hull = 0.0;    // at evaluation time
  bool stable = false;
  bool novel = false;
};
using EvaluationHistory = std::vector<HistoryRecord>;

// Per-composition attempt bookkeeping for the diversity planner, keyed by
// reduced formula. A success is a stable AND novel evaluation.
struct PlannerState {
  struct Counts {
    int attempts = 0;
    int successes = 0;
    chem::Composition composition;  // reduced
  };
  std::map<std::string, Counts> by_formula;

  void record(const chem::Composition& c, bool success);
};

struct CandidateBatch {
  chem::Composition composition;
  std::vector<chem::Structure> structures;
  std::string provenance;
};

struct FilterSpec {
  double min_distance = 0.5;  // angstrom
  geo::MatchPolicy uniqueness;
  bool min_distance_enabled = true;
  bool uniqueness_enabled = true;
};

// Every structure the episode has seen (H_0, proposals, relaxed forms), with
// AMD fingerprints cached per entry and bucketed by reduced formula.
class StructureArchive {
 public:
  explicit StructureArchive(geo::MatchPolicy policy) : policy_(std::move(policy)) {}

  void add(const chem::Structure& s);
  // query_amd, when provided, must be the AMD of s at policy().amd_k; it
  // saves recomputation for callers probing the same structure repeatedly.
  bool contains_match(const chem::Structure& s,
                      const geo::AmdVector* query_amd = nullptr) const;
  // True when a match attempt for this reduced formula could succeed.
  bool has_candidates_for(const std::string& reduced_formula) const;
  size_t size() const { return size_; }
  const geo::MatchPolicy& policy() const { return policy_; }

 private:
  struct Entry {
    chem::Structure structure;
    mutable std::optional<geo::AmdVector> amd;  // computed on first use
  };
  const geo::AmdVector& entry_amd(const Entry& e) const;
  bool bucket_match(const std::vector<Entry>& bucket, const geo::AmdVector& amd) const;

  geo::MatchPolicy policy_;
  std::map<std::string, std::vector<Entry>> by_formula_;
  size_t size_ = 0;
};

// --- pipeline stage operations ---

chem::Composition plan_random(const std::vector<chem::Composition>& space, Rng& rng);

// argmax of w(c) * D(c) over the enumerated space; ties broken by
// lexicographic formula order. D(c) is the minimum Euclidean distance in
// composition-vector space to attempted compositions and elemental end
// members, masking references with the same reduced formula as c.
chem::Composition plan_diversity(const chem::ChemicalSystem& sys,
                                 const std::vector<chem::Composition>& space,
                                 const PlannerState& state);

// Exposed for tests: the weight applied to D(c).
double diversity_weight(const PlannerState& state, const chem::Composition& c);

// Lattice lengths U(3,15) A, angles U(60,120) deg, fractional coordinates
// U(0,1); invalid parameter draws are resampled.
chem::Structure random_structure(const chem::Composition& c, Rng& rng);
CandidateBatch generate_random(const chem::Composition& c, int n, Rng& rng);

CandidateBatch apply_filters(const CandidateBatch& batch, const FilterSpec& spec,
                             const StructureArchive& seen);

const chem::Structure& select_random(const CandidateBatch& batch, Rng& rng);

// Index of the pool structure minimizing
// screen_candidate(hull, composition, surrogate_energy); ties go to the
// earliest-generated structure. Throws std::runtime_error on an empty pool.
size_t select_surrogate(const std::vector<chem::Structure>& pool, oracle::Surrogate& surrogate,
                        const hull::HullState& h);

// --- policies ---

struct PolicyContext {
  const hull::HullState& hull;
  const EvaluationHistory& history;
  const StructureArchive& archive;
  int budget_remaining = 0;
};

class Policy {
 public:
  virtual ~Policy() = default;
  virtual chem::Structure propose(const PolicyContext& ctx) = 0;
  virtual void observe(const HistoryRecord& rec) { (void)rec; }
  // True when the previous propose() had to bypass the uniqueness filter.
  virtual bool last_was_fallback() const { return false; }
};

struct PolicySpec {
  std::string name;
  enum class Kind { pipeline, surrogate, external };
  Kind kind = Kind::pipeline;

  // pipeline
  std::string planner = "random";  // "random" | "diversity"
  int batch_size = 32;
  int retries = 8;
  FilterSpec filters;

  // surrogate selector (one-shot pregenerated pool over random compositions)
  int pool_size = 1024;
  double noise_sigma = 0.0;
  uint64_t noise_seed = 0;
  std::optional<int> surrogate_relax_max_steps;

  // external
  std::vector<std::string> command;
  double timeout_s = 300.0;
};

// base_oracle must be set for surrogate policies (the surrogate corrupts a
// copy of the episode oracle); throws std::invalid_argument otherwise.
std::unique_ptr<Policy> make_policy(const PolicySpec& spec, const chem::ChemicalSystem& sys,
                                    const std::optional<oracle::SyntheticOracleSpec>& base_oracle,
                                    uint64_t seed);

// Planner -> generator -> filters -> selector, one composition per query.
class PipelinePolicy : public Policy {
 public:
  PipelinePolicy(PolicySpec spec, chem::ChemicalSystem sys, uint64_t seed);

  chem::Structure propose(const PolicyContext& ctx) override;
  void observe(const HistoryRecord& rec) override;
  bool last_was_fallback() const override { return fallback_; }

 private:
  PolicySpec spec_;
  chem::ChemicalSystem sys_;
  std::vector<chem::Composition> space_;
  PlannerState state_;
  Rng rng_;
  bool fallback_ = false;
};

// No planner: a large pool is generated up front across random compositions,
// scored with the noisy surrogate against the live hull, and consumed
// greedily. Falls back to a filtered random proposal if the pool empties.
class SurrogatePolicy : public Policy {
 public:
  SurrogatePolicy(PolicySpec spec, chem::ChemicalSystem sys,
                  const oracle::SyntheticOracleSpec& base_oracle, uint64_t seed);

  chem::Structure propose(const PolicyContext& ctx) override;
  bool last_was_fallback() const override { return fallback_; }

 private:
  struct PoolEntry {
    chem::Structure structure;
    std::optional<geo::AmdVector> amd;  // cached at the uniqueness policy's k
  };
  PolicySpec spec_;
  chem::ChemicalSystem sys_;
  std::vector<chem::Composition> space_;
  std::vector<PoolEntry> pool_;  // generation order
  oracle::Surrogate surrogate_;
  Rng rng_;
  bool fallback_ = false;
};

// Wire protocol:
//   request:  {"type":"propose","id":<int>,"budget_remaining":<int>,
//              "epsilon":<float>,"elements":[...],"max_atoms":<int>,
//              "history":[{"structure":...,"energy_per_atom":...,
//                          "e_above_hull":...,"stable":...,"novel":...}],
//              "stable_set":[...]}
//   response: {"id":<int>,"structure":{...}}
// An invalid structure earns one re-prompt carrying an "error" field; a
// second failure aborts the episode.
class ExternalPolicy : public Policy {
 public:
  ExternalPolicy(PolicySpec spec, chem::ChemicalSystem sys);
  chem::Structure propose(const PolicyContext& ctx) override;

 private:
  chem::Structure request_once(const PolicyContext& ctx, const std::string& error);
  PolicySpec spec_;
  chem::ChemicalSystem sys_;
  plugin::PluginProcess proc_;
  int next_id_ = 1;
};

}  // namespace made::policy
