#include <made/policy.hpp>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace made::policy {

using chem::Composition;
using chem::Structure;

void PlannerState::record(const Composition& c, bool success) {
  const Composition red = c.reduced();
  auto& counts = by_formula.try_emplace(red.formula(), Counts{0, 0, red}).first->second;
  counts.attempts += 1;
  if (success) counts.successes += 1;
}

void StructureArchive::add(const Structure& s) {
  by_formula_[s.composition().reduced_formula()].push_back({s, std::nullopt});
  ++size_;
}

const geo::AmdVector& StructureArchive::entry_amd(const Entry& e) const {
  if (!e.amd) e.amd = geo::amd(e.structure, policy_.amd_k);
  return *e.amd;
}

bool StructureArchive::bucket_match(const std::vector<Entry>& bucket,
                                    const geo::AmdVector& query) const {
  for (const auto& e : bucket) {
    if (geo::amd_linf(entry_amd(e), query) <= policy_.amd_tol) return true;
  }
  return false;
}

bool StructureArchive::has_candidates_for(const std::string& reduced_formula) const {
  if (!policy_.require_same_reduced_formula) return size_ > 0;
  auto it = by_formula_.find(reduced_formula);
  return it != by_formula_.end() && !it->second.empty();
}

bool StructureArchive::contains_match(const Structure& s,
                                      const geo::AmdVector* query_amd) const {
  std::optional<geo::AmdVector> computed;
  auto query = [&]() -> const geo::AmdVector& {
    if (query_amd) return *query_amd;
    if (!computed) computed = geo::amd(s, policy_.amd_k);
    return *computed;
  };
  if (policy_.require_same_reduced_formula) {
    auto it = by_formula_.find(s.composition().reduced_formula());
    if (it == by_formula_.end()) return false;
    return bucket_match(it->second, query());
  }
  for (const auto& [formula, bucket] : by_formula_) {
    if (bucket_match(bucket, query())) return true;
  }
  return false;
}

Composition plan_random(const std::vector<Composition>& space, Rng& rng) {
  if (space.empty()) throw std::runtime_error("empty composition space");
  return space[rng.uniform_int(space.size())];
}

namespace {

constexpr double kAlpha = 0.7;
constexpr double kBeta = 0.3;
constexpr double kUnattemptedWeight = 5.0;

double euclid(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

}  // namespace

double diversity_weight(const PlannerState& state, const Composition& c) {
  auto it = state.by_formula.find(c.reduced_formula());
  if (it == state.by_formula.end() || it->second.attempts == 0) return kUnattemptedWeight;
  const double n = it->second.attempts;
  const double r = double(it->second.successes) / n;
  return kAlpha / (n + 1.0) + kBeta * (1.0 - r);
}

Composition plan_diversity(const chem::ChemicalSystem& sys,
                           const std::vector<Composition>& space,
                           const PlannerState& state) {
  if (space.empty()) throw std::runtime_error("empty composition space");
  const int d = sys.size();

  // Reference set: attempted compositions plus elemental end members, each
  // tagged with its reduced formula so candidates can mask themselves out.
  struct Ref {
    std::vector<double> x;
    std::string reduced;
  };
  std::vector<Ref> refs;
  for (int i = 0; i < d; ++i) {
    std::vector<double> x(d, 0.0);
    x[i] = 1.0;
    refs.push_back({std::move(x), sys.elements[i].symbol});
  }
  for (const auto& [formula, counts] : state.by_formula)
    refs.push_back({composition_vector(counts.composition, sys), formula});

  const Composition* best = nullptr;
  std::string best_formula;
  double best_score = -1.0;
  for (const auto& c : space) {
    const auto x = composition_vector(c, sys);
    const std::string reduced = c.reduced_formula();
    double dist = std::numeric_limits<double>::infinity();
    for (const auto& r : refs) {
      if (r.reduced == reduced) continue;
      dist = std::min(dist, euclid(x, r.x));
    }
    const double score = diversity_weight(state, c) * dist;
    const std::string formula = c.formula();
    if (score > best_score || (score == best_score && formula < best_formula)) {
      best = &c;
      best_formula = formula;
      best_score = score;
    }
  }
  return *best;
}

Structure random_structure(const Composition& c, Rng& rng) {
  for (;;) {
    const double a = rng.uniform(3.0, 15.0);
    const double b = rng.uniform(3.0, 15.0);
    const double cl = rng.uniform(3.0, 15.0);
    const double alpha = rng.uniform(60.0, 120.0);
    const double beta = rng.uniform(60.0, 120.0);
    const double gamma = rng.uniform(60.0, 120.0);
    chem::Lattice lattice;
    try {
      lattice = chem::Lattice::from_parameters(a, b, cl, alpha, beta, gamma);
    } catch (const std::domain_error&) {
      continue;  // parameters do not close a cell; resample
    }
    std::vector<chem::Element> species;
    for (const auto& [z, n] : c.counts())
      for (int i = 0; i < n; ++i) species.push_back(chem::element_from_z(z));
    std::vector<Vec3> coords(species.size());
    for (auto& f : coords) f = {rng.uniform(), rng.uniform(), rng.uniform()};
    return Structure(lattice, std::move(species), std::move(coords));
  }
}

CandidateBatch generate_random(const Composition& c, int n, Rng& rng) {
  if (n < 1) throw std::invalid_argument("batch size must be >= 1");
  CandidateBatch batch{c, {}, "random"};
  batch.structures.reserve(n);
  for (int i = 0; i < n; ++i) batch.structures.push_back(random_structure(c, rng));
  return batch;
}

CandidateBatch apply_filters(const CandidateBatch& batch, const FilterSpec& spec,
                             const StructureArchive& seen) {
  CandidateBatch out{batch.composition, {}, batch.provenance};
  for (const auto& s : batch.structures) {
    if (spec.min_distance_enabled && geo::has_pair_below(s, spec.min_distance)) continue;
    if (spec.uniqueness_enabled && seen.contains_match(s)) continue;
    out.structures.push_back(s);
  }
  return out;
}

const Structure& select_random(const CandidateBatch& batch, Rng& rng) {
  if (batch.structures.empty()) throw std::runtime_error("empty candidate batch");
  return batch.structures[rng.uniform_int(batch.structures.size())];
}

size_t select_surrogate(const std::vector<Structure>& pool, oracle::Surrogate& surrogate,
                        const hull::HullState& h) {
  if (pool.empty()) throw std::runtime_error("empty candidate pool");
  size_t best = 0;
  double best_score = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < pool.size(); ++i) {
    const auto x = chem::composition_vector(pool[i].composition(), h.system());
    const double score = h.screen_candidate(x, surrogate.energy(pool[i]));
    if (score < best_score) {
      best_score = score;
      best = i;
    }
  }
  return best;
}

PipelinePolicy::PipelinePolicy(PolicySpec spec, chem::ChemicalSystem sys, uint64_t seed)
    : spec_(std::move(spec)),
      sys_(std::move(sys)),
      space_(chem::enumerate_compositions(sys_)),
      rng_(seed) {
  if (space_.empty()) throw std::runtime_error("empty composition space for " + sys_.name());
  if (spec_.planner != "random" && spec_.planner != "diversity")
    throw std::invalid_argument("unknown planner: " + spec_.planner);
}

Structure PipelinePolicy::propose(const PolicyContext& ctx) {
  fallback_ = false;
  const Composition comp = spec_.planner == "diversity"
                               ? plan_diversity(sys_, space_, state_)
                               : plan_random(space_, rng_);

  std::optional<Structure> best_effort;  // passes min distance, not uniqueness
  for (int attempt = 0; attempt < spec_.retries; ++attempt) {
    CandidateBatch batch = generate_random(comp, spec_.batch_size, rng_);
    const CandidateBatch kept = apply_filters(batch, spec_.filters, ctx.archive);
    if (!kept.structures.empty()) return select_random(kept, rng_);
    if (!best_effort) {
      FilterSpec distance_only = spec_.filters;
      distance_only.uniqueness_enabled = false;
      const CandidateBatch loose = apply_filters(batch, distance_only, ctx.archive);
      if (!loose.structures.empty()) best_effort = loose.structures.front();
    }
  }
  if (best_effort) {
    fallback_ = true;
    return *best_effort;
  }
  throw std::runtime_error("generator produced no valid structure for " + comp.formula() +
                           " after " + std::to_string(spec_.retries) + " retries");
}

void PipelinePolicy::observe(const HistoryRecord& rec) {
  state_.record(rec.structure.composition(), rec.stable && rec.novel);
}

SurrogatePolicy::SurrogatePolicy(PolicySpec spec, chem::ChemicalSystem sys,
                                 const oracle::SyntheticOracleSpec& base_oracle, uint64_t seed)
    : spec_(std::move(spec)),
      sys_(std::move(sys)),
      space_(chem::enumerate_compositions(sys_)),
      surrogate_([&] {
        oracle::SurrogateSpec s;
        s.base = base_oracle;
        if (spec_.surrogate_relax_max_steps) s.base.relax.max_steps = *spec_.surrogate_relax_max_steps;
        s.noise_sigma = spec_.noise_sigma;
        s.noise_seed = spec_.noise_seed;
        return s;
      }()),
      rng_(seed) {
  if (space_.empty()) throw std::runtime_error("empty composition space for " + sys_.name());
  pool_.reserve(spec_.pool_size);
  while (static_cast<int>(pool_.size()) < spec_.pool_size) {
    const Composition comp = plan_random(space_, rng_);
    Structure s = random_structure(comp, rng_);
    if (spec_.filters.min_distance_enabled &&
        geo::has_pair_below(s, spec_.filters.min_distance))
      continue;
    pool_.push_back({std::move(s), std::nullopt});
  }
}

Structure SurrogatePolicy::propose(const PolicyContext& ctx) {
  fallback_ = false;
  // Uniqueness against the live archive; consumed entries are gone already.
  // Fingerprints are cached per pool entry and computed only once an archive
  // bucket could actually match.
  std::vector<size_t> alive;
  alive.reserve(pool_.size());
  for (size_t i = 0; i < pool_.size(); ++i) {
    auto& entry = pool_[i];
    if (spec_.filters.uniqueness_enabled &&
        ctx.archive.has_candidates_for(entry.structure.composition().reduced_formula())) {
      if (!entry.amd) entry.amd = geo::amd(entry.structure, ctx.archive.policy().amd_k);
      if (ctx.archive.contains_match(entry.structure, &*entry.amd)) continue;
    }
    alive.push_back(i);
  }
  if (!alive.empty()) {
    std::vector<Structure> view;
    view.reserve(alive.size());
    for (size_t i : alive) view.push_back(pool_[i].structure);
    const size_t pick = select_surrogate(view, surrogate_, ctx.hull);
    Structure chosen = std::move(view[pick]);
    pool_.erase(pool_.begin() + static_cast<long>(alive[pick]));
    return chosen;
  }

  // Pool exhausted: keep the episode running on filtered random proposals.
  fallback_ = true;
  for (int attempt = 0; attempt < spec_.retries; ++attempt) {
    const Composition comp = plan_random(space_, rng_);
    CandidateBatch batch = generate_random(comp, spec_.batch_size, rng_);
    const CandidateBatch kept = apply_filters(batch, spec_.filters, ctx.archive);
    if (!kept.structures.empty()) return select_random(kept, rng_);
  }
  throw std::runtime_error("surrogate pool exhausted and fallback generation failed");
}

ExternalPolicy::ExternalPolicy(PolicySpec spec, chem::ChemicalSystem sys)
    : spec_(std::move(spec)), sys_(std::move(sys)), proc_(spec_.command, spec_.timeout_s) {}

Structure ExternalPolicy::request_once(const PolicyContext& ctx, const std::string& error) {
  const int id = next_id_++;
  nlohmann::json req;
  req["type"] = "propose";
  req["id"] = id;
  req["budget_remaining"] = ctx.budget_remaining;
  req["epsilon"] = ctx.hull.epsilon();
  auto& elements = req["elements"];
  elements = nlohmann::json::array();
  for (const auto& e : sys_.elements) elements.push_back(e.symbol);
  req["max_atoms"] = sys_.max_atoms;
  auto& hist = req["history"];
  hist = nlohmann::json::array();
  for (const auto& r : ctx.history) {
    nlohmann::json jr;
    jr["structure"] = chem::structure_to_json(r.structure);
    jr["energy_per_atom"] = r.energy_per_atom;
    jr["e_above_hull"] = r.e_above_hull;
    jr["stable"] = r.stable;
    jr["novel"] = r.novel;
    hist.push_back(std::move(jr));
  }
  auto& stable = req["stable_set"];
  stable = nlohmann::json::array();
  for (int id2 : ctx.hull.stable_entry_ids()) {
    for (const auto& e : ctx.hull.entries()) {
      if (e.entry_id != id2) continue;
      nlohmann::json js;
      js["formula"] = e.structure.composition().formula();
      js["composition"] = e.composition;
      js["energy_per_atom"] = e.energy_per_atom;
      stable.push_back(std::move(js));
      break;
    }
  }
  if (!error.empty()) req["error"] = error;

  const auto resp = proc_.request(req);
  if (!resp.is_object() || !resp.contains("id") || !resp.contains("structure"))
    throw std::runtime_error("policy plugin response missing id/structure: " + resp.dump());
  if (resp.at("id").get<int>() != id)
    throw std::runtime_error("policy plugin id mismatch: " + resp.dump());
  Structure s = chem::structure_from_json(resp.at("structure"));
  chem::validate_in_system(s, sys_);
  return s;
}

Structure ExternalPolicy::propose(const PolicyContext& ctx) {
  try {
    return request_once(ctx, "");
  } catch (const plugin::PluginError&) {
    throw;  // transport is down; re-prompting cannot help
  } catch (const std::exception& e) {
    // One re-prompt carrying the validation error, then give up.
    return request_once(ctx, e.what());
  }
}

std::unique_ptr<Policy> make_policy(const PolicySpec& spec, const chem::ChemicalSystem& sys,
                                    const std::optional<oracle::SyntheticOracleSpec>& base_oracle,
                                    uint64_t seed) {
  switch (spec.kind) {
    case PolicySpec::Kind::pipeline:
      return std::make_unique<PipelinePolicy>(spec, sys, seed);
    case PolicySpec::Kind::surrogate:
      if (!base_oracle)
        throw std::invalid_argument("surrogate policy requires a synthetic base oracle");
      return std::make_unique<SurrogatePolicy>(spec, sys, *base_oracle, seed);
    case PolicySpec::Kind::external:
      return std::make_unique<ExternalPolicy>(spec, sys);
  }
  throw std::logic_error("unreachable policy kind");
}

}  // namespace made::policy
