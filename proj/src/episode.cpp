#include <made/episode.hpp>

#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include <made/rng.hpp>

namespace made::env {

using chem::Structure;

namespace {

class CountingOracle : public oracle::Oracle {
 public:
  explicit CountingOracle(std::unique_ptr<oracle::Oracle> inner) : inner_(std::move(inner)) {}
  oracle::OracleResult evaluate(const Structure& s) override {
    ++count_;
    return inner_->evaluate(s);
  }
  int count() const { return count_; }

 private:
  std::unique_ptr<oracle::Oracle> inner_;
  int count_ = 0;
};

// Vertex placeholder when the oracle is external and no synthetic pair
// parameters exist: FCC at a generic metallic spacing.
Structure generic_fcc(int z, double r_eq) {
  const double a = std::sqrt(2.0) * r_eq;
  Mat3 m;
  m.set_row(0, {a, 0.0, 0.0});
  m.set_row(1, {0.0, a, 0.0});
  m.set_row(2, {0.0, 0.0, a});
  const chem::Element el = chem::element_from_z(z);
  return Structure(chem::Lattice(m), {el, el, el, el},
                   {{0.0, 0.0, 0.0}, {0.0, 0.5, 0.5}, {0.5, 0.0, 0.5}, {0.5, 0.5, 0.0}});
}

std::vector<double> vertex_vector(const chem::ChemicalSystem& sys, int index) {
  std::vector<double> x(sys.elements.size(), 0.0);
  x[index] = 1.0;
  return x;
}

}  // namespace

chem::ChemicalSystem EpisodeLog::system() const {
  return chem::make_system(elements, max_atoms);
}

EpisodeSetup initialize(const EpisodeConfig& cfg) {
  std::unique_ptr<oracle::Oracle> base;
  std::optional<oracle::SyntheticOracleSpec> synthetic_spec;
  oracle::SyntheticOracle* synthetic = nullptr;
  if (cfg.oracle.external) {
    base = std::make_unique<oracle::ExternalOracle>(cfg.oracle.command, cfg.oracle.timeout_s);
  } else {
    auto s = std::make_unique<oracle::SyntheticOracle>(cfg.oracle.synthetic);
    synthetic = s.get();
    synthetic_spec = cfg.oracle.synthetic;
    base = std::move(s);
  }

  EpisodeSetup setup{hull::HullState(cfg.system, cfg.epsilon),
                     policy::StructureArchive(cfg.match),
                     policy::StructureArchive(cfg.match),
                     {},
                     std::move(base),
                     synthetic_spec};

  // Elemental vertices: formation energy exactly 0 by construction.
  for (int i = 0; i < cfg.system.size(); ++i) {
    const int z = cfg.system.elements[i].atomic_number;
    const Structure ref = synthetic ? synthetic->reference_structure(z) : generic_fcc(z, 2.8);
    setup.hull.add_entry(hull::HullEntry{-1, ref, vertex_vector(cfg.system, i), 0.0, true, -1});
    setup.archive.add(ref);
    setup.h0_archive.add(ref);
    setup.initial.push_back(InitialEntry{ref, ref, 0.0, true});
  }

  if (cfg.h0_path) {
    const auto structures = chem::load_structure_set(*cfg.h0_path);
    for (const auto& s : structures) {
      chem::validate_in_system(s, cfg.system);
      const auto r = setup.oracle->evaluate(s);
      setup.hull.add_entry(hull::HullEntry{
          -1, r.relaxed, chem::composition_vector(s.composition(), cfg.system),
          r.energy_per_atom, true, -1});
      setup.archive.add(s);
      setup.archive.add(r.relaxed);
      setup.h0_archive.add(s);
      setup.h0_archive.add(r.relaxed);
      setup.initial.push_back(InitialEntry{s, r.relaxed, r.energy_per_atom, false});
    }
  }
  return setup;
}

EpisodeLog run_episode(const EpisodeConfig& cfg) {
  EpisodeLog log;
  for (const auto& e : cfg.system.elements) log.elements.push_back(e.symbol);
  log.max_atoms = cfg.system.max_atoms;
  log.budget = cfg.budget;
  log.epsilon = cfg.epsilon;
  log.seed = cfg.seed;
  log.policy_name = cfg.policy.name;
  log.match = cfg.match;

  try {
    EpisodeSetup setup = initialize(cfg);
    log.initial = setup.initial;

    CountingOracle oracle(std::move(setup.oracle));
    auto policy = policy::make_policy(cfg.policy, cfg.system, setup.synthetic_spec,
                                      derive_seed(cfg.seed, {0x706f6c696379ULL}));

    policy::EvaluationHistory history;
    int discoveries = 0;

    for (int t = 1; t <= cfg.budget; ++t) {
      const auto t0 = std::chrono::steady_clock::now();

      policy::PolicyContext ctx{setup.hull, history, setup.archive, cfg.budget - t + 1};
      Structure proposed = policy->propose(ctx);
      chem::validate_in_system(proposed, cfg.system);

      const auto result = oracle.evaluate(proposed);

      const bool unique = !setup.archive.contains_match(result.relaxed);
      const bool novel = unique && !setup.h0_archive.contains_match(result.relaxed);

      const auto added = setup.hull.add_entry(hull::HullEntry{
          -1, result.relaxed,
          chem::composition_vector(result.relaxed.composition(), cfg.system),
          result.energy_per_atom, false, t});
      const auto stability = setup.hull.energy_above_hull(added.entry_id);

      const bool event = stability.is_stable && unique && novel;
      if (event) ++discoveries;

      setup.archive.add(proposed);
      setup.archive.add(result.relaxed);

      const auto t1 = std::chrono::steady_clock::now();
      QueryRecord rec{t,
                      proposed,
                      result.relaxed,
                      result.energy_per_atom,
                      stability.e_above_hull,
                      result.converged,
                      stability.is_stable,
                      unique,
                      novel,
                      policy->last_was_fallback(),
                      discoveries,
                      std::chrono::duration<double, std::milli>(t1 - t0).count()};
      log.records.push_back(rec);

      history.push_back(policy::HistoryRecord{t, result.relaxed, result.energy_per_atom,
                                              stability.e_above_hull, stability.is_stable,
                                              novel});
      policy->observe(history.back());
    }

    // H_0 evaluations happened before the wrapper existed; count() is the
    // in-loop tally only.
    log.oracle_calls_in_loop = oracle.count();
    for (int id : setup.hull.stable_entry_ids()) {
      for (const auto& e : setup.hull.entries()) {
        if (e.entry_id == id) {
          log.final_stable.push_back(e.structure.composition().formula());
          break;
        }
      }
    }
    log.complete = true;
  } catch (const std::exception& e) {
    log.complete = false;
    log.error = e.what();
  }
  return log;
}

ReplayResult replay(const EpisodeLog& log) {
  ReplayResult out;
  const auto sys = log.system();
  hull::HullState hull(sys, log.epsilon);
  policy::StructureArchive archive(log.match);
  policy::StructureArchive h0_archive(log.match);

  for (const auto& e : log.initial) {
    hull.add_entry(hull::HullEntry{
        -1, e.relaxed, chem::composition_vector(e.relaxed.composition(), sys),
        e.energy_per_atom, true, -1});
    archive.add(e.structure);
    if (!(chem::structure_hash(e.structure) == chem::structure_hash(e.relaxed)))
      archive.add(e.relaxed);
    h0_archive.add(e.structure);
    if (!(chem::structure_hash(e.structure) == chem::structure_hash(e.relaxed)))
      h0_archive.add(e.relaxed);
  }

  auto mismatch = [&](int t, const std::string& what) {
    out.consistent = false;
    if (out.detail.empty())
      out.detail = "record " + std::to_string(t) + ": " + what;
  };

  out.consistent = true;
  out.curve.assign(1, 0);
  int discoveries = 0;
  for (const auto& rec : log.records) {
    const bool unique = !archive.contains_match(rec.relaxed);
    const bool novel = unique && !h0_archive.contains_match(rec.relaxed);

    const auto added = hull.add_entry(hull::HullEntry{
        -1, rec.relaxed, chem::composition_vector(rec.relaxed.composition(), sys),
        rec.energy_per_atom, false, rec.t});
    const auto stability = hull.energy_above_hull(added.entry_id);

    if (std::abs(stability.e_above_hull - rec.e_above_hull) > 1e-12)
      mismatch(rec.t, "e_above_hull differs");
    if (stability.is_stable != rec.stable) mismatch(rec.t, "stable flag differs");
    if (unique != rec.unique) mismatch(rec.t, "unique flag differs");
    if (novel != rec.novel) mismatch(rec.t, "novel flag differs");

    if (stability.is_stable && unique && novel) ++discoveries;
    if (discoveries != rec.cumulative) mismatch(rec.t, "cumulative count differs");
    out.curve.push_back(discoveries);

    archive.add(rec.proposed);
    archive.add(rec.relaxed);
  }
  return out;
}

hull::HullState rebuild_final_hull(const EpisodeLog& log) {
  const auto sys = log.system();
  hull::HullState hull(sys, log.epsilon);
  for (const auto& e : log.initial)
    hull.add_entry(hull::HullEntry{
        -1, e.relaxed, chem::composition_vector(e.relaxed.composition(), sys),
        e.energy_per_atom, true, -1});
  for (const auto& rec : log.records)
    hull.add_entry(hull::HullEntry{
        -1, rec.relaxed, chem::composition_vector(rec.relaxed.composition(), sys),
        rec.energy_per_atom, false, rec.t});
  return hull;
}

// --- serialization ---

namespace {

nlohmann::json match_to_json(const geo::MatchPolicy& m) {
  return {{"amd_k", m.amd_k},
          {"amd_tol", m.amd_tol},
          {"require_same_reduced_formula", m.require_same_reduced_formula}};
}

geo::MatchPolicy match_from_json(const nlohmann::json& j) {
  geo::MatchPolicy m;
  m.amd_k = j.at("amd_k").get<int>();
  m.amd_tol = j.at("amd_tol").get<double>();
  m.require_same_reduced_formula = j.at("require_same_reduced_formula").get<bool>();
  return m;
}

nlohmann::json header_json(const EpisodeLog& log) {
  nlohmann::json h;
  h["format"] = "made-episode-v1";
  h["elements"] = log.elements;
  h["max_atoms"] = log.max_atoms;
  h["budget"] = log.budget;
  h["epsilon"] = log.epsilon;
  h["seed"] = log.seed;
  h["policy"] = log.policy_name;
  h["match"] = match_to_json(log.match);
  auto& init = h["initial"];
  init = nlohmann::json::array();
  for (const auto& e : log.initial) {
    nlohmann::json je;
    je["structure"] = chem::structure_to_json(e.structure);
    je["relaxed"] = chem::structure_to_json(e.relaxed);
    je["energy_per_atom"] = e.energy_per_atom;
    je["elemental"] = e.elemental;
    init.push_back(std::move(je));
  }
  h["final_stable"] = log.final_stable;
  h["oracle_calls_in_loop"] = log.oracle_calls_in_loop;
  h["complete"] = log.complete;
  h["error"] = log.error;
  return h;
}

nlohmann::json record_json(const QueryRecord& r, bool with_timing) {
  nlohmann::json j;
  j["t"] = r.t;
  j["proposed"] = chem::structure_to_json(r.proposed);
  j["relaxed"] = chem::structure_to_json(r.relaxed);
  j["energy_per_atom"] = r.energy_per_atom;
  j["e_above_hull"] = r.e_above_hull;
  j["converged"] = r.converged;
  j["stable"] = r.stable;
  j["unique"] = r.unique;
  j["novel"] = r.novel;
  j["fallback"] = r.fallback;
  j["cumulative"] = r.cumulative;
  if (with_timing) j["wall_ms"] = r.wall_ms;
  return j;
}

std::string serialize(const EpisodeLog& log, bool with_timing) {
  std::string out = header_json(log).dump();
  out += "\n";
  for (const auto& r : log.records) {
    out += record_json(r, with_timing).dump();
    out += "\n";
  }
  return out;
}

}  // namespace

void save_episode_log(const std::string& path, const EpisodeLog& log) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write episode log: " + path);
  f << serialize(log, true);
}

std::string canonical_log_bytes(const EpisodeLog& log) { return serialize(log, false); }

EpisodeLog load_episode_log(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open episode log: " + path);
  std::string line;
  if (!std::getline(f, line)) throw std::runtime_error("empty episode log: " + path);

  nlohmann::json h;
  try {
    h = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("corrupt episode log header in " + path + ": " + e.what());
  }
  if (h.value("format", "") != "made-episode-v1")
    throw std::runtime_error("unknown episode log format in " + path);

  EpisodeLog log;
  log.elements = h.at("elements").get<std::vector<std::string>>();
  log.max_atoms = h.at("max_atoms").get<int>();
  log.budget = h.at("budget").get<int>();
  log.epsilon = h.at("epsilon").get<double>();
  log.seed = h.at("seed").get<uint64_t>();
  log.policy_name = h.at("policy").get<std::string>();
  log.match = match_from_json(h.at("match"));
  for (const auto& je : h.at("initial")) {
    log.initial.push_back(InitialEntry{chem::structure_from_json(je.at("structure")),
                                       chem::structure_from_json(je.at("relaxed")),
                                       je.at("energy_per_atom").get<double>(),
                                       je.at("elemental").get<bool>()});
  }
  log.final_stable = h.at("final_stable").get<std::vector<std::string>>();
  log.oracle_calls_in_loop = h.at("oracle_calls_in_loop").get<int>();
  log.complete = h.at("complete").get<bool>();
  log.error = h.at("error").get<std::string>();

  int line_no = 1;
  while (std::getline(f, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw std::runtime_error("corrupt record at line " + std::to_string(line_no) + " in " +
                               path + ": " + e.what());
    }
    QueryRecord r{j.at("t").get<int>(),
                  chem::structure_from_json(j.at("proposed")),
                  chem::structure_from_json(j.at("relaxed")),
                  j.at("energy_per_atom").get<double>(),
                  j.at("e_above_hull").get<double>(),
                  j.at("converged").get<bool>(),
                  j.at("stable").get<bool>(),
                  j.at("unique").get<bool>(),
                  j.at("novel").get<bool>(),
                  j.at("fallback").get<bool>(),
                  j.at("cumulative").get<int>(),
                  j.value("wall_ms", 0.0)};
    log.records.push_back(std::move(r));
  }
  return log;
}

}  // namespace made::env
