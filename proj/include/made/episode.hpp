#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <made/chem.hpp>
#include <made/geometry.hpp>
#include <made/hull.hpp>
#include <made/oracle.hpp>
#include <made/policy.hpp>

namespace made::env {

struct OracleConfig {
  bool external = false;
  oracle::SyntheticOracleSpec synthetic;
  std::vector<std::string> command;  // external only
  double timeout_s = 300.0;
};

struct EpisodeConfig {
  chem::ChemicalSystem system;
  int budget = 50;
  double epsilon = 0.1;  // eV/atom
  uint64_t seed = 0;
  std::optional<std::string> h0_path;  // absent: elements-only H_0
  OracleConfig oracle;
  policy::PolicySpec policy;
  geo::MatchPolicy match;  // mSUN uniqueness/novelty matcher
};

struct InitialEntry {
  chem::Structure structure;  // as provided (or canonical elemental cell)
  chem::Structure relaxed;
  double energy_per_atom = 0.0;  // formation energy; exactly 0 for elementals
  bool elemental = false;
};

struct QueryRecord {
  int t = 0;
  chem::Structure proposed;
  chem::Structure relaxed;
  double energy_per_atom = 0.0;
  double e_above_hull = 0.0;  // at evaluation time, new entry included
  bool converged = false;
  bool stable = false;
  bool unique = false;    // no match in the archive at proposal time
  bool novel = false;     // unique and no match against H_0
  bool fallback = false;  // policy bypassed the uniqueness filter
  int cumulative = 0;     // D(t)
  double wall_ms = 0.0;   // excluded from canonical bytes
};

struct EpisodeLog {
  // config echo
  std::vector<std::string> elements;
  int max_atoms = 0;
  int budget = 0;
  double epsilon = 0.0;
  uint64_t seed = 0;
  std::string policy_name;
  geo::MatchPolicy match;

  std::vector<InitialEntry> initial;
  std::vector<QueryRecord> records;
  std::vector<std::string> final_stable;  // formulas of the final stable set
  int oracle_calls_in_loop = 0;
  bool complete = false;
  std::string error;

  chem::ChemicalSystem system() const;
};

// Hull with elemental vertices (formation energy exactly 0) plus oracle-
// evaluated H_0 structures; archives hold every structure seen so far.
struct EpisodeSetup {
  hull::HullState hull;
  policy::StructureArchive archive;     // everything (uniqueness gate)
  policy::StructureArchive h0_archive;  // H_0 only (novelty gate)
  std::vector<InitialEntry> initial;
  std::unique_ptr<oracle::Oracle> oracle;
  std::optional<oracle::SyntheticOracleSpec> synthetic_spec;
};

EpisodeSetup initialize(const EpisodeConfig& cfg);

// Algorithm: loop t = 1..B, propose -> evaluate -> update hull -> record.
// Budget counts oracle calls inside the loop only. Plugin failures abort
// with a partial log flagged incomplete.
EpisodeLog run_episode(const EpisodeConfig& cfg);

// Recomputes the discovery curve and all flags from logged energies and
// structures without touching the oracle.
struct ReplayResult {
  std::vector<int> curve;  // D(0..B)
  bool consistent = false;
  std::string detail;  // first mismatch, empty when consistent
};
ReplayResult replay(const EpisodeLog& log);

// Line-delimited JSON: one header object line, then one line per query.
void save_episode_log(const std::string& path, const EpisodeLog& log);
EpisodeLog load_episode_log(const std::string& path);

// Serialization without wall-clock fields; two runs of the same config
// produce identical canonical bytes.
std::string canonical_log_bytes(const EpisodeLog& log);

// Final hull rebuilt from the log (for phase-diagram export and recounts).
hull::HullState rebuild_final_hull(const EpisodeLog& log);

}  // namespace made::env
