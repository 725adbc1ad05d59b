#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <made/episode.hpp>

namespace made::bench {

// Config problems (exit code 1) vs filesystem problems (exit code 3).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SystemSpec {
  std::vector<std::string> elements;
  int max_atoms = 8;
  std::optional<std::string> h0_file;

  std::string name() const;
};

struct CampaignConfig {
  std::vector<SystemSpec> systems;
  std::vector<policy::PolicySpec> policies;
  env::OracleConfig oracle;
  int episodes = 5;
  int budget = 50;
  std::vector<double> epsilons = {0.1};
  std::string baseline_policy;
  uint64_t master_seed = 0;
  std::string output_dir;
  int workers = 1;
  int phase_diagram_resolution = 12;  // 0 disables export
  geo::MatchPolicy match;

  uint64_t config_hash = 0;  // hash of the source document
};

// YAML document (JSON also parses); unknown keys are errors.
CampaignConfig load_campaign_config(const std::string& path);
void validate_config(const CampaignConfig& cfg);

// Pure function of (master seed, system, policy, episode index, epsilon).
uint64_t cell_seed(const CampaignConfig& cfg, int system_idx, int policy_idx,
                   int epsilon_idx, int episode_idx);

struct CellInfo {
  int system_idx = 0, policy_idx = 0, epsilon_idx = 0, episode_idx = 0;
  uint64_t seed = 0;
  std::string log_path;
  bool ok = false;
  std::string error;
};

struct CampaignResult {
  int exit_code = 0;  // 0 ok, 2 when any cell failed
  std::string manifest_path;
  std::vector<CellInfo> cells;
};

// Executes every (system x policy x epsilon x episode) cell, workers in
// parallel, and writes logs, metrics/aggregate/curve CSVs, phase-diagram
// exports and the run manifest. CSV bytes are independent of the worker
// count. MADE_WORKERS overrides cfg.workers.
CampaignResult run_campaign(const CampaignConfig& cfg);

// Recompute CSV reports from a finished run directory.
void write_metrics_from_dir(const std::string& run_dir);
// Acquisition-curve CSVs and phase-diagram JSONs from a run directory.
void write_plot_data_from_dir(const std::string& run_dir);

// m distinct element subsets of size d, uniform without replacement.
std::vector<chem::ChemicalSystem> sample_systems(const std::vector<std::string>& pool,
                                                 int size, int count, uint64_t seed,
                                                 int max_atoms);

// Metallic, non-radioactive element pool used for sampled benchmark systems.
const std::vector<std::string>& default_element_pool();

std::vector<chem::Structure> ingest_structures(const std::string& path);

extern const char* kEngineVersion;

}  // namespace made::bench
