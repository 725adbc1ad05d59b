#include <made/campaign.hpp>

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <thread>
#include <tuple>

#include <made/metrics.hpp>
#include <made/rng.hpp>

#include <yaml-cpp/yaml.h>

namespace made::bench {

namespace fs = std::filesystem;

const char* kEngineVersion = "0.1.0";

std::string SystemSpec::name() const {
  std::string out;
  for (size_t i = 0; i < elements.size(); ++i) {
    if (i) out += "-";
    out += elements[i];
  }
  return out;
}

// --- config parsing ---

namespace {

std::string fmt_num(double v, const char* fmt = "%.10g") {
  char buf[64];
  std::snprintf(buf, sizeof(buf), fmt, v);
  return buf;
}

void check_keys(const YAML::Node& n, const std::string& path,
                std::initializer_list<const char*> allowed) {
  if (!n.IsMap()) throw ConfigError(path + " must be a mapping");
  for (const auto& kv : n) {
    const std::string key = kv.first.as<std::string>();
    bool ok = false;
    for (const char* a : allowed)
      if (key == a) ok = true;
    if (!ok) throw ConfigError("unknown key '" + key + "' under " + path);
  }
}

template <typename T>
T get_or(const YAML::Node& n, const char* key, T fallback) {
  if (!n[key]) return fallback;
  return n[key].as<T>();
}

std::vector<std::string> parse_command(const YAML::Node& n, const std::string& path) {
  std::vector<std::string> out;
  if (n.IsScalar()) {
    std::istringstream in(n.as<std::string>());
    std::string tok;
    while (in >> tok) out.push_back(tok);
  } else if (n.IsSequence()) {
    for (const auto& item : n) out.push_back(item.as<std::string>());
  } else {
    throw ConfigError(path + " must be a string or a list of strings");
  }
  if (out.empty()) throw ConfigError(path + " must not be empty");
  return out;
}

geo::MatchPolicy parse_match(const YAML::Node& n, const std::string& path,
                             geo::MatchPolicy base) {
  check_keys(n, path, {"amd_k", "amd_tol", "require_same_reduced_formula"});
  base.amd_k = get_or(n, "amd_k", base.amd_k);
  base.amd_tol = get_or(n, "amd_tol", base.amd_tol);
  base.require_same_reduced_formula =
      get_or(n, "require_same_reduced_formula", base.require_same_reduced_formula);
  return base;
}

policy::FilterSpec parse_filters(const YAML::Node& n, const std::string& path) {
  check_keys(n, path, {"min_distance", "uniqueness", "amd_k", "amd_tol",
                       "require_same_reduced_formula"});
  policy::FilterSpec f;
  f.min_distance = get_or(n, "min_distance", f.min_distance);
  f.uniqueness_enabled = get_or(n, "uniqueness", true);
  f.uniqueness.amd_k = get_or(n, "amd_k", f.uniqueness.amd_k);
  f.uniqueness.amd_tol = get_or(n, "amd_tol", f.uniqueness.amd_tol);
  f.uniqueness.require_same_reduced_formula =
      get_or(n, "require_same_reduced_formula", f.uniqueness.require_same_reduced_formula);
  if (f.min_distance <= 0.0) throw ConfigError(path + ".min_distance must be > 0");
  return f;
}

oracle::RelaxSpec parse_relax(const YAML::Node& n, const std::string& path) {
  check_keys(n, path, {"max_steps", "fmax", "dt_initial", "dt_max", "alpha_start", "f_inc",
                       "f_dec", "n_min", "f_alpha", "max_step"});
  oracle::RelaxSpec r;
  r.max_steps = get_or(n, "max_steps", r.max_steps);
  r.fmax = get_or(n, "fmax", r.fmax);
  r.dt_initial = get_or(n, "dt_initial", r.dt_initial);
  r.dt_max = get_or(n, "dt_max", r.dt_max);
  r.alpha_start = get_or(n, "alpha_start", r.alpha_start);
  r.f_inc = get_or(n, "f_inc", r.f_inc);
  r.f_dec = get_or(n, "f_dec", r.f_dec);
  r.n_min = get_or(n, "n_min", r.n_min);
  r.f_alpha = get_or(n, "f_alpha", r.f_alpha);
  r.max_step = get_or(n, "max_step", r.max_step);
  if (r.fmax <= 0.0) throw ConfigError(path + ".fmax must be > 0");
  if (r.max_steps < 1) throw ConfigError(path + ".max_steps must be >= 1");
  if (!(r.dt_initial > 0.0 && r.dt_initial <= r.dt_max))
    throw ConfigError(path + " needs 0 < dt_initial <= dt_max");
  return r;
}

env::OracleConfig parse_oracle(const YAML::Node& n) {
  check_keys(n, "oracle", {"kind", "seed", "cutoff", "relax", "command", "timeout_s"});
  env::OracleConfig o;
  const std::string kind = get_or<std::string>(n, "kind", "synthetic");
  if (kind == "synthetic") {
    o.external = false;
    o.synthetic.seed = get_or<uint64_t>(n, "seed", 0);
    o.synthetic.cutoff = get_or(n, "cutoff", o.synthetic.cutoff);
    if (n["relax"]) o.synthetic.relax = parse_relax(n["relax"], "oracle.relax");
    if (n["command"]) throw ConfigError("oracle.command is only valid for kind: external");
  } else if (kind == "external") {
    o.external = true;
    if (!n["command"]) throw ConfigError("oracle.command required for kind: external");
    o.command = parse_command(n["command"], "oracle.command");
    o.timeout_s = get_or(n, "timeout_s", o.timeout_s);
  } else {
    throw ConfigError("oracle.kind must be synthetic or external");
  }
  return o;
}

policy::PolicySpec parse_policy(const YAML::Node& n, size_t index) {
  const std::string path = "policies[" + std::to_string(index) + "]";
  check_keys(n, path, {"name", "planner", "generator", "selector", "filters", "external"});
  policy::PolicySpec p;
  if (!n["name"]) throw ConfigError(path + ".name is required");
  p.name = n["name"].as<std::string>();

  if (n["external"]) {
    if (n["planner"] || n["generator"] || n["selector"] || n["filters"])
      throw ConfigError(path + ": external policies take no pipeline components");
    check_keys(n["external"], path + ".external", {"command", "timeout_s"});
    p.kind = policy::PolicySpec::Kind::external;
    p.command = parse_command(n["external"]["command"], path + ".external.command");
    p.timeout_s = get_or(n["external"], "timeout_s", p.timeout_s);
    return p;
  }

  if (n["filters"]) p.filters = parse_filters(n["filters"], path + ".filters");

  if (n["generator"]) {
    check_keys(n["generator"], path + ".generator", {"kind", "batch_size", "retries"});
    const std::string gkind = get_or<std::string>(n["generator"], "kind", "random");
    if (gkind != "random")
      throw ConfigError(path + ".generator.kind must be random (others are plugins)");
    p.batch_size = get_or(n["generator"], "batch_size", p.batch_size);
    p.retries = get_or(n["generator"], "retries", p.retries);
    if (p.batch_size < 1) throw ConfigError(path + ".generator.batch_size must be >= 1");
    if (p.retries < 1) throw ConfigError(path + ".generator.retries must be >= 1");
  }

  const YAML::Node sel = n["selector"];
  if (!sel || (sel.IsScalar() && sel.as<std::string>() == "random")) {
    p.kind = policy::PolicySpec::Kind::pipeline;
    p.planner = get_or<std::string>(n, "planner", "random");
    if (p.planner != "random" && p.planner != "diversity")
      throw ConfigError(path + ".planner must be random or diversity");
  } else if (sel.IsMap()) {
    check_keys(sel, path + ".selector",
               {"kind", "pool_size", "noise_sigma", "noise_seed", "relax_max_steps"});
    const std::string skind = get_or<std::string>(sel, "kind", "");
    if (skind != "surrogate")
      throw ConfigError(path + ".selector.kind must be surrogate (or the scalar random)");
    if (n["planner"])
      throw ConfigError(path + ": the surrogate selector ranks a pool drawn across the "
                               "phase diagram and takes no planner");
    p.kind = policy::PolicySpec::Kind::surrogate;
    p.pool_size = get_or(sel, "pool_size", p.pool_size);
    p.noise_sigma = get_or(sel, "noise_sigma", p.noise_sigma);
    p.noise_seed = get_or<uint64_t>(sel, "noise_seed", p.noise_seed);
    if (sel["relax_max_steps"]) p.surrogate_relax_max_steps = sel["relax_max_steps"].as<int>();
    if (p.pool_size < 1) throw ConfigError(path + ".selector.pool_size must be >= 1");
    if (p.noise_sigma < 0.0) throw ConfigError(path + ".selector.noise_sigma must be >= 0");
  } else {
    throw ConfigError(path + ".selector must be 'random' or a surrogate mapping");
  }
  return p;
}

}  // namespace

CampaignConfig load_campaign_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();

  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw ConfigError("config parse error in " + path + ": " + e.what());
  }

  check_keys(root, "config",
             {"output_dir", "master_seed", "budget", "episodes", "epsilons", "baseline_policy",
              "workers", "phase_diagram_resolution", "oracle", "match", "systems", "policies"});

  CampaignConfig cfg;
  cfg.config_hash = fnv1a(text);
  cfg.output_dir = get_or<std::string>(root, "output_dir", "");
  cfg.master_seed = get_or<uint64_t>(root, "master_seed", 0);
  cfg.budget = get_or(root, "budget", cfg.budget);
  cfg.episodes = get_or(root, "episodes", cfg.episodes);
  if (root["epsilons"]) cfg.epsilons = root["epsilons"].as<std::vector<double>>();
  cfg.baseline_policy = get_or<std::string>(root, "baseline_policy", "");
  cfg.workers = get_or(root, "workers", cfg.workers);
  cfg.phase_diagram_resolution =
      get_or(root, "phase_diagram_resolution", cfg.phase_diagram_resolution);
  if (root["oracle"]) cfg.oracle = parse_oracle(root["oracle"]);
  if (root["match"]) cfg.match = parse_match(root["match"], "match", cfg.match);

  if (!root["systems"] || !root["systems"].IsSequence() || root["systems"].size() == 0)
    throw ConfigError("config needs a non-empty systems list");
  for (size_t i = 0; i < root["systems"].size(); ++i) {
    const auto& ns = root["systems"][i];
    const std::string path_i = "systems[" + std::to_string(i) + "]";
    check_keys(ns, path_i, {"elements", "max_atoms", "h0_file"});
    SystemSpec s;
    if (!ns["elements"]) throw ConfigError(path_i + ".elements is required");
    s.elements = ns["elements"].as<std::vector<std::string>>();
    s.max_atoms = get_or(ns, "max_atoms", s.max_atoms);
    if (ns["h0_file"]) s.h0_file = ns["h0_file"].as<std::string>();
    cfg.systems.push_back(std::move(s));
  }

  if (!root["policies"] || !root["policies"].IsSequence() || root["policies"].size() == 0)
    throw ConfigError("config needs a non-empty policies list");
  for (size_t i = 0; i < root["policies"].size(); ++i)
    cfg.policies.push_back(parse_policy(root["policies"][i], i));

  validate_config(cfg);
  return cfg;
}

void validate_config(const CampaignConfig& cfg) {
  if (cfg.episodes < 1) throw ConfigError("episodes must be >= 1");
  if (cfg.budget < 1) throw ConfigError("budget must be >= 1");
  if (cfg.epsilons.empty()) throw ConfigError("epsilons must be non-empty");
  for (double e : cfg.epsilons)
    if (e < 0.0) throw ConfigError("epsilon values must be >= 0");
  if (cfg.workers < 1) throw ConfigError("workers must be >= 1");

  std::set<std::string> names;
  for (const auto& p : cfg.policies) {
    if (p.name.empty()) throw ConfigError("policy names must be non-empty");
    if (!names.insert(p.name).second) throw ConfigError("duplicate policy name: " + p.name);
    if (p.kind == policy::PolicySpec::Kind::surrogate && cfg.oracle.external)
      throw ConfigError("surrogate policies need a synthetic oracle to corrupt");
  }
  if (cfg.baseline_policy.empty())
    throw ConfigError("baseline_policy is required (AF/EF need a baseline)");
  if (!names.count(cfg.baseline_policy))
    throw ConfigError("baseline_policy '" + cfg.baseline_policy + "' not in policies");

  for (const auto& s : cfg.systems) {
    chem::make_system(s.elements, s.max_atoms);  // throws on bad systems
    if (s.h0_file && !fs::exists(*s.h0_file))
      throw ConfigError("h0_file does not exist: " + *s.h0_file);
  }
}

uint64_t cell_seed(const CampaignConfig& cfg, int system_idx, int policy_idx,
                   int epsilon_idx, int episode_idx) {
  uint64_t eps_bits;
  static_assert(sizeof(double) == sizeof(uint64_t));
  const double eps = cfg.epsilons[epsilon_idx];
  std::memcpy(&eps_bits, &eps, sizeof(eps_bits));
  return derive_seed(cfg.master_seed,
                     {fnv1a(cfg.systems[system_idx].name()),
                      fnv1a(cfg.policies[policy_idx].name),
                      static_cast<uint64_t>(episode_idx), eps_bits});
}

// --- reporting ---

namespace {

struct CellRecord {
  int system_idx = 0, policy_idx = 0, epsilon_idx = 0;
  std::string system;
  int system_size = 0;
  std::string policy;
  double epsilon = 0.0;
  int episode = 0;
  uint64_t seed = 0;
  std::string log_path;
  bool ok = false;
  std::string error;
  std::optional<env::EpisodeLog> log;
};

std::string sanitize(const std::string& s) {
  std::string out;
  for (char c : s) out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-') ? c : '_';
  return out;
}

std::string cell_stem(const CellRecord& c) {
  return sanitize(c.system) + "__" + sanitize(c.policy) + "__eps" + fmt_num(c.epsilon, "%g") +
         "__ep" + std::to_string(c.episode);
}

struct EpisodeMetricsRow {
  const CellRecord* cell;
  metrics::DiscoveryCurve curve;
  double msun = 0.0, audc = 0.0;
  std::optional<double> af, ef;
  metrics::DiversityStats diversity;
  int evaluated_unique = 0;
  int final_msun_recount = 0;
  int superseded = 0;
};

// Online mSUN events rechecked against the final hull; superseded counts
// events that later fell off the hull by more than epsilon.
void final_recount(const env::EpisodeLog& log, int& recount, int& superseded) {
  recount = 0;
  superseded = 0;
  if (log.records.empty()) return;
  const auto final_hull = env::rebuild_final_hull(log);
  std::map<int, bool> stable_final;
  for (const auto& e : final_hull.entries()) {
    if (!e.initial)
      stable_final[e.query_index] = final_hull.energy_above_hull(e.entry_id).is_stable;
  }
  for (const auto& r : log.records) {
    if (!(r.unique && r.novel)) continue;
    const bool fin = stable_final.at(r.t);
    if (fin) ++recount;
    if (r.stable && !fin) ++superseded;
  }
}

std::string csv_opt(const std::optional<double>& v) { return v ? fmt_num(*v) : ""; }

void write_file(const std::string& path, const std::string& content) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write " + path);
  f << content;
}

const env::EpisodeLog& require_log(const CellRecord& c) {
  if (!c.log) throw IoError("missing episode log for " + cell_stem(c));
  return *c.log;
}

void write_reports(const std::string& out_dir, const std::string& baseline,
                   std::vector<CellRecord>& cells) {
  // Baseline curve lookup: (system, epsilon, episode) -> curve.
  std::map<std::tuple<std::string, double, int>, metrics::DiscoveryCurve> baseline_curves;
  for (auto& c : cells) {
    if (c.ok && c.policy == baseline)
      baseline_curves[{c.system, c.epsilon, c.episode}] =
          metrics::curve_from_log(require_log(c));
  }

  std::vector<EpisodeMetricsRow> rows;
  for (auto& c : cells) {
    if (!c.ok) continue;
    const auto& log = require_log(c);
    EpisodeMetricsRow row{&c, metrics::curve_from_log(log)};
    row.msun = metrics::msun(row.curve);
    row.audc = metrics::audc(row.curve);
    row.diversity = metrics::diversity_metrics(log);
    row.evaluated_unique = metrics::evaluated_unique_compositions(log);
    final_recount(log, row.final_msun_recount, row.superseded);
    auto bit = baseline_curves.find({c.system, c.epsilon, c.episode});
    if (bit != baseline_curves.end()) {
      const int k = row.curve.d[row.curve.budget];
      if (k >= 1) row.af = metrics::acceleration_factor(row.curve, bit->second, k);
      row.ef = metrics::enhancement_factor(row.curve, bit->second, row.curve.budget);
    }
    rows.push_back(std::move(row));
  }

  // Per-episode metrics.
  std::string csv =
      "system,system_size,policy,epsilon,episode,seed,discoveries,msun,audc,af,ef,"
      "mean_comp_l1,unique_comps,unique_structs_amd,mean_pairwise_amd,"
      "evaluated_unique_comps,final_msun_recount,superseded\n";
  for (const auto& r : rows) {
    const auto& c = *r.cell;
    csv += c.system + "," + std::to_string(c.system_size) + "," + c.policy + "," +
           fmt_num(c.epsilon, "%g") + "," + std::to_string(c.episode) + "," +
           std::to_string(c.seed) + "," + std::to_string(r.curve.d[r.curve.budget]) + "," +
           fmt_num(r.msun) + "," + fmt_num(r.audc) + "," + csv_opt(r.af) + "," +
           csv_opt(r.ef) + "," + fmt_num(r.diversity.mean_comp_l1) + "," +
           std::to_string(r.diversity.unique_reduced_compositions) + "," +
           std::to_string(r.diversity.unique_structures_amd) + "," +
           fmt_num(r.diversity.mean_pairwise_amd) + "," + std::to_string(r.evaluated_unique) +
           "," + std::to_string(r.final_msun_recount) + "," + std::to_string(r.superseded) +
           "\n";
  }
  write_file(out_dir + "/metrics.csv", csv);

  // AF(k) series.
  std::string af_csv = "system,policy,epsilon,episode,k,af\n";
  for (const auto& r : rows) {
    const auto& c = *r.cell;
    auto bit = baseline_curves.find({c.system, c.epsilon, c.episode});
    if (bit == baseline_curves.end()) continue;
    const int kmax = r.curve.d[r.curve.budget];
    for (int k = 1; k <= kmax; ++k) {
      const auto af = metrics::acceleration_factor(r.curve, bit->second, k);
      if (af)
        af_csv += c.system + "," + c.policy + "," + fmt_num(c.epsilon, "%g") + "," +
                  std::to_string(c.episode) + "," + std::to_string(k) + "," + fmt_num(*af) +
                  "\n";
    }
  }
  write_file(out_dir + "/af_series.csv", af_csv);

  // Aggregates by (system_size, policy, epsilon).
  struct Group {
    std::vector<double> msun, audc, af, ef, l1, uc, us, amd;
    int af_excluded = 0, ef_excluded = 0;
  };
  std::map<std::tuple<int, std::string, double>, Group> groups;
  for (const auto& r : rows) {
    auto& g = groups[{r.cell->system_size, r.cell->policy, r.cell->epsilon}];
    g.msun.push_back(r.msun);
    g.audc.push_back(r.audc);
    if (r.af)
      g.af.push_back(*r.af);
    else
      g.af_excluded++;
    if (r.ef)
      g.ef.push_back(*r.ef);
    else
      g.ef_excluded++;
    g.l1.push_back(r.diversity.mean_comp_l1);
    g.uc.push_back(r.diversity.unique_reduced_compositions);
    g.us.push_back(r.diversity.unique_structures_amd);
    g.amd.push_back(r.diversity.mean_pairwise_amd);
  }
  std::string agg =
      "system_size,policy,epsilon,n,msun_mean,msun_sem,audc_mean,audc_sem,"
      "af_mean,af_sem,af_n,af_excluded,ef_mean,ef_sem,ef_n,ef_excluded,"
      "mean_comp_l1_mean,mean_comp_l1_sem,unique_comps_mean,unique_comps_sem,"
      "unique_structs_amd_mean,unique_structs_amd_sem,mean_pairwise_amd_mean,"
      "mean_pairwise_amd_sem\n";
  for (const auto& [key, g] : groups) {
    const auto m = metrics::aggregate_values(g.msun);
    const auto a = metrics::aggregate_values(g.audc);
    const auto af = metrics::aggregate_values(g.af);
    const auto ef = metrics::aggregate_values(g.ef);
    const auto l1 = metrics::aggregate_values(g.l1);
    const auto uc = metrics::aggregate_values(g.uc);
    const auto us = metrics::aggregate_values(g.us);
    const auto am = metrics::aggregate_values(g.amd);
    agg += std::to_string(std::get<0>(key)) + "," + std::get<1>(key) + "," +
           fmt_num(std::get<2>(key), "%g") + "," + std::to_string(m.n) + "," +
           fmt_num(m.mean) + "," + fmt_num(m.sem) + "," + fmt_num(a.mean) + "," +
           fmt_num(a.sem) + "," + (af.n ? fmt_num(af.mean) : "") + "," +
           (af.n ? fmt_num(af.sem) : "") + "," + std::to_string(af.n) + "," +
           std::to_string(g.af_excluded) + "," + (ef.n ? fmt_num(ef.mean) : "") + "," +
           (ef.n ? fmt_num(ef.sem) : "") + "," + std::to_string(ef.n) + "," +
           std::to_string(g.ef_excluded) + "," + fmt_num(l1.mean) + "," + fmt_num(l1.sem) +
           "," + fmt_num(uc.mean) + "," + fmt_num(uc.sem) + "," + fmt_num(us.mean) + "," +
           fmt_num(us.sem) + "," + fmt_num(am.mean) + "," + fmt_num(am.sem) + "\n";
  }
  write_file(out_dir + "/aggregate.csv", agg);

  // Discovery curves, mean +- SEM over episodes per (system, policy, epsilon).
  std::map<std::tuple<std::string, std::string, double>, std::vector<const EpisodeMetricsRow*>>
      curve_groups;
  for (const auto& r : rows)
    curve_groups[{r.cell->system, r.cell->policy, r.cell->epsilon}].push_back(&r);
  std::string curves = "system,policy,epsilon,t,d_mean,d_sem\n";
  for (const auto& [key, group] : curve_groups) {
    const int budget = group.front()->curve.budget;
    for (int t = 0; t <= budget; ++t) {
      std::vector<double> vals;
      for (const auto* r : group) vals.push_back(r->curve.d[t]);
      const auto a = metrics::aggregate_values(vals);
      curves += std::get<0>(key) + "," + std::get<1>(key) + "," +
                fmt_num(std::get<2>(key), "%g") + "," + std::to_string(t) + "," +
                fmt_num(a.mean) + "," + fmt_num(a.sem) + "\n";
    }
  }
  write_file(out_dir + "/curves.csv", curves);
}

void write_phase_diagrams(const std::string& out_dir, std::vector<CellRecord>& cells,
                          int resolution) {
  if (resolution <= 0) return;
  const std::string dir = out_dir + "/phase_diagrams";
  fs::create_directories(dir);
  for (auto& c : cells) {
    if (!c.ok) continue;
    const auto hull = env::rebuild_final_hull(require_log(c));
    const auto j = hull::phase_diagram_export(hull, resolution);
    write_file(dir + "/" + cell_stem(c) + ".json", j.dump());
  }
}

std::vector<CellRecord> cells_from_manifest(const std::string& run_dir,
                                            std::string& baseline) {
  std::ifstream f(run_dir + "/manifest.json");
  if (!f) throw IoError("cannot open " + run_dir + "/manifest.json");
  nlohmann::json m;
  try {
    f >> m;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("corrupt manifest: " + std::string(e.what()));
  }
  baseline = m.at("baseline_policy").get<std::string>();
  std::vector<CellRecord> cells;
  for (const auto& jc : m.at("cells")) {
    CellRecord c;
    c.system = jc.at("system").get<std::string>();
    c.system_size = jc.at("system_size").get<int>();
    c.policy = jc.at("policy").get<std::string>();
    c.epsilon = jc.at("epsilon").get<double>();
    c.episode = jc.at("episode").get<int>();
    c.seed = jc.at("seed").get<uint64_t>();
    c.log_path = jc.at("log").get<std::string>();
    c.ok = jc.at("status").get<std::string>() == "ok";
    c.error = jc.value("error", "");
    if (c.ok) c.log = env::load_episode_log(run_dir + "/" + c.log_path);
    cells.push_back(std::move(c));
  }
  return cells;
}

}  // namespace

CampaignResult run_campaign(const CampaignConfig& cfg) {
  validate_config(cfg);
  if (cfg.output_dir.empty()) throw ConfigError("output_dir is required to run a campaign");

  std::error_code ec;
  fs::create_directories(cfg.output_dir + "/logs", ec);
  if (ec) throw IoError("cannot create output dir: " + cfg.output_dir);

  int workers = cfg.workers;
  if (const char* env_workers = std::getenv("MADE_WORKERS")) {
    const int w = std::atoi(env_workers);
    if (w >= 1) workers = w;
  }

  // Deterministic cell order; results land by index so the worker count
  // cannot affect any output byte.
  std::vector<CellRecord> cells;
  for (size_t si = 0; si < cfg.systems.size(); ++si) {
    for (size_t pi = 0; pi < cfg.policies.size(); ++pi) {
      for (size_t ei = 0; ei < cfg.epsilons.size(); ++ei) {
        for (int ep = 0; ep < cfg.episodes; ++ep) {
          CellRecord c;
          c.system_idx = int(si);
          c.policy_idx = int(pi);
          c.epsilon_idx = int(ei);
          c.system = cfg.systems[si].name();
          c.system_size = static_cast<int>(cfg.systems[si].elements.size());
          c.policy = cfg.policies[pi].name;
          c.epsilon = cfg.epsilons[ei];
          c.episode = ep;
          c.seed = cell_seed(cfg, int(si), int(pi), int(ei), ep);
          cells.push_back(std::move(c));
        }
      }
    }
  }

  struct CellTask {
    size_t cell_index;
    env::EpisodeConfig episode;
  };
  std::vector<CellTask> tasks;
  size_t idx = 0;
  for (size_t si = 0; si < cfg.systems.size(); ++si) {
    const auto sys = chem::make_system(cfg.systems[si].elements, cfg.systems[si].max_atoms);
    for (size_t pi = 0; pi < cfg.policies.size(); ++pi) {
      for (size_t ei = 0; ei < cfg.epsilons.size(); ++ei) {
        for (int ep = 0; ep < cfg.episodes; ++ep, ++idx) {
          env::EpisodeConfig e;
          e.system = sys;
          e.budget = cfg.budget;
          e.epsilon = cfg.epsilons[ei];
          e.seed = cells[idx].seed;
          e.h0_path = cfg.systems[si].h0_file;
          e.oracle = cfg.oracle;
          e.policy = cfg.policies[pi];
          e.match = cfg.match;
          tasks.push_back({idx, std::move(e)});
        }
      }
    }
  }

  std::atomic<size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      const size_t i = next.fetch_add(1);
      if (i >= tasks.size()) return;
      auto& cell = cells[tasks[i].cell_index];
      env::EpisodeLog log = env::run_episode(tasks[i].episode);
      cell.ok = log.complete;
      cell.error = log.error;
      cell.log = std::move(log);
    }
  };
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  // Persist logs (failed cells keep their partial log for inspection).
  for (auto& c : cells) {
    c.log_path = "logs/" + cell_stem(c) + ".jsonl";
    if (c.log) env::save_episode_log(cfg.output_dir + "/" + c.log_path, *c.log);
  }

  write_reports(cfg.output_dir, cfg.baseline_policy, cells);
  write_phase_diagrams(cfg.output_dir, cells, cfg.phase_diagram_resolution);

  nlohmann::json manifest;
  manifest["engine_version"] = kEngineVersion;
  manifest["config_hash"] = cfg.config_hash;
  manifest["baseline_policy"] = cfg.baseline_policy;
  manifest["budget"] = cfg.budget;
  manifest["phase_diagram_resolution"] = cfg.phase_diagram_resolution;
  {
    char buf[64];
    const std::time_t now = std::time(nullptr);
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    manifest["created"] = buf;
  }
  manifest["artifacts"] = {{"metrics", "metrics.csv"},
                           {"aggregate", "aggregate.csv"},
                           {"curves", "curves.csv"},
                           {"af_series", "af_series.csv"}};
  auto& jcells = manifest["cells"];
  jcells = nlohmann::json::array();
  bool any_failed = false;
  for (const auto& c : cells) {
    nlohmann::json jc;
    jc["system"] = c.system;
    jc["system_size"] = c.system_size;
    jc["policy"] = c.policy;
    jc["epsilon"] = c.epsilon;
    jc["episode"] = c.episode;
    jc["seed"] = c.seed;
    jc["log"] = c.log_path;
    jc["status"] = c.ok ? "ok" : "failed";
    if (!c.ok) {
      jc["error"] = c.error;
      any_failed = true;
    }
    jcells.push_back(std::move(jc));
  }

  CampaignResult result;
  result.manifest_path = cfg.output_dir + "/manifest.json";
  write_file(result.manifest_path, manifest.dump(2) + "\n");
  result.exit_code = any_failed ? 2 : 0;
  for (const auto& c : cells)
    result.cells.push_back(
        {0, 0, 0, 0, c.seed, c.log_path, c.ok, c.error});
  return result;
}

void write_metrics_from_dir(const std::string& run_dir) {
  std::string baseline;
  auto cells = cells_from_manifest(run_dir, baseline);
  write_reports(run_dir, baseline, cells);
}

void write_plot_data_from_dir(const std::string& run_dir) {
  std::string baseline;
  auto cells = cells_from_manifest(run_dir, baseline);
  write_reports(run_dir, baseline, cells);
  int resolution = 12;
  write_phase_diagrams(run_dir, cells, resolution);
}

std::vector<chem::ChemicalSystem> sample_systems(const std::vector<std::string>& pool,
                                                 int size, int count, uint64_t seed,
                                                 int max_atoms) {
  if (size < 2) throw ConfigError("system size must be >= 2");
  if (static_cast<int>(pool.size()) < size)
    throw ConfigError("element pool smaller than requested system size");
  // Conservative distinctness check: for tiny pools, cap count by the number
  // of possible subsets.
  double combos = 1.0;
  for (int i = 0; i < size; ++i) combos *= double(pool.size() - i) / double(i + 1);
  if (double(count) > combos)
    throw ConfigError("cannot sample " + std::to_string(count) + " distinct systems");

  Rng rng(seed);
  std::set<std::vector<std::string>> seen;
  std::vector<chem::ChemicalSystem> out;
  while (static_cast<int>(out.size()) < count) {
    std::vector<std::string> candidates = pool;
    std::vector<std::string> pick;
    for (int i = 0; i < size; ++i) {
      const size_t j = rng.uniform_int(candidates.size());
      pick.push_back(candidates[j]);
      candidates.erase(candidates.begin() + static_cast<long>(j));
    }
    std::sort(pick.begin(), pick.end());
    if (!seen.insert(pick).second) continue;
    out.push_back(chem::make_system(pick, std::max(max_atoms, size)));
  }
  return out;
}

const std::vector<std::string>& default_element_pool() {
  // Metallic elements from the benchmark system tables; no radioactives.
  static const std::vector<std::string> pool = {
      "Ag", "Al", "Au", "Ba", "Be", "Ca", "Cd", "Ce", "Co", "Cr", "Cs", "Dy", "Er",
      "Eu", "Fe", "Ga", "Gd", "Hf", "Hg", "Ho", "In", "Ir", "K",  "Li", "Lu", "Mg",
      "Mn", "Na", "Nb", "Nd", "Ni", "Pb", "Pd", "Pt", "Rb", "Rh", "Ru", "Sc", "Sm",
      "Sn", "Sr", "Ta", "Tb", "Ti", "Tl", "Tm", "V",  "W",  "Y",  "Zn", "Zr"};
  return pool;
}

std::vector<chem::Structure> ingest_structures(const std::string& path) {
  if (!fs::exists(path)) throw IoError("structure set not found: " + path);
  return chem::load_structure_set(path);
}

}  // namespace made::bench
