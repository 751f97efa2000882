// Experiment driver for the dynamiq library: runs compressed all-reduce
// rounds over simulated topologies and writes the results as CSV/JSON.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dynamiq/allocation.hpp"
#include "dynamiq/engine.hpp"
#include "dynamiq/stats.hpp"
#include "dynamiq/synth.hpp"

using nlohmann::json;
using namespace dynamiq;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitInfeasible = 3;

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Experiment {
  PipelineConfig pipeline;
  GeneratorSpec gradient;
  std::optional<std::uint64_t> gen_seed;  // fixed gradient; otherwise follows the round seed
  std::vector<std::uint64_t> seeds = {};
  std::string output;       // CSV path; stdout when empty
  std::string json_output;  // optional JSON path
};

std::uint64_t env_base_seed() {
  if (const char* v = std::getenv("DYNAMIQ_SEED")) {
    char* end = nullptr;
    std::uint64_t s = std::strtoull(v, &end, 10);
    if (end == v || *end != '\0')
      throw ConfigError("DYNAMIQ_SEED must be an unsigned integer");
    return s;
  }
  return 1;
}

TopologyKind parse_topology(const std::string& s) {
  if (s == "ring") return TopologyKind::kRing;
  if (s == "butterfly") return TopologyKind::kButterfly;
  throw ConfigError("unknown topology '" + s + "' (ring|butterfly)");
}

AllocatorKind parse_allocator(const std::string& s) {
  if (s == "general") return AllocatorKind::kGeneral;
  if (s == "fast") return AllocatorKind::kFast;
  if (s == "fixed") return AllocatorKind::kFixed;
  throw ConfigError("unknown allocator '" + s + "' (general|fast|fixed)");
}

CodecKind parse_codec(const std::string& s) {
  if (s == "quantized") return CodecKind::kQuantized;
  if (s == "lossless") return CodecKind::kLossless;
  throw ConfigError("unknown codec '" + s + "' (quantized|lossless)");
}

GeneratorKind parse_gen(const std::string& s) {
  if (s == "iid-gaussian") return GeneratorKind::kIidGaussian;
  if (s == "locality") return GeneratorKind::kLocality;
  if (s == "file") return GeneratorKind::kFile;
  throw ConfigError("unknown generator '" + s + "' (iid-gaussian|locality|file)");
}

void reject_unknown_keys(const json& obj, const std::vector<std::string>& allowed,
                         const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end())
      throw ConfigError("unknown key '" + it.key() + "' in " + where);
}

void load_config_file(const std::string& path, Experiment& exp) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  json cfg;
  try {
    in >> cfg;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  if (!cfg.is_object()) throw ConfigError("config root must be an object");
  reject_unknown_keys(cfg,
                      {"n", "b", "s", "S", "topology", "allocator", "codec", "fixed_width",
                       "gradient", "flags", "seeds", "output", "json_output", "threads"},
                      "config");
  try {
    if (cfg.contains("n")) exp.pipeline.n_workers = cfg["n"].get<std::uint32_t>();
    if (cfg.contains("b")) exp.pipeline.budget_bits = cfg["b"].get<double>();
    if (cfg.contains("s")) exp.pipeline.group_size = cfg["s"].get<std::uint32_t>();
    if (cfg.contains("S")) exp.pipeline.super_group_size = cfg["S"].get<std::uint32_t>();
    if (cfg.contains("topology"))
      exp.pipeline.topology = parse_topology(cfg["topology"].get<std::string>());
    if (cfg.contains("allocator"))
      exp.pipeline.allocator = parse_allocator(cfg["allocator"].get<std::string>());
    if (cfg.contains("codec")) exp.pipeline.codec = parse_codec(cfg["codec"].get<std::string>());
    if (cfg.contains("fixed_width")) exp.pipeline.fixed_width = cfg["fixed_width"].get<int>();
    if (cfg.contains("threads")) exp.pipeline.threads = cfg["threads"].get<unsigned>();
    if (cfg.contains("gradient")) {
      const json& g = cfg["gradient"];
      reject_unknown_keys(g, {"kind", "d", "seed", "sigma_log", "path"}, "gradient");
      if (g.contains("kind")) exp.gradient.kind = parse_gen(g["kind"].get<std::string>());
      if (g.contains("d")) exp.gradient.d = g["d"].get<std::size_t>();
      if (g.contains("seed")) exp.gen_seed = g["seed"].get<std::uint64_t>();
      if (g.contains("sigma_log")) exp.gradient.sigma_log = g["sigma_log"].get<double>();
      if (g.contains("path")) exp.gradient.path = g["path"].get<std::string>();
    }
    if (cfg.contains("flags")) {
      const json& f = cfg["flags"];
      reject_unknown_keys(f, {"non_uniform", "variable_width", "hierarchical", "correlated"},
                          "flags");
      if (f.contains("non_uniform")) exp.pipeline.non_uniform = f["non_uniform"].get<bool>();
      if (f.contains("variable_width"))
        exp.pipeline.variable_width = f["variable_width"].get<bool>();
      if (f.contains("hierarchical"))
        exp.pipeline.hierarchical_scales = f["hierarchical"].get<bool>();
      if (f.contains("correlated")) exp.pipeline.correlated = f["correlated"].get<bool>();
    }
    if (cfg.contains("seeds")) exp.seeds = cfg["seeds"].get<std::vector<std::uint64_t>>();
    if (cfg.contains("output")) exp.output = cfg["output"].get<std::string>();
    if (cfg.contains("json_output")) exp.json_output = cfg["json_output"].get<std::string>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config type error: ") + e.what());
  }
}

// Keeps the fixed-width allocator and the variable_width flag in agreement.
void reconcile(PipelineConfig& p) {
  if (p.allocator == AllocatorKind::kFixed)
    p.variable_width = false;
  else if (!p.variable_width)
    p.allocator = AllocatorKind::kFixed;
}

std::vector<std::vector<float>> make_worker_values(const Experiment& exp,
                                                   const PipelineConfig& cfg,
                                                   std::uint64_t round_seed) {
  GeneratorSpec spec = exp.gradient;
  spec.seed = exp.gen_seed.value_or(round_seed);
  std::vector<std::vector<float>> values;
  values.reserve(cfg.n_workers);
  for (std::uint32_t w = 0; w < cfg.n_workers; ++w)
    values.push_back(generate_worker(spec, cfg.super_group_size, w));
  return values;
}

const char* topology_name(TopologyKind t) {
  return t == TopologyKind::kRing ? "ring" : "butterfly";
}

struct Record {
  std::string variant;
  std::uint32_t n;
  std::string topology;
  double b;
  std::uint64_t seed;
  double vnmse;
  double bits_per_coord;
  double wall_time;
  std::uint64_t wire_hash;
};

std::string csv_header() {
  return "variant,n,topology,b,seed,vnmse,bits_per_coord,wall_time";
}

std::string csv_row(const Record& r) {
  std::ostringstream os;
  os << r.variant << ',' << r.n << ',' << r.topology << ',' << r.b << ',' << r.seed << ','
     << std::scientific << std::setprecision(9) << r.vnmse << ','
     << std::defaultfloat << std::setprecision(10) << r.bits_per_coord << ','
     << std::fixed << std::setprecision(3) << r.wall_time;
  return os.str();
}

void write_records(const Experiment& exp, const std::vector<Record>& records) {
  std::ostringstream csv;
  csv << csv_header() << '\n';
  for (const Record& r : records) csv << csv_row(r) << '\n';
  if (exp.output.empty()) {
    std::cout << csv.str();
  } else {
    std::ofstream out(exp.output, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + exp.output + " for writing");
    out << csv.str();
  }
  if (!exp.json_output.empty()) {
    json arr = json::array();
    for (const Record& r : records)
      arr.push_back({{"variant", r.variant},
                     {"n", r.n},
                     {"topology", r.topology},
                     {"b", r.b},
                     {"seed", r.seed},
                     {"vnmse", r.vnmse},
                     {"bits_per_coord", r.bits_per_coord},
                     {"wall_time", r.wall_time},
                     {"wire_hash", r.wire_hash}});
    std::ofstream out(exp.json_output, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + exp.json_output + " for writing");
    out << arr.dump(2) << '\n';
  }
}

Record run_one(const Experiment& exp, const PipelineConfig& pipeline, std::uint64_t seed,
               const std::string& variant) {
  PipelineConfig cfg = pipeline;
  cfg.seed = SharedSeed{seed, 0};
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<std::vector<float>> values = make_worker_values(exp, cfg, seed);
  RoundResult result = run_round(values, cfg);
  const auto t1 = std::chrono::steady_clock::now();
  Record rec;
  rec.variant = variant;
  rec.n = cfg.n_workers;
  rec.topology = topology_name(cfg.topology);
  rec.b = cfg.budget_bits;
  rec.seed = seed;
  rec.vnmse = result.vnmse;
  rec.bits_per_coord = bits_per_coordinate(result.wire);
  rec.wall_time = std::chrono::duration<double>(t1 - t0).count();
  rec.wire_hash = result.wire_hash;
  return rec;
}

void print_summary(const std::vector<Record>& records) {
  if (records.empty()) return;
  double mean = 0.0, bits = 0.0;
  for (const Record& r : records) {
    mean += r.vnmse;
    bits += r.bits_per_coord;
  }
  mean /= records.size();
  bits /= records.size();
  double var = 0.0;
  for (const Record& r : records) var += (r.vnmse - mean) * (r.vnmse - mean);
  const double sigma = records.size() > 1 ? std::sqrt(var / (records.size() - 1)) : 0.0;
  std::cerr << "vNMSE mean " << std::scientific << mean << " sigma " << sigma
            << ", bits/coord " << std::defaultfloat << bits << " over " << records.size()
            << " records\n";
}

int cmd_allreduce(const Experiment& exp) {
  std::vector<Record> records;
  for (std::uint64_t seed : exp.seeds)
    records.push_back(run_one(exp, exp.pipeline, seed, "dynamiq"));
  std::sort(records.begin(), records.end(),
            [](const Record& a, const Record& b) { return a.seed < b.seed; });
  write_records(exp, records);
  print_summary(records);
  return 0;
}

int cmd_ablate(const Experiment& exp) {
  std::vector<Record> records;
  for (const auto& [name, cfg] : ablation_ladder(exp.pipeline))
    for (std::uint64_t seed : exp.seeds) records.push_back(run_one(exp, cfg, seed, name));
  write_records(exp, records);
  print_summary(records);
  return 0;
}

int cmd_topology_compare(const Experiment& exp) {
  if (exp.pipeline.n_workers & (exp.pipeline.n_workers - 1))
    throw ConfigError("topology comparison requires a power-of-two worker count");
  std::vector<Record> records;
  std::ostringstream paired;
  paired << "seed,vnmse_ring,vnmse_butterfly,ratio\n";
  for (std::uint64_t seed : exp.seeds) {
    PipelineConfig ring = exp.pipeline;
    ring.topology = TopologyKind::kRing;
    PipelineConfig butterfly = exp.pipeline;
    butterfly.topology = TopologyKind::kButterfly;
    Record r1 = run_one(exp, ring, seed, "dynamiq");
    Record r2 = run_one(exp, butterfly, seed, "dynamiq");
    records.push_back(r1);
    records.push_back(r2);
    paired << seed << ',' << std::scientific << std::setprecision(9) << r1.vnmse << ','
           << r2.vnmse << ',' << std::defaultfloat << std::setprecision(6)
           << (r1.vnmse > 0 ? r2.vnmse / r1.vnmse : 0.0) << '\n';
  }
  write_records(exp, records);
  std::cout << paired.str();
  print_summary(records);
  return 0;
}

int cmd_locality(const Experiment& exp, const std::string& prefix) {
  GeneratorSpec spec = exp.gradient;
  spec.seed = exp.gen_seed.value_or(exp.seeds.front());
  if (spec.kind == GeneratorKind::kFile && spec.path.empty())
    throw ConfigError("locality: file generator needs a path");
  std::vector<float> values = generate(spec, exp.pipeline.super_group_size);
  Gradient g = Gradient::from_values(values, exp.pipeline.group_size,
                                     exp.pipeline.super_group_size);
  struct Panel {
    const char* name;
    Granularity granularity;
    bool shuffle;
  };
  const Panel panels[] = {{"group_original", Granularity::kGroup, false},
                          {"group_shuffled", Granularity::kGroup, true},
                          {"supergroup_original", Granularity::kSuperGroup, false},
                          {"supergroup_shuffled", Granularity::kSuperGroup, true}};
  for (const Panel& p : panels) {
    std::vector<double> norms = locality_cdf(g, p.granularity, p.shuffle, SharedSeed{spec.seed, 0});
    const std::string path = prefix + "_" + p.name + ".csv";
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out << "rank_fraction,norm\n";
    for (std::size_t i = 0; i < norms.size(); ++i)
      out << std::setprecision(9) << (static_cast<double>(i) + 1.0) / norms.size() << ','
          << std::scientific << norms[i] << std::defaultfloat << '\n';
  }
  std::cerr << "wrote 4 CDF files with prefix " << prefix << "\n";
  return 0;
}

int cmd_sweep_budget(const Experiment& exp, std::vector<double> budgets) {
  if (budgets.empty()) budgets = {3, 4, 5, 6};
  for (double b : budgets)
    if (b < 3.0 || b > 8.0)
      throw ConfigError("budget sweep accepts b in [3, 8], got " + std::to_string(b));
  std::vector<Record> records;
  for (double b : budgets) {
    PipelineConfig cfg = exp.pipeline;
    cfg.budget_bits = b;
    for (std::uint64_t seed : exp.seeds)
      records.push_back(run_one(exp, cfg, seed, "dynamiq"));
  }
  write_records(exp, records);
  print_summary(records);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dynamiq: compressed multi-hop all-reduce simulator"};
  app.require_subcommand(1);

  Experiment exp;
  std::string config_path, topology = "ring", allocator = "fast", codec = "quantized",
              gen = "locality", input_path, locality_prefix = "locality";
  std::uint64_t seed_count = 0, base_seed = 0, gen_seed = 0;
  std::vector<std::uint64_t> seed_list;
  std::vector<double> budgets;
  bool has_base_seed = false;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "JSON experiment file");
    cmd->add_option("--n", exp.pipeline.n_workers, "worker count");
    cmd->add_option("--d", exp.gradient.d, "gradient length");
    cmd->add_option("--b", exp.pipeline.budget_bits, "bit budget per coordinate");
    cmd->add_option("--s", exp.pipeline.group_size, "group size");
    cmd->add_option("--S", exp.pipeline.super_group_size, "super-group size");
    cmd->add_option("--topology", topology, "ring|butterfly");
    cmd->add_option("--alloc", allocator, "general|fast|fixed");
    cmd->add_option("--codec", codec, "quantized|lossless");
    cmd->add_option("--fixed-width", exp.pipeline.fixed_width, "width when --alloc fixed");
    cmd->add_option("--gen", gen, "iid-gaussian|locality|file");
    cmd->add_option("--sigma-log", exp.gradient.sigma_log, "locality log-normal spread");
    cmd->add_option("--input", input_path, "raw gradient file for --gen file");
    cmd->add_option("--gen-seed", gen_seed, "gradient seed (defaults to the round seed)");
    cmd->add_option("--seeds", seed_count, "number of consecutive seeds to run");
    cmd->add_option("--seed-list", seed_list, "explicit seeds")->delimiter(',');
    cmd->add_option("--base-seed", base_seed, "first seed (default DYNAMIQ_SEED or 1)")
        ->each([&](const std::string&) { has_base_seed = true; });
    cmd->add_option("--threads", exp.pipeline.threads, "engine threads over chunks");
    cmd->add_option("--out", exp.output, "CSV output path (stdout when omitted)");
    cmd->add_option("--json", exp.json_output, "JSON output path");
    cmd->add_flag("--no-non-uniform", "use uniform codebooks");
    cmd->add_flag("--no-hierarchical", "flat 16-bit group scales");
    cmd->add_flag("--no-correlated", "independent rounding");
  };

  CLI::App* allreduce = app.add_subcommand("allreduce", "run full rounds, one record per seed");
  CLI::App* ablate = app.add_subcommand("ablate", "run the five-variant ladder");
  CLI::App* topo = app.add_subcommand("topology-compare", "paired ring vs butterfly runs");
  CLI::App* locality = app.add_subcommand("locality", "write norm CDF data");
  CLI::App* sweep = app.add_subcommand("sweep-budget", "run a budget sweep");
  for (CLI::App* cmd : {allreduce, ablate, topo, locality, sweep}) add_common(cmd);
  locality->add_option("--out-prefix", locality_prefix, "CDF file prefix");
  sweep->add_option("--budgets", budgets, "budgets to sweep")->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return kExitConfig;
  }

  try {
    CLI::App* cmd = app.get_subcommands().front();
    if (cmd->count("--config")) load_config_file(config_path, exp);
    // Explicit flags override the config file.
    if (cmd->count("--topology") || !cmd->count("--config"))
      exp.pipeline.topology = parse_topology(topology);
    if (cmd->count("--alloc") || !cmd->count("--config"))
      exp.pipeline.allocator = parse_allocator(allocator);
    if (cmd->count("--codec") || !cmd->count("--config"))
      exp.pipeline.codec = parse_codec(codec);
    if (cmd->count("--gen") || !cmd->count("--config")) exp.gradient.kind = parse_gen(gen);
    if (cmd->count("--input")) {
      exp.gradient.path = input_path;
      exp.gradient.kind = GeneratorKind::kFile;
    }
    if (cmd->count("--no-non-uniform")) exp.pipeline.non_uniform = false;
    if (cmd->count("--no-hierarchical")) exp.pipeline.hierarchical_scales = false;
    if (cmd->count("--no-correlated")) exp.pipeline.correlated = false;
    reconcile(exp.pipeline);

    if (!seed_list.empty()) exp.seeds = seed_list;
    if (exp.seeds.empty()) {
      const std::uint64_t base = has_base_seed ? base_seed : env_base_seed();
      const std::uint64_t count = seed_count > 0 ? seed_count : 1;
      for (std::uint64_t i = 0; i < count; ++i) exp.seeds.push_back(base + i);
    }
    if (exp.seeds.empty()) throw ConfigError("empty seed list");
    if (cmd->count("--gen-seed")) exp.gen_seed = gen_seed;

    exp.pipeline.validate();

    if (cmd == allreduce) return cmd_allreduce(exp);
    if (cmd == ablate) return cmd_ablate(exp);
    if (cmd == topo) return cmd_topology_compare(exp);
    if (cmd == locality) return cmd_locality(exp, locality_prefix);
    if (cmd == sweep) return cmd_sweep_budget(exp, budgets);
    throw ConfigError("no subcommand");
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const InfeasibleBudget& e) {
    std::cerr << "infeasible: " << e.what() << "\n";
    return kExitInfeasible;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInfeasible;
  }
}
