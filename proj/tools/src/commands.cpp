// Copyright 2026 The dnas Authors
// SPDX-License-Identifier: Apache-2.0

#include "commands.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "dnas/architecture.hpp"
#include "dnas/config.hpp"
#include "dnas/dataset.hpp"
#include "dnas/error.hpp"
#include "dnas/latency.hpp"
#include "dnas/search.hpp"
#include "dnas/toml_lite.hpp"
#include "json.hpp"

namespace dnas::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Raised for problems the user can fix by changing flags or inputs.
class UsageError : public Error {
 public:
  using Error::Error;
};

std::string utc_now() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw Error("failed writing '" + path.string() + "'");
}

// Refuses a non-empty output directory unless `force`; with `force` the old
// contents are removed so a stale manifest never outlives its run.
void prepare_out_dir(const fs::path& dir, bool force) {
  if (fs::exists(dir)) {
    if (!fs::is_directory(dir)) throw UsageError("output path '" + dir.string() + "' is a file");
    if (!fs::is_empty(dir)) {
      if (!force) {
        throw UsageError("output directory '" + dir.string() +
                         "' is not empty; pass --force to overwrite");
      }
      fs::remove_all(dir);
    }
  }
  fs::create_directories(dir);
}

void prepare_out_file(const fs::path& file, bool force) {
  if (fs::exists(file) && !force) {
    throw UsageError("output file '" + file.string() + "' exists; pass --force to overwrite");
  }
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
}

struct LoadedConfig {
  toml::Document doc;
  SuperNetConfig net;
  fs::path dir;
};

LoadedConfig load_config(const std::string& path) {
  if (!fs::exists(path)) throw UsageError("config file not found: " + path);
  LoadedConfig c;
  try {
    c.doc = toml::Document::load(path);
    c.net = supernet_config_from(c.doc);
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
  c.dir = fs::path(path).parent_path();
  return c;
}

struct Manifest {
  std::string command;
  std::string config;
  std::uint64_t seed = 0;
  std::string config_hash;
  fs::path out;
  std::string started = utc_now();
  std::vector<std::string> files;

  void write() const {
    json doc = {{"command", command},
                {"config", config},
                {"seed", seed},
                {"config_hash", config_hash},
                {"out_dir", out.string()},
                {"started", started},
                {"finished", utc_now()},
                {"files", files}};
    write_file(out / "manifest.json", doc.dump(2) + "\n");
  }
};

LatencyTable resolve_lut(const LoadedConfig& cfg, const std::string& lut_flag) {
  std::string path = lut_flag;
  if (path.empty()) {
    if (const auto* t = cfg.doc.table("latency")) {
      const std::string p = t->get_string("table", "");
      if (!p.empty()) path = fs::path(p).is_relative() ? (cfg.dir / p).string() : p;
    }
  }
  LatencyTable lut;
  if (path.empty()) {
    double unit_cost = 0.001, overhead = 1.0;
    if (const auto* t = cfg.doc.table("latency")) {
      unit_cost = t->get_double("unit_cost", unit_cost);
      overhead = t->get_double("overhead", overhead);
    }
    lut = build_analytic(cfg.net, unit_cost, overhead);
  } else {
    if (!fs::exists(path)) throw UsageError("latency table not found: " + path);
    lut = LatencyTable::load(path);
  }
  check_complete(lut, cfg.net);
  return lut;
}

struct PreparedData {
  Split split;
  SearchData search;
};

PreparedData prepare_data(const LoadedConfig& cfg, double theta_split, std::uint64_t seed) {
  const DataSpec spec = data_spec_from(cfg.doc, cfg.dir.string());
  PreparedData d;
  d.split = split_dataset(load_dataset(spec), spec.val_fraction, spec.split_seed);
  d.search = split_search_data(d.split.train, theta_split, seed);
  return d;
}

std::string number_tag(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

struct SearchFlags {
  std::string config;
  std::string lut;
  std::string out;
  bool force = false;
  std::optional<double> alpha, beta, lambda, phi;
  std::optional<std::uint64_t> seed;
  std::optional<int> e_warmup, e_total;
  std::vector<double> grid_alpha, grid_lambda;
  int retrain_epochs = 0;
};

int cmd_search(const SearchFlags& f, std::ostream& out, std::ostream& err) {
  const LoadedConfig cfg = load_config(f.config);
  SearchConfig sc = search_config_from(cfg.doc);
  if (f.alpha) sc.alpha = *f.alpha;
  if (f.beta) sc.beta = *f.beta;
  if (f.lambda) sc.multipliers.lambda = *f.lambda;
  if (f.phi) sc.multipliers.phi = *f.phi;
  if (f.seed) sc.seed = *f.seed;
  if (f.e_warmup) sc.threshold.e_warmup = *f.e_warmup;
  if (f.e_total) sc.threshold.e_total = *f.e_total;
  validate(sc);
  const bool grid = !f.grid_alpha.empty() || !f.grid_lambda.empty();

  const LatencyTable lut = resolve_lut(cfg, f.lut);
  const PreparedData data = prepare_data(cfg, sc.theta_split, sc.seed);

  const fs::path dir = f.out;
  prepare_out_dir(dir, f.force);
  Manifest manifest{grid ? "search-grid" : "search", f.config, sc.seed, fingerprint(cfg.net),
                    dir, utc_now(), {}};

  try {
    if (!grid) {
      const SearchResult res = run_search(sc, cfg.net, data.search, lut);
      write_file(dir / "search.csv", search_log_csv(res.log));
      write_file(dir / "pruning.csv", pruning_log_csv(res.pruning));
      write_file(dir / "masks.csv", mask_log_csv(res.masks));
      save_architecture(res.architecture, (dir / "arch.json").string());
      manifest.files = {"search.csv", "pruning.csv", "masks.csv", "arch.json"};
      out << "sampled " << res.architecture.active_layers() << " active layers, "
          << res.architecture.lat_us << " us\n";
    } else {
      GridSpec gs;
      gs.alphas = f.grid_alpha.empty() ? std::vector<double>{sc.alpha} : f.grid_alpha;
      gs.lambdas = f.grid_lambda.empty() ? std::vector<double>{sc.multipliers.lambda} : f.grid_lambda;
      gs.phi = sc.multipliers.phi;
      gs.retrain_epochs = f.retrain_epochs;
      gs.threads = threads_from_env();
      const auto rows = grid_search(gs, sc, cfg.net, data.search, data.split.val, lut);
      for (const auto& row : rows) {
        const std::string name = "alpha" + number_tag(row.alpha) + "_lambda" + number_tag(row.lambda);
        fs::create_directories(dir / name);
        write_file(dir / name / "search.csv", search_log_csv(row.result.log));
        write_file(dir / name / "pruning.csv", pruning_log_csv(row.result.pruning));
        save_architecture(row.result.architecture, (dir / name / "arch.json").string());
        for (const char* file : {"/search.csv", "/pruning.csv", "/arch.json"}) {
          manifest.files.push_back(name + file);
        }
      }
      write_file(dir / "pareto.csv", pareto_csv(rows));
      manifest.files.push_back("pareto.csv");
      out << "grid of " << rows.size() << " variants written to " << (dir / "pareto.csv").string()
          << "\n";
    }
  } catch (const SearchAborted& e) {
    const fs::path diag = dir / "diagnostic.json";
    write_file(diag, e.snapshot());
    err << "error: search aborted: " << e.what() << "\n  diagnostic snapshot: " << diag.string()
        << "\n";
    return kRuntimeFailure;
  }
  manifest.write();
  return kOk;
}

struct BenchFlags {
  std::string config;
  std::string mode = "analytic";
  double unit_cost = 0.001;
  double overhead = 1.0;
  int repeats = 9;
  std::uint64_t seed = 1;
  std::string out;
  bool force = false;
};

int cmd_bench(const BenchFlags& f, std::ostream& out, std::ostream& err) {
  const LoadedConfig cfg = load_config(f.config);
  prepare_out_file(f.out, f.force);
  LatencyTable lut;
  if (f.mode == "analytic") {
    lut = build_analytic(cfg.net, f.unit_cost, f.overhead);
  } else {
    MeasureOptions opt;
    opt.repeats = f.repeats;
    opt.seed = f.seed;
    lut = build_measured(cfg.net, opt);
  }
  lut.save(f.out);
  for (const auto& w : lut.metadata().warnings) err << "warning: " << w << "\n";
  out << lut.entries().size() << " entries written to " << f.out << "\n";
  return kOk;
}

int cmd_count(const std::string& config, bool per_layer, std::ostream& out) {
  const LoadedConfig cfg = load_config(config);
  const auto factors = layer_factors(cfg.net);
  if (per_layer) {
    const auto layers = expand_layers(cfg.net);
    for (std::size_t i = 0; i < layers.size(); ++i) {
      out << "layer " << i << " (stage " << layers[i].stage << ", " << to_string(layers[i].kind)
          << (layers[i].skippable ? ", skippable" : "") << "): " << factors[i] << "\n";
    }
  }
  const BigInt total = count_search_space(cfg.net);
  out << total << " (\xE2\x89\x88" << approx_scientific(total) << ")\n";
  return kOk;
}

struct RetrainFlags {
  std::string arch;
  std::string config;
  int epochs = 20;
  std::uint64_t seed = 1;
  std::string out;
  bool force = false;
};

int cmd_retrain(const RetrainFlags& f, std::ostream& out) {
  const LoadedConfig cfg = load_config(f.config);
  if (!fs::exists(f.arch)) throw UsageError("architecture file not found: " + f.arch);
  const SampledArchitecture arch = load_architecture(f.arch);
  validate_architecture(arch, cfg.net);
  const SearchConfig sc = search_config_from(cfg.doc);
  const PreparedData data = prepare_data(cfg, sc.theta_split, f.seed);

  const fs::path dir = f.out;
  prepare_out_dir(dir, f.force);
  Manifest manifest{"retrain", f.config, f.seed, fingerprint(cfg.net), dir, utc_now(), {}};
  RetrainOptions opt;
  opt.epochs = f.epochs;
  opt.batch_size = sc.batch_size;
  opt.optimizer = sc.psi_optimizer;
  opt.seed = f.seed;
  const RetrainResult r = retrain(arch, cfg.net, data.split.train, data.split.val, opt);
  const json metrics = {{"top1", r.top1}, {"epochs", r.epochs}, {"seed", r.seed}};
  write_file(dir / "metrics.json", metrics.dump(2) + "\n");
  manifest.files = {"metrics.json"};
  manifest.write();
  out << "top1 " << r.top1 << "\n";
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"dnas: latency-aware differentiable architecture search"};
  app.require_subcommand(1);

  SearchFlags sf;
  auto* search = app.add_subcommand("search", "run a search (or a grid of searches)");
  search->add_option("--config", sf.config, "config file")->required();
  search->add_option("--lut", sf.lut, "latency table JSON (default: [latency] of the config)");
  search->add_option("--out", sf.out, "output directory")->required();
  search->add_flag("--force", sf.force, "overwrite a non-empty output directory");
  search->add_option("--alpha", sf.alpha, "latency trade-off");
  search->add_option("--beta", sf.beta, "latency exponent");
  search->add_option("--lambda", sf.lambda, "block multiplier next to a skip");
  search->add_option("--phi", sf.phi, "skip multiplier");
  search->add_option("--seed", sf.seed, "random seed");
  search->add_option("--warmup-epochs", sf.e_warmup, "weight-only epochs");
  search->add_option("--epochs", sf.e_total, "total epochs");
  search->add_option("--grid-alpha", sf.grid_alpha, "comma separated alpha grid")->delimiter(',');
  search->add_option("--grid-lambda", sf.grid_lambda, "comma separated lambda grid")->delimiter(',');
  search->add_option("--retrain-epochs", sf.retrain_epochs, "retrain each grid variant (0: off)");

  BenchFlags bf;
  auto* bench = app.add_subcommand("bench", "build a latency lookup table");
  bench->add_option("--config", bf.config, "config file")->required();
  bench->add_option("--mode", bf.mode, "analytic or measured")
      ->check(CLI::IsMember({"analytic", "measured"}));
  bench->add_option("--unit-cost", bf.unit_cost, "analytic: us per multiply-accumulate");
  bench->add_option("--overhead", bf.overhead, "analytic: us per block");
  bench->add_option("--repeats", bf.repeats, "measured: timing repeats per block");
  bench->add_option("--seed", bf.seed, "measured: seed for block weights");
  bench->add_option("--out", bf.out, "output JSON file")->required();
  bench->add_flag("--force", bf.force, "overwrite an existing file");

  std::string count_config;
  bool per_layer = false;
  auto* count = app.add_subcommand("count", "count the architectures in a search space");
  count->add_option("--config", count_config, "config file")->required();
  count->add_flag("--per-layer", per_layer, "print each layer's factor");

  RetrainFlags rf;
  auto* retrain_cmd = app.add_subcommand("retrain", "train a sampled architecture from scratch");
  retrain_cmd->add_option("--arch", rf.arch, "architecture JSON")->required();
  retrain_cmd->add_option("--config", rf.config, "config file the search used")->required();
  retrain_cmd->add_option("--epochs", rf.epochs, "training epochs");
  retrain_cmd->add_option("--seed", rf.seed, "random seed");
  retrain_cmd->add_option("--out", rf.out, "output directory")->required();
  retrain_cmd->add_flag("--force", rf.force, "overwrite a non-empty output directory");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsageError;
  }

  try {
    if (*search) return cmd_search(sf, out, err);
    if (*bench) return cmd_bench(bf, out, err);
    if (*count) return cmd_count(count_config, per_layer, out);
    if (*retrain_cmd) return cmd_retrain(rf, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kUsageError;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kUsageError;
  } catch (const LatencyTableError& e) {
    err << "error: " << e.what() << "\n";
    return kUsageError;
  } catch (const DataError& e) {
    err << "error: " << e.what() << "\n";
    return kUsageError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kRuntimeFailure;
  }
  return kUsageError;
}

int run(int argc, char** argv, std::ostream& out, std::ostream& err) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, out, err);
}

}  // namespace dnas::cli
