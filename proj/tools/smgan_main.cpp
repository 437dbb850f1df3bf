#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "smgan/errors.hpp"
#include "smgan/harness.hpp"
#include "smgan/metrics.hpp"
#include "smgan/model_io.hpp"
#include "smgan/random.hpp"

namespace fs = std::filesystem;
using namespace smgan;

namespace {

/// Flat key=value configuration; file values first, --key=value flags win.
class Options {
 public:
  void load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file '" + path + "'");
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      std::size_t hash = line.find('#');
      if (hash != std::string::npos) line = line.substr(0, hash);
      std::size_t first = line.find_first_not_of(" \t\r");
      if (first == std::string::npos) continue;
      std::size_t eq = line.find('=');
      if (eq == std::string::npos) {
        throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key=value");
      }
      auto trim = [](std::string s) {
        std::size_t a = s.find_first_not_of(" \t\r");
        std::size_t b = s.find_last_not_of(" \t\r");
        return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
      };
      values_[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
  }

  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  bool has(const std::string& key) const { return values_.count(key) != 0; }
  const std::map<std::string, std::string>& items() const { return values_; }

  std::string str(const std::string& key, const std::string& fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }
  double num(const std::string& key, double fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
      return std::stod(it->second);
    } catch (const std::exception&) {
      throw ConfigError("config key '" + key + "': '" + it->second + "' is not a number");
    }
  }
  std::size_t count(const std::string& key, std::size_t fallback) const {
    double v = num(key, static_cast<double>(fallback));
    if (v < 0 || v != std::floor(v)) {
      throw ConfigError("config key '" + key + "' must be a non-negative integer");
    }
    return static_cast<std::size_t>(v);
  }
  std::vector<std::uint64_t> seed_list(const std::string& key,
                                       std::vector<std::uint64_t> fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    std::vector<std::uint64_t> out;
    std::stringstream ss(it->second);
    std::string item;
    while (std::getline(ss, item, ',')) {
      if (!item.empty()) out.push_back(std::stoull(item));
    }
    if (out.empty()) throw ConfigError("config key '" + key + "' holds no seeds");
    return out;
  }

 private:
  std::map<std::string, std::string> values_;
};

/// Registers the shared configuration surface on a subcommand: every flat
/// config key becomes a --key=value override.
void add_config_options(CLI::App* cmd, std::string& config_path, Options& opts) {
  cmd->add_option("--config", config_path, "flat key=value configuration file");
  static const char* keys[] = {
      "dataset",     "ring_modes",   "ring_radius",   "ring_std",    "shapes_size",
      "shapes_classes", "flat_path", "flat_classes",  "data_seed",   "arch",
      "conditioning", "loss",        "lipschitz",     "gp_lambda",   "beta1",
      "beta2",       "disc_iters",   "lr",            "batch_size",  "total_steps",
      "eval_every",  "latent_dim",   "base_channels", "num_blocks",  "hidden",
      "threads",     "out",          "seeds",         "features",    "layer_mask",
      "eval_samples"};
  for (const char* key : keys) {
    cmd->add_option_function<std::string>(
        std::string("--") + key,
        [&opts, key](const std::string& value) { opts.set(key, value); });
  }
}

Dataset make_dataset(const Options& opts) {
  std::string kind = opts.str("dataset", "ring");
  std::uint64_t seed = static_cast<std::uint64_t>(opts.num("data_seed", 1));
  if (kind == "ring") {
    return ring_of_gaussians(opts.count("ring_modes", 8), opts.num("ring_radius", 1.0),
                             opts.num("ring_std", 0.05), seed);
  }
  if (kind == "shapes") {
    return synthetic_shapes(opts.count("shapes_size", 16), opts.count("shapes_classes", 3), seed);
  }
  if (kind == "flat") {
    if (!opts.has("flat_path")) throw ConfigError("dataset=flat needs flat_path=<file>");
    return import_flat(opts.str("flat_path", ""), seed);
  }
  throw ConfigError("unknown dataset '" + kind + "' (want ring|shapes|flat)");
}

RunBudget make_budget(const Options& opts) {
  RunBudget budget;
  budget.total_steps = opts.count("total_steps", 200);
  budget.eval_every = opts.count("eval_every", 50);
  budget.batch_size = opts.count("batch_size", 64);
  budget.lr = opts.num("lr", 2e-4);
  budget.latent_dim = opts.count("latent_dim", 8);
  budget.base_channels = opts.count("base_channels", 8);
  budget.num_blocks = opts.count("num_blocks", 0);
  budget.modulator_hidden = opts.count("hidden", 8);
  budget.threads = opts.count("threads", 1);
  return budget;
}

CellConfig make_cell(const Options& opts) {
  CellConfig cell;
  cell.loss = loss_kind_from_string(opts.str("loss", "ns"));
  cell.arch = family_from_string(opts.str("arch", "dcgan"));
  cell.lipschitz.kind = lipschitz_from_string(opts.str("lipschitz", "sn"));
  cell.lipschitz.gp_lambda =
      cell.lipschitz.kind == LipschitzKind::kGradientPenalty ? opts.num("gp_lambda", 10.0) : 0.0;
  cell.optimizer.beta1 = opts.num("beta1", 0.0);
  cell.optimizer.beta2 = opts.num("beta2", 0.9);
  cell.optimizer.disc_iters = opts.count("disc_iters", 1);
  cell.conditioning = mod_kind_from_string(opts.str("conditioning", "none"));
  std::string mask = opts.str("layer_mask", "");
  for (char c : mask) {
    if (c == '0') {
      cell.layer_mask.push_back(false);
    } else if (c == '1') {
      cell.layer_mask.push_back(true);
    } else {
      throw ConfigError("layer_mask must be a string of 0s and 1s");
    }
  }
  return cell;
}

GridSpec make_grid(const Options& opts) {
  GridSpec grid;
  std::string lip = opts.str("lipschitz", "sn");
  if (lip == "sn") {
    grid.lipschitz = {{LipschitzKind::kSpectralNorm, 0.0}};
  } else if (lip == "gp") {
    grid.lipschitz = {{LipschitzKind::kGradientPenalty, 1.0},
                      {LipschitzKind::kGradientPenalty, 10.0}};
  } else if (lip == "all") {
    grid.lipschitz = {{LipschitzKind::kSpectralNorm, 0.0},
                      {LipschitzKind::kGradientPenalty, 1.0},
                      {LipschitzKind::kGradientPenalty, 10.0}};
  } else {
    throw ConfigError("grid lipschitz axis must be sn|gp|all");
  }
  std::string arch = opts.str("arch", "all");
  if (arch == "all") {
    grid.archs = {Family::kDcganLike, Family::kResnetLike};
  } else {
    grid.archs = {family_from_string(arch)};
  }
  std::string loss = opts.str("loss", "all");
  if (loss == "all") {
    grid.losses = {LossKind::kNonSaturating, LossKind::kHinge};
  } else {
    grid.losses = {loss_kind_from_string(loss)};
  }
  std::string cond = opts.str("conditioning", "study");
  if (cond == "study") {
    grid.conditionings = {ModKind::kNone, ModKind::kSelf};
  } else {
    grid.conditionings = {mod_kind_from_string(cond)};
  }
  grid.seeds = opts.seed_list("seeds", {1, 2, 3});
  return grid;
}

std::vector<RunRecord> load_records(const std::string& out_dir) {
  std::vector<RunRecord> records;
  fs::path runs = fs::path(out_dir) / "runs";
  if (!fs::exists(runs)) throw IoError("no runs/ directory under '" + out_dir + "'");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(runs)) {
    fs::path file = entry.path() / "record.json";
    if (fs::exists(file)) files.push_back(file);
  }
  std::sort(files.begin(), files.end());
  for (const fs::path& file : files) {
    std::ifstream in(file);
    std::stringstream buf;
    buf << in.rdbuf();
    records.push_back(run_record_from_json(buf.str()));
  }
  if (records.empty()) throw IoError("no records found under '" + out_dir + "'");
  return records;
}

int cmd_train(const Options& opts, std::uint64_t seed) {
  Dataset data = make_dataset(opts);
  CellConfig cell = make_cell(opts);
  cell.seed = seed;
  RunBudget budget = make_budget(opts);
  RunRecord record = run_cell(cell, data, budget);

  std::string out_dir = opts.str("out", "smgan_out");
  fs::path dir = fs::path(out_dir) / "runs" / cell_hash(cell);
  fs::create_directories(dir);
  {
    std::ofstream out(dir / "record.json", std::ios::trunc);
    out << run_record_to_json(record);
    std::ofstream key(dir / "key.txt", std::ios::trunc);
    key << cell_key(cell) << "\n";
  }
  std::printf("run %s status=%s best_fid=%.6g at step %zu (disc=%zu gen=%zu)\n",
              cell_hash(cell).c_str(), record.status.c_str(), record.best_fid,
              record.best_fid_step, record.disc_updates, record.gen_updates);
  std::printf("record: %s\n", (dir / "record.json").string().c_str());
  return record.status == "ok" ? 0 : 1;
}

int cmd_grid(const Options& opts) {
  GridSpec grid = make_grid(opts);
  RunBudget budget = make_budget(opts);
  std::string out_dir = opts.str("out", "smgan_out");
  DatasetFactory factory = [&opts] { return make_dataset(opts); };
  std::vector<RunRecord> records = run_grid(grid, factory, budget, out_dir);
  emit_reports(records, (fs::path(out_dir) / "reports").string());
  PairedResult paired = paired_compare(records);
  std::printf("grid complete: %zu records, paired wins %zu / ties %zu / losses %zu\n",
              records.size(), paired.wins, paired.ties, paired.losses);
  std::printf("reports: %s\n", (fs::path(out_dir) / "reports").string().c_str());
  return 0;
}

int cmd_ablate(const Options& opts) {
  CellConfig base = make_cell(opts);
  if (base.conditioning == ModKind::kNone) base.conditioning = ModKind::kSelf;
  base.layer_mask.clear();
  RunBudget budget = make_budget(opts);
  std::string out_dir = opts.str("out", "smgan_out");
  DatasetFactory factory = [&opts] { return make_dataset(opts); };
  std::vector<AblationRow> rows =
      layer_ablation(base, factory, budget, opts.seed_list("seeds", {1, 2, 3}), out_dir);

  nlohmann::ordered_json j = nlohmann::ordered_json::array();
  std::printf("%-10s %12s %12s %8s\n", "mask", "median_fid", "sem", "ok_runs");
  for (const AblationRow& row : rows) {
    std::printf("%-10s %12.6g %12.6g %8zu\n", row.mask_name.c_str(), row.median_fid, row.sem,
                row.ok_runs);
    nlohmann::ordered_json r;
    r["mask"] = row.mask_name;
    r["median_fid"] = row.median_fid;
    r["sem"] = row.sem;
    r["ok_runs"] = row.ok_runs;
    j.push_back(r);
  }
  fs::create_directories(out_dir);
  std::ofstream out(fs::path(out_dir) / "ablation.json", std::ios::trunc);
  out << j.dump(2) << "\n";
  return 0;
}

int cmd_report(const Options& opts) {
  std::string out_dir = opts.str("out", "smgan_out");
  std::vector<RunRecord> records = load_records(out_dir);
  emit_reports(records, (fs::path(out_dir) / "reports").string());
  std::printf("aggregated %zu records into %s\n", records.size(),
              (fs::path(out_dir) / "reports").string().c_str());
  return 0;
}

int cmd_metrics(const Options& opts, const std::string& model_path) {
  Generator g = load_generator(model_path);
  Dataset data = make_dataset(opts);
  std::string features = opts.str("features", "identity");
  FeatureExtractor fx = make_feature_extractor(features, data,
                                               static_cast<std::uint64_t>(opts.num("data_seed", 1)));
  std::uint64_t seed = static_cast<std::uint64_t>(opts.num("data_seed", 1));
  Rng rng(Rng::derive(seed, 77));
  std::size_t n = opts.count("eval_samples", 256);
  Tensor z = rng.normal_tensor({n, g.spec.latent_dim});
  std::vector<std::size_t> labels(n);
  for (std::size_t i = 0; i < n; ++i)
    labels[i] = data.num_classes() > 1 ? rng.integer(data.num_classes()) : 0;
  Tensor fake = g.forward(Var::constant(z), labels, Mode::kEval).value();
  Tensor real = data.sample_test(n).samples;

  nlohmann::ordered_json j;
  j["model"] = model_path;
  j["features"] = fx.tag;
  j["fid"] = frechet_distance(fit_gaussian(fx.embed(real)), fit_gaussian(fx.embed(fake)));
  if (fx.class_probs) {
    j["inception_score"] = inception_score_surrogate(fx, fake);
  } else {
    j["inception_score"] = nullptr;
  }
  ConditionScore cond = condition_number_score(g, rng.normal_tensor({16, g.spec.latent_dim}));
  j["mean_log_cond"] = cond.mean_log_cond;
  j["cond_degenerate"] = cond.degenerate;
  PRDResult prd = prd_curve(fx.embed(real), fx.embed(fake), 20, 1001, Rng::derive(seed, 78));
  j["f8"] = prd.f8;
  j["f_inv8"] = prd.f_inv8;
  std::cout << j.dump(2) << "\n";
  return 0;
}

int cmd_export_model(const Options& opts, std::uint64_t seed, const std::string& model_path) {
  // Deterministically retrains the configured cell and saves the generator.
  Dataset data = make_dataset(opts);
  CellConfig cell = make_cell(opts);
  cell.seed = seed;
  RunBudget budget = make_budget(opts);
  ArchSpec spec = arch_for(cell, data, budget);
  Generator g = build_generator(spec, cell.seed);
  bool projection = cell.conditioning == ModKind::kConditional ||
                    cell.conditioning == ModKind::kSelfPlusConditional;
  bool sn = cell.lipschitz.kind == LipschitzKind::kSpectralNorm;
  Discriminator d = build_discriminator(spec, projection, sn, Rng::derive(cell.seed, 1000));
  TrainConfig cfg = train_config_for(cell, budget);
  RunRecord record = train_gan(g, d, data, cfg, {});
  save_generator(model_path, g);
  std::printf("trained %zu steps (status=%s), model saved to %s\n", record.gen_updates,
              record.status.c_str(), model_path.c_str());
  return record.status == "ok" ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"self-modulation GAN experimentation toolkit"};
  app.require_subcommand(1);

  Options opts;
  std::string config_path;
  std::uint64_t seed = 0;
  std::string model_path;

  CLI::App* train = app.add_subcommand("train", "train a single configuration");
  add_config_options(train, config_path, opts);
  train->add_option("--seed", seed, "run seed")->required();
  train->add_option("--save-model", model_path, "also save the trained generator to this file");

  CLI::App* grid = app.add_subcommand("grid", "run the full comparison grid");
  add_config_options(grid, config_path, opts);

  CLI::App* ablate = app.add_subcommand("ablate", "which-layer modulation ablation");
  add_config_options(ablate, config_path, opts);

  CLI::App* report = app.add_subcommand("report", "re-aggregate saved run records");
  add_config_options(report, config_path, opts);

  CLI::App* metrics = app.add_subcommand("metrics", "evaluate a saved generator");
  add_config_options(metrics, config_path, opts);
  metrics->add_option("--model", model_path, "saved generator JSON")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (!config_path.empty()) {
      // File values first, then the --key=value flags (already collected in
      // opts) win.
      Options merged;
      merged.load_file(config_path);
      for (const auto& [key, value] : opts.items()) merged.set(key, value);
      opts = merged;
    }
    if (train->parsed()) {
      if (!model_path.empty()) {
        int rc = cmd_export_model(opts, seed, model_path);
        if (rc != 0) return rc;
      }
      return cmd_train(opts, seed);
    }
    if (grid->parsed()) return cmd_grid(opts);
    if (ablate->parsed()) return cmd_ablate(opts);
    if (report->parsed()) return cmd_report(opts);
    if (metrics->parsed()) return cmd_metrics(opts, model_path);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
