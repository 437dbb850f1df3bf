#include "smgan/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "smgan/errors.hpp"
#include "smgan/metrics.hpp"
#include "smgan/random.hpp"

namespace smgan {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

bool OptimizerSetting::operator<(const OptimizerSetting& o) const {
  if (beta1 != o.beta1) return beta1 < o.beta1;
  if (beta2 != o.beta2) return beta2 < o.beta2;
  return disc_iters < o.disc_iters;
}

namespace {

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string mask_string(const std::vector<bool>& mask) {
  if (mask.empty()) return "all";
  std::string out;
  for (bool b : mask) out += b ? '1' : '0';
  return out;
}

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

std::string to_string(const OptimizerSetting& s) {
  return "(" + fmt_double(s.beta1) + "," + fmt_double(s.beta2) + "," +
         std::to_string(s.disc_iters) + ")";
}

std::string to_string(const LipschitzSetting& s) {
  if (s.kind == LipschitzKind::kSpectralNorm) return "sn";
  return "gp" + fmt_double(s.gp_lambda);
}

std::vector<OptimizerSetting> default_optimizer_axis() {
  return {{0.0, 0.9, 1}, {0.0, 0.9, 2}, {0.5, 0.999, 1}};
}

std::size_t GridSpec::num_cells() const {
  return losses.size() * archs.size() * lipschitz.size() * optimizers.size() *
         conditionings.size();
}

void GridSpec::validate() const {
  if (losses.empty() || archs.empty() || lipschitz.empty() || optimizers.empty() ||
      conditionings.empty() || seeds.empty()) {
    throw ConfigError("grid: every axis needs at least one entry");
  }
  for (const LipschitzSetting& l : lipschitz) {
    if (l.kind == LipschitzKind::kGradientPenalty && l.gp_lambda != 1.0 && l.gp_lambda != 10.0) {
      throw ConfigError("grid: gradient penalty lambda must be 1 or 10");
    }
  }
}

std::string cell_key(const CellConfig& cell) {
  std::ostringstream out;
  out << "loss=" << to_string(cell.loss) << ";lipschitz=" << to_string(cell.lipschitz)
      << ";arch=" << to_string(cell.arch) << ";opt=" << to_string(cell.optimizer)
      << ";conditioning=" << to_string(cell.conditioning) << ";mask=" << mask_string(cell.layer_mask)
      << ";seed=" << cell.seed;
  return out.str();
}

std::string cell_hash(const CellConfig& cell) {
  // FNV-1a 64 over the canonical key.
  std::uint64_t h = 1469598103934665603ull;
  for (char c : cell_key(cell)) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ull;
  }
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%016" PRIx64, h);
  return buf;
}

ArchSpec arch_for(const CellConfig& cell, const Dataset& data, const RunBudget& budget) {
  const Shape& sample = data.sample_shape();
  if (sample.size() != 3) {
    throw ConfigError("harness: dataset samples must be rank-3 (h, w, c)");
  }
  ArchSpec spec;
  spec.family = cell.arch;
  spec.latent_dim = budget.latent_dim;
  spec.base_channels = budget.base_channels;
  spec.out_h = sample[0];
  spec.out_w = sample[1];
  spec.out_c = sample[2];
  spec.num_classes = data.num_classes();
  std::size_t blocks = budget.num_blocks;
  if (blocks == 0) {
    while (blocks < 2 && spec.out_h % (std::size_t{1} << (blocks + 1)) == 0 &&
           spec.out_w % (std::size_t{1} << (blocks + 1)) == 0) {
      ++blocks;
    }
  }
  spec.num_blocks = blocks;
  spec.modulation.kind = cell.conditioning;
  spec.modulation.layer_mask = cell.layer_mask;
  spec.modulation.hidden = budget.modulator_hidden;
  return spec;
}

TrainConfig train_config_for(const CellConfig& cell, const RunBudget& budget) {
  TrainConfig cfg;
  cfg.loss = cell.loss;
  cfg.lipschitz = cell.lipschitz.kind;
  cfg.gp_lambda = cell.lipschitz.kind == LipschitzKind::kGradientPenalty ? cell.lipschitz.gp_lambda
                                                                         : 10.0;
  cfg.beta1 = cell.optimizer.beta1;
  cfg.beta2 = cell.optimizer.beta2;
  cfg.disc_iters = cell.optimizer.disc_iters;
  cfg.lr = budget.lr;
  cfg.batch_size = budget.batch_size;
  cfg.total_steps = budget.total_steps;
  cfg.eval_every = budget.eval_every;
  cfg.seed = cell.seed;
  return cfg;
}

RunRecord run_cell(const CellConfig& cell, Dataset& data, const RunBudget& budget) {
  ArchSpec spec = arch_for(cell, data, budget);
  Generator g = build_generator(spec, cell.seed);
  bool projection = cell.conditioning == ModKind::kConditional ||
                    cell.conditioning == ModKind::kSelfPlusConditional;
  bool sn = cell.lipschitz.kind == LipschitzKind::kSpectralNorm;
  Discriminator d = build_discriminator(spec, projection, sn, Rng::derive(cell.seed, 1000));
  TrainConfig cfg = train_config_for(cell, budget);

  FeatureExtractor fx = make_identity_extractor(data.sample_shape());
  std::uint64_t seed = cell.seed;
  MetricsHook hook = [&data, &fx, seed](std::size_t step, Generator& gen, Discriminator&) {
    Rng rng(Rng::derive(seed, 5000 + step));
    std::size_t n_eval = 256;
    Tensor z = rng.normal_tensor({n_eval, gen.spec.latent_dim});
    std::vector<std::size_t> labels(n_eval);
    for (std::size_t i = 0; i < n_eval; ++i)
      labels[i] = data.num_classes() > 1 ? rng.integer(data.num_classes()) : 0;
    Tensor fake = gen.forward(Var::constant(z), labels, Mode::kEval).value();
    Tensor real = data.sample_test(n_eval).samples;
    Tensor fake_feat = fx.embed(fake);
    Tensor real_feat = fx.embed(real);

    EvalPoint p;
    p.step = step;
    p.fid = frechet_distance(fit_gaussian(real_feat), fit_gaussian(fake_feat));
    p.is = 1.0;  // identity features carry no class head; see the metrics CLI
    ConditionScore cond =
        condition_number_score(gen, rng.normal_tensor({4, gen.spec.latent_dim}));
    p.cond_number = cond.mean_log_cond;
    PRDResult prd = prd_curve(real_feat, fake_feat, 20, 201, Rng::derive(seed, 6000 + step));
    p.f8 = prd.f8;
    p.f_inv8 = prd.f_inv8;
    return p;
  };
  return train_gan(g, d, data, cfg, hook);
}

std::vector<RunRecord> run_grid(const GridSpec& grid, const DatasetFactory& make_dataset,
                                const RunBudget& budget, const std::string& out_dir) {
  grid.validate();
  std::vector<CellConfig> cells;
  for (LossKind loss : grid.losses)
    for (Family arch : grid.archs)
      for (const LipschitzSetting& lip : grid.lipschitz)
        for (const OptimizerSetting& opt : grid.optimizers)
          for (ModKind cond : grid.conditionings)
            for (std::uint64_t seed : grid.seeds) {
              CellConfig cell;
              cell.loss = loss;
              cell.arch = arch;
              cell.lipschitz = lip;
              cell.optimizer = opt;
              cell.conditioning = cond;
              cell.seed = seed;
              cells.push_back(cell);
            }

  fs::create_directories(fs::path(out_dir) / "runs");
  std::vector<RunRecord> records(cells.size());
  std::vector<char> present(cells.size(), 0);

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= cells.size()) return;
      const CellConfig& cell = cells[i];
      fs::path dir = fs::path(out_dir) / "runs" / cell_hash(cell);
      fs::path file = dir / "record.json";
      if (fs::exists(file)) {
        try {
          std::ifstream in(file);
          std::stringstream buf;
          buf << in.rdbuf();
          records[i] = run_record_from_json(buf.str());
          present[i] = 1;
          continue;
        } catch (const IoError&) {
          // Unreadable record: retrain the cell.
        }
      }
      Dataset data = make_dataset();
      RunRecord record = run_cell(cell, data, budget);
      records[i] = record;
      present[i] = 1;
      try {
        fs::create_directories(dir);
        fs::path tmp = dir / "record.json.tmp";
        std::ofstream out(tmp, std::ios::trunc);
        out << run_record_to_json(record);
        out.close();
        fs::rename(tmp, file);
        std::ofstream key(dir / "key.txt", std::ios::trunc);
        key << cell_key(cell) << "\n";
      } catch (const std::exception&) {
        // I/O failure marks the cell missing on disk; the in-memory record
        // still participates in this aggregation pass.
      }
    }
  };

  std::size_t n_threads = std::max<std::size_t>(1, budget.threads);
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < n_threads; ++t) pool.emplace_back(worker);
  worker();
  for (std::thread& t : pool) t.join();

  std::vector<RunRecord> out;
  for (std::size_t i = 0; i < cells.size(); ++i)
    if (present[i]) out.push_back(records[i]);
  return out;
}

MedianSem median_with_sem(const std::vector<double>& values) {
  if (values.empty()) throw ArgumentError("median_with_sem: empty value list");
  MedianSem out;
  out.median = median_of(values);
  if (values.size() == 1) return out;
  const std::size_t resamples = 1000;
  Rng rng(Rng::derive(424242, values.size()));
  std::vector<double> medians(resamples);
  std::vector<double> draw(values.size());
  for (std::size_t b = 0; b < resamples; ++b) {
    for (std::size_t i = 0; i < values.size(); ++i) draw[i] = values[rng.integer(values.size())];
    medians[b] = median_of(draw);
  }
  double mean = 0.0;
  for (double m : medians) mean += m;
  mean /= static_cast<double>(resamples);
  double ss = 0.0;
  for (double m : medians) ss += (m - mean) * (m - mean);
  out.sem = std::sqrt(ss / static_cast<double>(resamples - 1));
  return out;
}

namespace {

struct GroupKey {
  std::string loss, lipschitz, arch;
  auto operator<=>(const GroupKey&) const = default;
};

bool is_selfmod(const RunRecord& r) {
  return r.conditioning != to_string(ModKind::kNone);
}

}  // namespace

std::vector<UnpairedRow> unpaired_compare(const std::vector<RunRecord>& records) {
  // group -> conditioning (0 baseline / 1 self-mod) -> optimizer -> best fids
  std::map<GroupKey, std::array<std::map<OptimizerSetting, std::vector<double>>, 2>> groups;
  for (const RunRecord& r : records) {
    if (r.status != "ok") continue;  // medians-of-ok policy
    GroupKey key{to_string(r.config.loss),
                 to_string(LipschitzSetting{r.config.lipschitz, r.config.gp_lambda}), r.arch};
    if (r.config.lipschitz == LipschitzKind::kSpectralNorm) {
      key.lipschitz = "sn";
    }
    OptimizerSetting opt{r.config.beta1, r.config.beta2, r.config.disc_iters};
    groups[key][is_selfmod(r) ? 1 : 0][opt].push_back(r.best_fid);
  }
  std::vector<UnpairedRow> rows;
  for (auto& [key, sides] : groups) {
    UnpairedRow row;
    row.loss = key.loss;
    row.lipschitz = key.lipschitz;
    row.arch = key.arch;
    for (int side = 0; side < 2; ++side) {
      bool found = false;
      double best = 0.0;
      OptimizerSetting best_opt;
      for (auto& [opt, fids] : sides[side]) {  // map order = lexicographic tie-break
        double med = median_of(fids);
        if (!found || med < best) {
          found = true;
          best = med;
          best_opt = opt;
        }
      }
      if (side == 0) {
        row.baseline_ok = found;
        row.baseline_fid = best;
        row.baseline_opt = best_opt;
      } else {
        row.selfmod_ok = found;
        row.selfmod_fid = best;
        row.selfmod_opt = best_opt;
      }
    }
    rows.push_back(row);
  }
  return rows;
}

double PairedResult::win_rate() const {
  std::size_t total = wins + ties + losses;
  return total == 0 ? 0.0 : static_cast<double>(wins) / static_cast<double>(total);
}

PairedResult paired_compare(const std::vector<RunRecord>& records) {
  struct FullKey {
    GroupKey group;
    OptimizerSetting opt;
    bool operator<(const FullKey& o) const {
      if (group != o.group) return group < o.group;
      if (opt == o.opt) return false;
      return opt < o.opt;
    }
  };
  std::map<FullKey, std::array<std::vector<double>, 2>> settings;
  for (const RunRecord& r : records) {
    GroupKey g{to_string(r.config.loss),
               r.config.lipschitz == LipschitzKind::kSpectralNorm
                   ? std::string("sn")
                   : to_string(LipschitzSetting{r.config.lipschitz, r.config.gp_lambda}),
               r.arch};
    FullKey key{g, {r.config.beta1, r.config.beta2, r.config.disc_iters}};
    double fid = r.status == "ok" ? r.best_fid : std::numeric_limits<double>::infinity();
    settings[key][is_selfmod(r) ? 1 : 0].push_back(fid);
  }
  PairedResult out;
  for (auto& [key, sides] : settings) {
    if (sides[0].empty() || sides[1].empty()) {
      out.unmatched.push_back(key.group.loss + ";" + key.group.lipschitz + ";" + key.group.arch +
                              ";" + to_string(key.opt));
      continue;
    }
    double base = median_of(sides[0]);
    double self = median_of(sides[1]);
    if (self < base) {
      ++out.wins;
    } else if (self == base) {
      ++out.ties;
    } else {
      ++out.losses;
    }
  }
  return out;
}

double relative_reduction(double baseline_fid, double selfmod_fid) {
  if (!(baseline_fid > 0.0)) {
    throw ArgumentError("relative_reduction: baseline FID must be positive, got " +
                        fmt_double(baseline_fid));
  }
  return 100.0 * (baseline_fid - selfmod_fid) / baseline_fid;
}

std::vector<AblationRow> layer_ablation(const CellConfig& base, const DatasetFactory& make_dataset,
                                        const RunBudget& budget,
                                        const std::vector<std::uint64_t>& seeds,
                                        const std::string& out_dir) {
  if (seeds.empty()) throw ArgumentError("layer_ablation: need at least one seed");
  if (base.conditioning == ModKind::kNone) {
    throw ConfigError("layer_ablation: base configuration must be modulated");
  }
  Dataset probe = make_dataset();
  CellConfig probe_cell = base;
  probe_cell.layer_mask.clear();
  std::size_t sites = arch_for(probe_cell, probe, budget).num_bn_sites();
  if (sites == 0) throw ConfigError("layer_ablation: architecture has no modulated sites");

  std::vector<std::pair<std::string, std::vector<bool>>> masks;
  masks.emplace_back("all", std::vector<bool>(sites, true));
  for (std::size_t k = 0; k < sites; ++k) {
    std::vector<bool> mask(sites, false);
    mask[k] = true;
    masks.emplace_back("layer" + std::to_string(k), mask);
  }

  std::vector<AblationRow> rows;
  for (auto& [name, mask] : masks) {
    std::vector<RunRecord> records;
    for (std::uint64_t seed : seeds) {
      CellConfig cell = base;
      cell.layer_mask = mask;
      cell.seed = seed;
      fs::path dir = fs::path(out_dir) / "runs" / cell_hash(cell);
      fs::path file = dir / "record.json";
      bool loaded = false;
      if (fs::exists(file)) {
        try {
          std::ifstream in(file);
          std::stringstream buf;
          buf << in.rdbuf();
          records.push_back(run_record_from_json(buf.str()));
          loaded = true;
        } catch (const IoError&) {
        }
      }
      if (!loaded) {
        Dataset data = make_dataset();
        RunRecord record = run_cell(cell, data, budget);
        records.push_back(record);
        fs::create_directories(dir);
        std::ofstream out(file, std::ios::trunc);
        out << run_record_to_json(record);
        std::ofstream key(dir / "key.txt", std::ios::trunc);
        key << cell_key(cell) << "\n";
      }
    }
    AblationRow row;
    row.mask_name = name;
    row.mask = mask;
    std::vector<double> fids;
    for (const RunRecord& r : records)
      if (r.status == "ok") fids.push_back(r.best_fid);
    row.ok_runs = fids.size();
    if (!fids.empty()) {
      MedianSem ms = median_with_sem(fids);
      row.median_fid = ms.median;
      row.sem = ms.sem;
    }
    rows.push_back(row);
  }
  return rows;
}

std::optional<double> pearson_r(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw ArgumentError("pearson_r: length mismatch");
  std::size_t n = x.size();
  if (n < 2) return std::nullopt;
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return std::nullopt;
  return sxy / std::sqrt(sxx * syy);
}

std::string records_to_csv(const std::vector<RunRecord>& records) {
  std::ostringstream out;
  out << "hash,loss,lipschitz,gp_lambda,arch,conditioning,beta1,beta2,disc_iters,seed,status,"
         "best_fid,best_fid_step,best_is,final_cond_number,final_f8,final_f_inv8,disc_updates,"
         "gen_updates\n";
  for (const RunRecord& r : records) {
    CellConfig cell;
    cell.loss = r.config.loss;
    cell.arch = family_from_string(r.arch);
    cell.lipschitz = {r.config.lipschitz,
                      r.config.lipschitz == LipschitzKind::kGradientPenalty ? r.config.gp_lambda
                                                                            : 0.0};
    cell.optimizer = {r.config.beta1, r.config.beta2, r.config.disc_iters};
    cell.conditioning = mod_kind_from_string(r.conditioning);
    cell.seed = r.config.seed;
    out << cell_hash(cell) << ',' << to_string(r.config.loss) << ','
        << to_string(r.config.lipschitz) << ',' << fmt_double(r.config.gp_lambda) << ',' << r.arch
        << ',' << r.conditioning << ',' << fmt_double(r.config.beta1) << ','
        << fmt_double(r.config.beta2) << ',' << r.config.disc_iters << ',' << r.config.seed << ','
        << r.status << ',' << fmt_double(r.best_fid) << ',' << r.best_fid_step << ','
        << fmt_double(r.best_is) << ',' << fmt_double(r.final_cond_number) << ','
        << fmt_double(r.final_f8) << ',' << fmt_double(r.final_f_inv8) << ',' << r.disc_updates
        << ',' << r.gen_updates << '\n';
  }
  return out.str();
}

std::vector<RunRecord> records_from_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open CSV report '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw IoError("empty CSV report '" + path + "'");
  std::vector<RunRecord> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() != 19) throw IoError("malformed CSV row: '" + line + "'");
    RunRecord r;
    r.config.loss = loss_kind_from_string(fields[1]);
    r.config.lipschitz = lipschitz_from_string(fields[2]);
    r.config.gp_lambda = std::stod(fields[3]);
    r.arch = fields[4];
    r.conditioning = fields[5];
    r.config.beta1 = std::stod(fields[6]);
    r.config.beta2 = std::stod(fields[7]);
    r.config.disc_iters = std::stoul(fields[8]);
    r.config.seed = std::stoull(fields[9]);
    r.status = fields[10];
    r.best_fid = std::strtod(fields[11].c_str(), nullptr);
    r.best_fid_step = std::stoul(fields[12]);
    r.best_is = std::stod(fields[13]);
    r.final_cond_number = std::stod(fields[14]);
    r.final_f8 = std::stod(fields[15]);
    r.final_f_inv8 = std::stod(fields[16]);
    r.disc_updates = std::stoul(fields[17]);
    r.gen_updates = std::stoul(fields[18]);
    out.push_back(r);
  }
  return out;
}

namespace {

void write_svg_scatter(const std::string& path, const std::string& title,
                       const std::vector<double>& xs, const std::vector<double>& ys,
                       const std::vector<std::string>& colors, const std::string& xlabel,
                       const std::string& ylabel) {
  const double width = 640, height = 480, pad = 60;
  double xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  if (!xs.empty()) {
    xmin = *std::min_element(xs.begin(), xs.end());
    xmax = *std::max_element(xs.begin(), xs.end());
    ymin = *std::min_element(ys.begin(), ys.end());
    ymax = *std::max_element(ys.begin(), ys.end());
  }
  if (xmax == xmin) {
    xmin -= 0.5;
    xmax += 0.5;
  }
  if (ymax == ymin) {
    ymin -= 0.5;
    ymax += 0.5;
  }
  auto px = [&](double x) { return pad + (x - xmin) / (xmax - xmin) * (width - 2 * pad); };
  auto py = [&](double y) { return height - pad - (y - ymin) / (ymax - ymin) * (height - 2 * pad); };
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write plot '" + path + "'");
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\">\n";
  out << "<rect x=\"" << pad << "\" y=\"" << pad << "\" width=\"" << width - 2 * pad
      << "\" height=\"" << height - 2 * pad << "\" fill=\"none\" stroke=\"black\"/>\n";
  out << "<text x=\"" << width / 2 << "\" y=\"24\" text-anchor=\"middle\">" << title
      << "</text>\n";
  out << "<text x=\"" << width / 2 << "\" y=\"" << height - 12 << "\" text-anchor=\"middle\">"
      << xlabel << "</text>\n";
  out << "<text x=\"16\" y=\"" << height / 2
      << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " << height / 2 << ")\">" << ylabel
      << "</text>\n";
  out << "<text x=\"" << pad << "\" y=\"" << height - pad + 16 << "\" font-size=\"10\">"
      << fmt_double(xmin) << "</text>\n";
  out << "<text x=\"" << width - pad << "\" y=\"" << height - pad + 16
      << "\" font-size=\"10\" text-anchor=\"end\">" << fmt_double(xmax) << "</text>\n";
  out << "<text x=\"" << pad - 4 << "\" y=\"" << height - pad
      << "\" font-size=\"10\" text-anchor=\"end\">" << fmt_double(ymin) << "</text>\n";
  out << "<text x=\"" << pad - 4 << "\" y=\"" << pad
      << "\" font-size=\"10\" text-anchor=\"end\">" << fmt_double(ymax) << "</text>\n";
  for (std::size_t i = 0; i < xs.size(); ++i) {
    out << "<circle cx=\"" << px(xs[i]) << "\" cy=\"" << py(ys[i]) << "\" r=\"4\" fill=\""
        << colors[i] << "\" fill-opacity=\"0.7\"/>\n";
  }
  out << "</svg>\n";
}

ordered_json json_number_or_null(double v) {
  if (!std::isfinite(v)) return nullptr;
  return v;
}

}  // namespace

void emit_reports(const std::vector<RunRecord>& records, const std::string& out_dir) {
  if (records.empty()) throw ArgumentError("emit_reports: need at least one record");
  fs::path dir(out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create report directory '" + out_dir + "': " + ec.message());

  {
    std::ofstream csv(dir / "report.csv", std::ios::trunc);
    if (!csv) throw IoError("cannot write report.csv in '" + out_dir + "'");
    csv << records_to_csv(records);
  }

  // Per-cell aggregation under both divergence policies.
  std::map<std::string, std::vector<const RunRecord*>> cells;
  for (const RunRecord& r : records) {
    CellConfig cell;
    cell.loss = r.config.loss;
    cell.arch = family_from_string(r.arch);
    cell.lipschitz = {r.config.lipschitz,
                      r.config.lipschitz == LipschitzKind::kGradientPenalty ? r.config.gp_lambda
                                                                            : 0.0};
    cell.optimizer = {r.config.beta1, r.config.beta2, r.config.disc_iters};
    cell.conditioning = mod_kind_from_string(r.conditioning);
    cell.seed = 0;  // cell identity is seed-free
    cells[cell_key(cell)].push_back(&r);
  }

  ordered_json report;
  ordered_json cell_arr = ordered_json::array();
  for (auto& [key, rs] : cells) {
    std::vector<double> ok_fids, sentinel_fids;
    std::size_t diverged = 0;
    for (const RunRecord* r : rs) {
      if (r->status == "ok") {
        ok_fids.push_back(r->best_fid);
        sentinel_fids.push_back(r->best_fid);
      } else {
        ++diverged;
        sentinel_fids.push_back(std::numeric_limits<double>::infinity());
      }
    }
    ordered_json c;
    c["cell"] = key;
    c["runs"] = rs.size();
    c["diverged"] = diverged;
    if (!ok_fids.empty()) {
      MedianSem ms = median_with_sem(ok_fids);
      c["median_fid_ok"] = ms.median;
      c["sem_fid_ok"] = ms.sem;
    } else {
      c["median_fid_ok"] = nullptr;
      c["sem_fid_ok"] = nullptr;
    }
    c["median_fid_sentinel"] = json_number_or_null(median_of(sentinel_fids));
    cell_arr.push_back(c);
  }
  report["cells"] = cell_arr;

  ordered_json unpaired = ordered_json::array();
  for (const UnpairedRow& row : unpaired_compare(records)) {
    ordered_json u;
    u["loss"] = row.loss;
    u["lipschitz"] = row.lipschitz;
    u["arch"] = row.arch;
    u["baseline_fid"] = row.baseline_ok ? ordered_json(row.baseline_fid) : ordered_json(nullptr);
    u["baseline_opt"] = row.baseline_ok ? ordered_json(to_string(row.baseline_opt))
                                        : ordered_json(nullptr);
    u["selfmod_fid"] = row.selfmod_ok ? ordered_json(row.selfmod_fid) : ordered_json(nullptr);
    u["selfmod_opt"] = row.selfmod_ok ? ordered_json(to_string(row.selfmod_opt))
                                      : ordered_json(nullptr);
    if (row.baseline_ok && row.selfmod_ok) {
      u["relative_reduction_pct"] = relative_reduction(row.baseline_fid, row.selfmod_fid);
    } else {
      u["relative_reduction_pct"] = nullptr;
    }
    unpaired.push_back(u);
  }
  report["unpaired"] = unpaired;

  PairedResult paired = paired_compare(records);
  ordered_json pj;
  pj["wins"] = paired.wins;
  pj["ties"] = paired.ties;
  pj["losses"] = paired.losses;
  pj["win_rate"] = paired.win_rate();
  pj["unmatched"] = paired.unmatched;
  report["paired"] = pj;

  // Figure-2 style correlation of log condition number against FID, overall
  // and per conditioning; scatter data comes from ok records' final metrics.
  std::vector<double> all_cond, all_fid, xs, ys;
  std::vector<std::string> colors;
  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> by_cond;
  for (const RunRecord& r : records) {
    if (r.status != "ok") continue;
    all_cond.push_back(r.final_cond_number);
    all_fid.push_back(r.best_fid);
    by_cond[r.conditioning].first.push_back(r.final_cond_number);
    by_cond[r.conditioning].second.push_back(r.best_fid);
    xs.push_back(r.final_cond_number);
    ys.push_back(r.best_fid);
    colors.push_back(is_selfmod(r) ? "crimson" : "steelblue");
  }
  ordered_json corr;
  auto r_or_null = [](const std::optional<double>& r) {
    return r ? ordered_json(*r) : ordered_json(nullptr);
  };
  corr["all"] = r_or_null(all_cond.size() >= 2 ? pearson_r(all_cond, all_fid) : std::nullopt);
  for (auto& [cond, data] : by_cond) {
    corr[cond] =
        r_or_null(data.first.size() >= 2 ? pearson_r(data.first, data.second) : std::nullopt);
  }
  report["pearson_log_cond_vs_fid"] = corr;

  {
    std::ofstream js(dir / "report.json", std::ios::trunc);
    if (!js) throw IoError("cannot write report.json in '" + out_dir + "'");
    js << report.dump(2) << "\n";
  }

  write_svg_scatter((dir / "scatter_cond_fid.svg").string(),
                    "log condition number vs FID (blue=baseline, red=self-mod)", xs, ys, colors,
                    "mean log condition number", "best FID");
  std::vector<double> f8s, finv8s;
  std::vector<std::string> prd_colors;
  for (const RunRecord& r : records) {
    if (r.status != "ok") continue;
    f8s.push_back(r.final_f8);
    finv8s.push_back(r.final_f_inv8);
    prd_colors.push_back(is_selfmod(r) ? "crimson" : "steelblue");
  }
  write_svg_scatter((dir / "scatter_prd.svg").string(),
                    "F8 (recall-weighted) vs F1/8 (precision-weighted)", f8s, finv8s, prd_colors,
                    "F8", "F1/8");
}

}  // namespace smgan
