#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "smgan/data.hpp"
#include "smgan/trainer.hpp"

namespace smgan {

struct OptimizerSetting {
  double beta1 = 0.0;
  double beta2 = 0.9;
  std::size_t disc_iters = 1;

  bool operator==(const OptimizerSetting&) const = default;
  /// Lexicographic on (beta1, beta2, disc_iters); the documented tie-break
  /// order for unpaired comparison.
  bool operator<(const OptimizerSetting& o) const;
};
std::string to_string(const OptimizerSetting& s);

struct LipschitzSetting {
  LipschitzKind kind = LipschitzKind::kSpectralNorm;
  double gp_lambda = 0.0;  // 0 for spectral norm

  bool operator==(const LipschitzSetting&) const = default;
};
std::string to_string(const LipschitzSetting& s);

/// The paper-shaped optimizer axis: (beta1, beta2, disc_iters).
std::vector<OptimizerSetting> default_optimizer_axis();

struct GridSpec {
  std::vector<LossKind> losses = {LossKind::kNonSaturating, LossKind::kHinge};
  std::vector<Family> archs = {Family::kDcganLike, Family::kResnetLike};
  std::vector<LipschitzSetting> lipschitz = {{LipschitzKind::kSpectralNorm, 0.0}};
  std::vector<OptimizerSetting> optimizers = default_optimizer_axis();
  std::vector<ModKind> conditionings = {ModKind::kNone, ModKind::kSelf};
  std::vector<std::uint64_t> seeds = {1, 2, 3};

  std::size_t num_cells() const;  // product of all axes except seeds
  void validate() const;
};

/// One fully specified run of the grid.
struct CellConfig {
  LossKind loss = LossKind::kNonSaturating;
  Family arch = Family::kDcganLike;
  LipschitzSetting lipschitz;
  OptimizerSetting optimizer;
  ModKind conditioning = ModKind::kNone;
  std::vector<bool> layer_mask;  // empty = all modulated layers
  std::uint64_t seed = 0;
};

/// Canonical key=value line for a cell; hashing it names the run directory.
std::string cell_key(const CellConfig& cell);
std::string cell_hash(const CellConfig& cell);

/// Desk-scale budget: training length and the shared network shape.
struct RunBudget {
  std::size_t total_steps = 200;
  std::size_t eval_every = 50;
  std::size_t batch_size = 64;
  double lr = 2e-4;
  std::size_t latent_dim = 8;
  std::size_t base_channels = 8;
  std::size_t num_blocks = 0;  // 0 = as large as the sample resolution allows
  std::size_t modulator_hidden = 8;
  std::size_t threads = 1;
};

using DatasetFactory = std::function<Dataset()>;

ArchSpec arch_for(const CellConfig& cell, const Dataset& data, const RunBudget& budget);
TrainConfig train_config_for(const CellConfig& cell, const RunBudget& budget);

/// Trains one cell from scratch with the standard desk-scale metrics hook
/// (identity-feature FID, PRD, condition number).
RunRecord run_cell(const CellConfig& cell, Dataset& data, const RunBudget& budget);

/// Executes every cell x seed, resuming from runs/<hash>/record.json under
/// out_dir; completed records are loaded, not retrained. Unreadable records
/// are dropped (reported missing) and the grid continues.
std::vector<RunRecord> run_grid(const GridSpec& grid, const DatasetFactory& make_dataset,
                                const RunBudget& budget, const std::string& out_dir);

struct MedianSem {
  double median = 0.0;
  double sem = 0.0;
};
/// Sample median plus standard error of the median from a seeded
/// nonparametric bootstrap (1000 resamples, fixed internal seed).
MedianSem median_with_sem(const std::vector<double>& values);

struct UnpairedRow {
  std::string loss, lipschitz, arch;
  bool baseline_ok = false, selfmod_ok = false;
  double baseline_fid = 0.0, selfmod_fid = 0.0;
  OptimizerSetting baseline_opt, selfmod_opt;  // argmin optimizer settings
};
/// Per (loss, lipschitz, arch): seed-median best-FID per optimizer setting,
/// then the minimum over optimizer settings, baseline vs self-mod.
/// Diverged runs are excluded from medians; a group with no ok records is
/// marked incomparable.
std::vector<UnpairedRow> unpaired_compare(const std::vector<RunRecord>& records);

struct PairedResult {
  std::size_t wins = 0;    // self-mod median strictly lower
  std::size_t ties = 0;    // counted as non-wins
  std::size_t losses = 0;
  std::vector<std::string> unmatched;  // settings missing one conditioning
  double win_rate() const;
};
/// Per full setting (loss, lipschitz, arch, optimizer): seed-median best-FID
/// per conditioning with diverged runs entering as +infinity sentinels.
PairedResult paired_compare(const std::vector<RunRecord>& records);

/// 100 * (baseline - selfmod) / baseline; baseline must be positive.
double relative_reduction(double baseline_fid, double selfmod_fid);

struct AblationRow {
  std::string mask_name;  // "all" or "layer<k>"
  std::vector<bool> mask;
  double median_fid = 0.0;
  double sem = 0.0;
  std::size_t ok_runs = 0;
};
/// Runs the all-layers mask plus each single-layer mask (L+1 configurations)
/// over the shared seeds; the all-false mask is excluded by design (it equals
/// the baseline, which the main grid covers).
std::vector<AblationRow> layer_ablation(const CellConfig& base, const DatasetFactory& make_dataset,
                                        const RunBudget& budget,
                                        const std::vector<std::uint64_t>& seeds,
                                        const std::string& out_dir);

/// Pearson correlation; empty when fewer than 2 points or zero variance.
std::optional<double> pearson_r(const std::vector<double>& x, const std::vector<double>& y);

/// Writes report.csv, report.json, and the SVG scatter plots (log condition
/// number vs FID per conditioning; F8 vs F1/8) into out_dir.
void emit_reports(const std::vector<RunRecord>& records, const std::string& out_dir);

/// report.csv text for a record set (stable row order, round-tripping
/// numbers); exposed for the serialization-identity test.
std::string records_to_csv(const std::vector<RunRecord>& records);
std::vector<RunRecord> records_from_csv_file(const std::string& path);

}  // namespace smgan
