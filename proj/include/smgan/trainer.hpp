#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "smgan/data.hpp"
#include "smgan/losses.hpp"
#include "smgan/nets.hpp"

namespace smgan {

enum class LipschitzKind { kSpectralNorm, kGradientPenalty };

LipschitzKind lipschitz_from_string(const std::string& name);
std::string to_string(LipschitzKind kind);

struct TrainConfig {
  LossKind loss = LossKind::kNonSaturating;
  LipschitzKind lipschitz = LipschitzKind::kSpectralNorm;
  double gp_lambda = 10.0;  // only read when lipschitz = gp; must be 1 or 10
  double beta1 = 0.0;
  double beta2 = 0.9;
  std::size_t disc_iters = 1;
  double lr = 2e-4;
  std::size_t batch_size = 64;
  std::size_t total_steps = 0;  // generator updates
  std::size_t eval_every = 500;
  std::uint64_t seed = 0;

  void validate() const;
};

/// One metrics checkpoint along a run. `f8`/`f_inv8` are optional extras a
/// hook may fill; the trajectory serialization carries step/fid/is/cond only.
struct EvalPoint {
  std::size_t step = 0;
  double fid = 0.0;
  double is = 0.0;
  double cond_number = 0.0;
  double f8 = 0.0;
  double f_inv8 = 0.0;
};

/// Called with the current networks at evaluation checkpoints; must be a pure
/// function of (step, g, d) plus its own captured seeds so runs stay
/// deterministic, and reentrant across concurrent runs.
using MetricsHook = std::function<EvalPoint(std::size_t step, Generator& g, Discriminator& d)>;

struct RunRecord {
  TrainConfig config;
  std::string arch;          // generator family tag
  std::string conditioning;  // modulation kind tag
  std::vector<EvalPoint> trajectory;
  double best_fid = std::numeric_limits<double>::infinity();
  std::size_t best_fid_step = 0;
  double best_is = 0.0;
  double final_cond_number = 0.0;
  double final_f8 = 0.0;
  double final_f_inv8 = 0.0;
  std::size_t disc_updates = 0;
  std::size_t gen_updates = 0;
  std::string status = "ok";  // ok | diverged
};

/// Alternating GAN loop: disc_iters discriminator updates, then one generator
/// update, for total_steps generator steps. Evaluates at step 0, every
/// eval_every generator steps, and at the end. A non-finite loss or gradient
/// stops the run gracefully with status "diverged".
RunRecord train_gan(Generator& g, Discriminator& d, Dataset& data, const TrainConfig& cfg,
                    const MetricsHook& metrics_hook);

/// Fixed-key-order JSON document for a RunRecord; byte-identical for
/// identical records.
std::string run_record_to_json(const RunRecord& record);
RunRecord run_record_from_json(const std::string& text);

}  // namespace smgan
