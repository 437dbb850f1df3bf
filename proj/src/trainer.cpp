#include "smgan/trainer.hpp"

#include <cmath>

#include "json.hpp"
#include "smgan/errors.hpp"
#include "smgan/layers.hpp"
#include "smgan/optim.hpp"
#include "smgan/random.hpp"

namespace smgan {

using ordered_json = nlohmann::ordered_json;

LipschitzKind lipschitz_from_string(const std::string& name) {
  if (name == "sn") return LipschitzKind::kSpectralNorm;
  if (name == "gp") return LipschitzKind::kGradientPenalty;
  throw ArgumentError("unknown lipschitz regularizer '" + name + "' (want sn|gp)");
}

std::string to_string(LipschitzKind kind) {
  return kind == LipschitzKind::kSpectralNorm ? "sn" : "gp";
}

void TrainConfig::validate() const {
  if (disc_iters < 1) throw ConfigError("train: disc_iters must be >= 1");
  if (lipschitz == LipschitzKind::kGradientPenalty && gp_lambda != 1.0 && gp_lambda != 10.0) {
    throw ConfigError("train: gradient penalty lambda must be 1 or 10, got " +
                      std::to_string(gp_lambda));
  }
  if (batch_size < 2) throw ConfigError("train: batch_size must be >= 2");
  if (eval_every < 1) throw ConfigError("train: eval_every must be >= 1");
  if (lr <= 0.0) throw ConfigError("train: learning rate must be positive");
}

namespace {

bool finite_scalar(const Var& v) { return std::isfinite(v.value()[0]); }

std::vector<std::size_t> draw_labels(std::size_t n, std::size_t num_classes, Rng& rng) {
  std::vector<std::size_t> labels(n);
  for (std::size_t i = 0; i < n; ++i)
    labels[i] = num_classes > 1 ? static_cast<std::size_t>(rng.integer(num_classes)) : 0;
  return labels;
}

void record_eval(RunRecord& record, const EvalPoint& point) {
  record.trajectory.push_back(point);
  if (point.fid < record.best_fid) {
    record.best_fid = point.fid;
    record.best_fid_step = point.step;
  }
  if (point.is > record.best_is) record.best_is = point.is;
  record.final_cond_number = point.cond_number;
  record.final_f8 = point.f8;
  record.final_f_inv8 = point.f_inv8;
}

}  // namespace

RunRecord train_gan(Generator& g, Discriminator& d, Dataset& data, const TrainConfig& cfg,
                    const MetricsHook& metrics_hook) {
  cfg.validate();
  RunRecord record;
  record.config = cfg;
  record.arch = to_string(g.spec.family);
  record.conditioning = to_string(g.spec.modulation.kind);

  std::vector<Var> g_params = g.parameters();
  std::vector<Var> d_params = d.parameters();
  AdamState g_state(cfg.beta1, cfg.beta2, cfg.lr);
  AdamState d_state(cfg.beta1, cfg.beta2, cfg.lr);

  // Independent substreams so the latent, label, and interpolation draws stay
  // decorrelated from the dataset sampler and from each other.
  Rng z_rng(Rng::derive(cfg.seed, 10));
  Rng label_rng(Rng::derive(cfg.seed, 11));
  Rng gp_rng(Rng::derive(cfg.seed, 12));

  const std::size_t n = cfg.batch_size;
  const std::size_t latent_dim = g.spec.latent_dim;
  const bool conditional = g.spec.modulation.kind == ModKind::kConditional ||
                           g.spec.modulation.kind == ModKind::kSelfPlusConditional;

  if (metrics_hook) record_eval(record, metrics_hook(0, g, d));

  try {
    for (std::size_t step = 1; step <= cfg.total_steps; ++step) {
      for (std::size_t k = 0; k < cfg.disc_iters; ++k) {
        Batch real = data.sample_train(n);
        std::vector<std::size_t> labels =
            conditional || d.projection ? real.labels : std::vector<std::size_t>{};
        Tensor z = z_rng.normal_tensor({n, latent_dim});
        Tensor fake = g.forward(Var::constant(z), real.labels, Mode::kTrain).value();

        Var real_logits = d.forward(Var::constant(real.samples), labels, Mode::kTrain);
        Var fake_logits = d.forward(Var::constant(fake), labels, Mode::kTrain);
        Var loss = discriminator_loss(cfg.loss, real_logits, fake_logits);
        if (cfg.lipschitz == LipschitzKind::kGradientPenalty) {
          auto disc = [&](const Var& x) { return d.forward(x, labels, Mode::kTrain); };
          loss = ops::add(loss, gradient_penalty(disc, real.samples, fake, cfg.gp_lambda, gp_rng));
        }
        if (!finite_scalar(loss)) throw NumericalError("discriminator loss is not finite");
        backward(loss);
        adam_step(d_state, d_params);
        ++record.disc_updates;
      }

      std::vector<std::size_t> labels = draw_labels(n, data.num_classes(), label_rng);
      Tensor z = z_rng.normal_tensor({n, latent_dim});
      Var fake = g.forward(Var::constant(z), labels, Mode::kTrain);
      Var fake_logits = d.forward(fake, conditional || d.projection
                                            ? labels
                                            : std::vector<std::size_t>{},
                                  Mode::kTrain);
      Var loss = generator_loss(cfg.loss, fake_logits);
      if (!finite_scalar(loss)) throw NumericalError("generator loss is not finite");
      backward(loss);
      adam_step(g_state, g_params);
      ++record.gen_updates;

      bool due = step % cfg.eval_every == 0 || step == cfg.total_steps;
      if (metrics_hook && due &&
          (record.trajectory.empty() || record.trajectory.back().step != step)) {
        record_eval(record, metrics_hook(step, g, d));
      }
    }
  } catch (const NumericalError&) {
    record.status = "diverged";
  }
  return record;
}

std::string run_record_to_json(const RunRecord& record) {
  ordered_json j;
  ordered_json cfg;
  cfg["loss"] = to_string(record.config.loss);
  cfg["lipschitz"] = to_string(record.config.lipschitz);
  cfg["gp_lambda"] = record.config.gp_lambda;
  cfg["beta1"] = record.config.beta1;
  cfg["beta2"] = record.config.beta2;
  cfg["disc_iters"] = record.config.disc_iters;
  cfg["lr"] = record.config.lr;
  cfg["batch_size"] = record.config.batch_size;
  cfg["total_steps"] = record.config.total_steps;
  cfg["eval_every"] = record.config.eval_every;
  cfg["seed"] = record.config.seed;
  cfg["arch"] = record.arch;
  cfg["conditioning"] = record.conditioning;
  j["config"] = cfg;
  ordered_json traj = ordered_json::array();
  for (const EvalPoint& p : record.trajectory) {
    ordered_json e;
    e["step"] = p.step;
    e["fid"] = p.fid;
    e["is"] = p.is;
    e["cond_number"] = p.cond_number;
    e["f8"] = p.f8;
    e["f_inv8"] = p.f_inv8;
    traj.push_back(e);
  }
  j["trajectory"] = traj;
  if (std::isfinite(record.best_fid)) {
    j["best_fid"] = record.best_fid;
  } else {
    j["best_fid"] = nullptr;  // diverged before the first checkpoint
  }
  j["best_fid_step"] = record.best_fid_step;
  j["best_is"] = record.best_is;
  j["final_cond_number"] = record.final_cond_number;
  j["final_f8"] = record.final_f8;
  j["final_f_inv8"] = record.final_f_inv8;
  j["disc_updates"] = record.disc_updates;
  j["gen_updates"] = record.gen_updates;
  j["status"] = record.status;
  return j.dump(2) + "\n";
}

RunRecord run_record_from_json(const std::string& text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("run record parse failure: ") + e.what());
  }
  RunRecord record;
  const auto& cfg = j.at("config");
  record.config.loss = loss_kind_from_string(cfg.at("loss").get<std::string>());
  record.config.lipschitz = lipschitz_from_string(cfg.at("lipschitz").get<std::string>());
  record.config.gp_lambda = cfg.at("gp_lambda").get<double>();
  record.config.beta1 = cfg.at("beta1").get<double>();
  record.config.beta2 = cfg.at("beta2").get<double>();
  record.config.disc_iters = cfg.at("disc_iters").get<std::size_t>();
  record.config.lr = cfg.at("lr").get<double>();
  record.config.batch_size = cfg.at("batch_size").get<std::size_t>();
  record.config.total_steps = cfg.at("total_steps").get<std::size_t>();
  record.config.eval_every = cfg.at("eval_every").get<std::size_t>();
  record.config.seed = cfg.at("seed").get<std::uint64_t>();
  record.arch = cfg.at("arch").get<std::string>();
  record.conditioning = cfg.at("conditioning").get<std::string>();
  for (const auto& e : j.at("trajectory")) {
    EvalPoint p;
    p.step = e.at("step").get<std::size_t>();
    p.fid = e.at("fid").get<double>();
    p.is = e.at("is").get<double>();
    p.cond_number = e.at("cond_number").get<double>();
    p.f8 = e.at("f8").get<double>();
    p.f_inv8 = e.at("f_inv8").get<double>();
    record.trajectory.push_back(p);
  }
  record.best_fid = j.at("best_fid").is_null() ? std::numeric_limits<double>::infinity()
                                               : j.at("best_fid").get<double>();
  record.best_fid_step = j.at("best_fid_step").get<std::size_t>();
  record.best_is = j.at("best_is").get<double>();
  record.final_cond_number = j.at("final_cond_number").get<double>();
  record.final_f8 = j.at("final_f8").get<double>();
  record.final_f_inv8 = j.at("final_f_inv8").get<double>();
  record.disc_updates = j.at("disc_updates").get<std::size_t>();
  record.gen_updates = j.at("gen_updates").get<std::size_t>();
  record.status = j.at("status").get<std::string>();
  return record;
}

}  // namespace smgan
