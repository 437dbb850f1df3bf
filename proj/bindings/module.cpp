#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "smgan/errors.hpp"
#include "smgan/harness.hpp"
#include "smgan/layers.hpp"
#include "smgan/losses.hpp"
#include "smgan/metrics.hpp"
#include "smgan/model_io.hpp"
#include "smgan/nets.hpp"
#include "smgan/random.hpp"
#include "smgan/trainer.hpp"

namespace py = pybind11;
using namespace smgan;

namespace {

Tensor tensor_from_array(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
  Shape shape(a.ndim());
  for (py::ssize_t i = 0; i < a.ndim(); ++i) shape[i] = static_cast<std::size_t>(a.shape(i));
  Tensor t(shape);
  const double* src = a.data();
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = src[i];
  return t;
}

py::array_t<double> array_from_tensor(const Tensor& t) {
  std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
  py::array_t<double> a(shape);
  double* dst = a.mutable_data();
  for (std::size_t i = 0; i < t.size(); ++i) dst[i] = t[i];
  return a;
}

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

ArchSpec spec_from_kwargs(const std::string& family, std::size_t latent_dim,
                          std::size_t base_channels, std::size_t num_blocks, std::size_t out_h,
                          std::size_t out_w, std::size_t out_c, std::size_t num_classes,
                          const std::string& conditioning, std::size_t hidden,
                          const std::vector<bool>& layer_mask) {
  ArchSpec spec;
  spec.family = family_from_string(family);
  spec.latent_dim = latent_dim;
  spec.base_channels = base_channels;
  spec.num_blocks = num_blocks;
  spec.out_h = out_h;
  spec.out_w = out_w;
  spec.out_c = out_c;
  spec.num_classes = num_classes;
  spec.modulation.kind = mod_kind_from_string(conditioning);
  spec.modulation.hidden = hidden;
  spec.modulation.layer_mask = layer_mask;
  return spec;
}

/// Thin Python-facing wrapper around the generator.
class PyGenerator {
 public:
  explicit PyGenerator(Generator g) : g_(std::move(g)) {}

  py::array_t<double> sample(const Array& z, const std::vector<std::size_t>& labels) {
    Tensor zt = tensor_from_array(z);
    return array_from_tensor(g_.forward(Var::constant(zt), labels, Mode::kEval).value());
  }
  py::array_t<double> jacobian(const Array& z) {
    return array_from_tensor(generator_jacobian(g_, tensor_from_array(z)));
  }
  py::tuple condition_number(const Array& z_batch) {
    ConditionScore score = condition_number_score(g_, tensor_from_array(z_batch));
    return py::make_tuple(score.mean_log_cond, score.degenerate);
  }
  std::size_t num_parameters() { return count_parameters(g_.parameters()); }
  std::size_t num_modulated_layers() const { return count_modulated_layers(g_); }
  std::size_t latent_dim() const { return g_.spec.latent_dim; }
  void save(const std::string& path) { save_generator(path, g_); }

  Generator& inner() { return g_; }

 private:
  Generator g_;
};

double scalar_loss(const Var& v) { return v.value()[0]; }

}  // namespace

PYBIND11_MODULE(smgan_py, m) {
  m.doc() = "self-modulated GAN toolkit: losses, metrics, and generators";

  // --- metrics -------------------------------------------------------------
  m.def(
      "fid",
      [](const Array& real, const Array& fake) {
        return frechet_distance(fit_gaussian(tensor_from_array(real)),
                                fit_gaussian(tensor_from_array(fake)));
      },
      py::arg("real_features"), py::arg("fake_features"),
      "Frechet distance between Gaussians fitted to [N,F] feature rows");
  m.def(
      "prd",
      [](const Array& real, const Array& fake, std::size_t clusters, std::size_t angles,
         std::uint64_t seed) {
        PRDResult r = prd_curve(tensor_from_array(real), tensor_from_array(fake), clusters, angles,
                                seed);
        py::dict out;
        out["f8"] = r.f8;
        out["f_inv8"] = r.f_inv8;
        out["precisions"] = r.precisions;
        out["recalls"] = r.recalls;
        return out;
      },
      py::arg("real_features"), py::arg("fake_features"), py::arg("clusters") = 20,
      py::arg("angles") = 1001, py::arg("seed") = 0,
      "Precision-recall curve with the F8 / F1/8 summary scores");
  m.def(
      "spectral_norm",
      [](const Array& w, std::size_t iterations) {
        Tensor wt = tensor_from_array(w);
        Rng rng(0);
        SpectralNormState state(wt.shape()[0], rng);
        state.power_iterations_per_step = iterations;
        return array_from_tensor(spectral_normalize(wt, state));
      },
      py::arg("weight"), py::arg("iterations") = 30,
      "W divided by its power-iteration spectral norm estimate");

  // --- losses (scalar values for [N] logit arrays) -------------------------
  auto logits = [](const Array& a) { return Var::constant(tensor_from_array(a)); };
  m.def(
      "ns_loss_d",
      [logits](const Array& real, const Array& fake) {
        return scalar_loss(ns_loss_d(logits(real), logits(fake)));
      },
      py::arg("real_logits"), py::arg("fake_logits"));
  m.def(
      "ns_loss_g",
      [logits](const Array& fake) { return scalar_loss(ns_loss_g(logits(fake))); },
      py::arg("fake_logits"));
  m.def(
      "hinge_loss_d",
      [logits](const Array& real, const Array& fake) {
        return scalar_loss(hinge_loss_d(logits(real), logits(fake)));
      },
      py::arg("real_logits"), py::arg("fake_logits"));
  m.def(
      "hinge_loss_g",
      [logits](const Array& fake) { return scalar_loss(hinge_loss_g(logits(fake))); },
      py::arg("fake_logits"));

  // --- generators ----------------------------------------------------------
  py::class_<PyGenerator>(m, "Generator")
      .def("sample", &PyGenerator::sample, py::arg("z"),
           py::arg("labels") = std::vector<std::size_t>{},
           "Eval-mode forward pass: [N,d] latents to an NHWC sample batch")
      .def("jacobian", &PyGenerator::jacobian, py::arg("z"),
           "Dense Jacobian [out_dim, d] at one latent [d]")
      .def("condition_number", &PyGenerator::condition_number, py::arg("z_batch"),
           "(mean log condition number, degeneracy flag) over a latent batch")
      .def("num_parameters", &PyGenerator::num_parameters)
      .def("num_modulated_layers", &PyGenerator::num_modulated_layers)
      .def_property_readonly("latent_dim", &PyGenerator::latent_dim)
      .def("save", &PyGenerator::save, py::arg("path"));

  m.def(
      "build_generator",
      [](const std::string& family, std::size_t latent_dim, std::size_t base_channels,
         std::size_t num_blocks, std::size_t out_h, std::size_t out_w, std::size_t out_c,
         std::size_t num_classes, const std::string& conditioning, std::size_t hidden,
         const std::vector<bool>& layer_mask, std::uint64_t seed) {
        return PyGenerator(build_generator(
            spec_from_kwargs(family, latent_dim, base_channels, num_blocks, out_h, out_w, out_c,
                             num_classes, conditioning, hidden, layer_mask),
            seed));
      },
      py::arg("family") = "dcgan", py::arg("latent_dim") = 8, py::arg("base_channels") = 8,
      py::arg("num_blocks") = 1, py::arg("out_h") = 8, py::arg("out_w") = 8, py::arg("out_c") = 1,
      py::arg("num_classes") = 1, py::arg("conditioning") = "none", py::arg("hidden") = 8,
      py::arg("layer_mask") = std::vector<bool>{}, py::arg("seed") = 0);
  m.def("load_generator",
        [](const std::string& path) { return PyGenerator(load_generator(path)); });

  // --- training ------------------------------------------------------------
  m.def(
      "train_ring",
      [](std::size_t modes, double radius, double stddev, const std::string& loss,
         const std::string& lipschitz, const std::string& conditioning, std::size_t total_steps,
         std::size_t eval_every, std::size_t batch_size, std::size_t latent_dim,
         std::size_t base_channels, std::size_t hidden, std::uint64_t seed) {
        Dataset data = ring_of_gaussians(modes, radius, stddev, seed);
        CellConfig cell;
        cell.loss = loss_kind_from_string(loss);
        cell.lipschitz.kind = lipschitz_from_string(lipschitz);
        cell.lipschitz.gp_lambda =
            cell.lipschitz.kind == LipschitzKind::kGradientPenalty ? 10.0 : 0.0;
        cell.conditioning = mod_kind_from_string(conditioning);
        cell.seed = seed;
        RunBudget budget;
        budget.total_steps = total_steps;
        budget.eval_every = eval_every;
        budget.batch_size = batch_size;
        budget.latent_dim = latent_dim;
        budget.base_channels = base_channels;
        budget.modulator_hidden = hidden;
        RunRecord record = run_cell(cell, data, budget);
        return run_record_to_json(record);
      },
      py::arg("modes") = 8, py::arg("radius") = 1.0, py::arg("stddev") = 0.05,
      py::arg("loss") = "hinge", py::arg("lipschitz") = "sn", py::arg("conditioning") = "self",
      py::arg("total_steps") = 50, py::arg("eval_every") = 25, py::arg("batch_size") = 32,
      py::arg("latent_dim") = 4, py::arg("base_channels") = 4, py::arg("hidden") = 3,
      py::arg("seed") = 1,
      "Train a desk-scale run on the ring dataset; returns the RunRecord JSON");

  // --- exceptions ----------------------------------------------------------
  py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
  py::register_exception<ArgumentError>(m, "ArgumentError", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<ContractError>(m, "ContractError", PyExc_RuntimeError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);
}
