#include "smgan/model_io.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"
#include "smgan/errors.hpp"

namespace smgan {

namespace {

using ordered_json = nlohmann::ordered_json;

ordered_json tensor_to_json(const Tensor& t) { return ordered_json(t.vec()); }

void tensor_from_json(const ordered_json& j, Tensor& t) {
  std::vector<double> data = j.get<std::vector<double>>();
  if (data.size() != t.size()) {
    throw IoError("model document field has " + std::to_string(data.size()) +
                  " values, expected " + std::to_string(t.size()));
  }
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = data[i];
}

}  // namespace

void save_generator(const std::string& path, Generator& g) {
  ordered_json j;
  ordered_json spec;
  spec["family"] = to_string(g.spec.family);
  spec["latent_dim"] = g.spec.latent_dim;
  spec["base_channels"] = g.spec.base_channels;
  spec["num_blocks"] = g.spec.num_blocks;
  spec["out_h"] = g.spec.out_h;
  spec["out_w"] = g.spec.out_w;
  spec["out_c"] = g.spec.out_c;
  spec["num_classes"] = g.spec.num_classes;
  spec["modulation_kind"] = to_string(g.spec.modulation.kind);
  spec["modulation_hidden"] = g.spec.modulation.hidden;
  spec["layer_mask"] = g.spec.modulation.layer_mask;
  j["spec"] = spec;

  ordered_json params = ordered_json::array();
  for (Var& p : g.parameters()) params.push_back(tensor_to_json(p.value()));
  j["params"] = params;

  ordered_json running = ordered_json::array();
  for (BnSite& site : g.sites) {
    running.push_back(tensor_to_json(site.bn.running_mean));
    running.push_back(tensor_to_json(site.bn.running_var));
    if (site.cbn) {
      running.push_back(tensor_to_json(site.cbn->running_mean));
      running.push_back(tensor_to_json(site.cbn->running_var));
    }
  }
  j["running_stats"] = running;

  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write model file '" + path + "'");
  out << j.dump(2) << "\n";
}

Generator load_generator(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open model file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  ordered_json j;
  try {
    j = ordered_json::parse(buf.str());
  } catch (const nlohmann::json::exception& e) {
    throw IoError("model file '" + path + "' is not valid JSON: " + e.what());
  }

  ArchSpec spec;
  try {
    const auto& s = j.at("spec");
    spec.family = family_from_string(s.at("family").get<std::string>());
    spec.latent_dim = s.at("latent_dim").get<std::size_t>();
    spec.base_channels = s.at("base_channels").get<std::size_t>();
    spec.num_blocks = s.at("num_blocks").get<std::size_t>();
    spec.out_h = s.at("out_h").get<std::size_t>();
    spec.out_w = s.at("out_w").get<std::size_t>();
    spec.out_c = s.at("out_c").get<std::size_t>();
    spec.num_classes = s.at("num_classes").get<std::size_t>();
    spec.modulation.kind = mod_kind_from_string(s.at("modulation_kind").get<std::string>());
    spec.modulation.hidden = s.at("modulation_hidden").get<std::size_t>();
    spec.modulation.layer_mask = s.at("layer_mask").get<std::vector<bool>>();

    Generator g = build_generator(spec, 0);
    std::vector<Var> params = g.parameters();
    const auto& pj = j.at("params");
    if (pj.size() != params.size()) {
      throw IoError("model file '" + path + "' holds " + std::to_string(pj.size()) +
                    " parameter tensors, expected " + std::to_string(params.size()));
    }
    for (std::size_t i = 0; i < params.size(); ++i) tensor_from_json(pj[i], params[i].value());

    const auto& rj = j.at("running_stats");
    std::size_t idx = 0;
    auto next = [&](Tensor& t) {
      if (idx >= rj.size()) throw IoError("model file '" + path + "' truncates running stats");
      tensor_from_json(rj[idx++], t);
    };
    for (BnSite& site : g.sites) {
      next(site.bn.running_mean);
      next(site.bn.running_var);
      if (site.cbn) {
        next(site.cbn->running_mean);
        next(site.cbn->running_var);
      }
    }
    return g;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("model file '" + path + "' is malformed: " + e.what());
  }
}

}  // namespace smgan
