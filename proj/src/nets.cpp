#include "smgan/nets.hpp"

#include "smgan/errors.hpp"

namespace smgan {

using namespace smgan::ops;

namespace {

constexpr double kInitStd = 0.02;

std::size_t pow2(std::size_t n) { return std::size_t{1} << n; }

void validate(const ArchSpec& spec) {
  if (spec.latent_dim == 0 || spec.base_channels == 0 || spec.out_c == 0) {
    throw ConfigError("architecture: latent_dim, base_channels and output channels must be >= 1");
  }
  std::size_t factor = pow2(spec.num_blocks);
  if (spec.out_h % factor != 0 || spec.out_w % factor != 0 || spec.out_h / factor == 0 ||
      spec.out_w / factor == 0) {
    throw ConfigError("architecture: output " + std::to_string(spec.out_h) + "x" +
                      std::to_string(spec.out_w) + " not reachable from " +
                      std::to_string(spec.num_blocks) + " doubling blocks");
  }
  if (spec.num_classes == 0) throw ConfigError("architecture: num_classes must be >= 1");
}

std::vector<bool> resolve_mask(const ArchSpec& spec) {
  std::size_t sites = spec.num_bn_sites();
  if (spec.modulation.layer_mask.empty()) return std::vector<bool>(sites, true);
  if (spec.modulation.layer_mask.size() != sites) {
    throw ConfigError("modulation mask has " +
                      std::to_string(spec.modulation.layer_mask.size()) + " entries, generator has " +
                      std::to_string(sites) + " batch-norm sites");
  }
  return spec.modulation.layer_mask;
}

Var conv_weight(Rng& rng, std::size_t kh, std::size_t kw, std::size_t cin, std::size_t cout) {
  return Var::param(rng.normal_tensor({kh, kw, cin, cout}, 0.0, kInitStd));
}

/// Channels entering block i of the generator (C0 halves per block down to
/// base_channels before the output convolution).
std::size_t gen_channels(const ArchSpec& spec, std::size_t block) {
  return spec.base_channels * pow2(spec.num_blocks - block);
}

Var site_forward(BnSite& site, const Var& h, const Var& z, const std::vector<std::size_t>& labels,
                 Mode mode) {
  if (site.self_mod) return sbn_forward(site.bn, site.gamma_mod, site.beta_mod, h, z, mode);
  if (site.cond_mod) return cbn_forward(*site.cbn, h, labels, mode);
  return bn_forward(site.bn, h, mode);
}

void push_site_params(std::vector<Var>& out, BnSite& site) {
  out.push_back(site.bn.gamma);
  out.push_back(site.bn.beta);
  if (site.self_mod) {
    for (SelfModulator* mod : {&site.gamma_mod, &site.beta_mod}) {
      out.push_back(mod->u);
      out.push_back(mod->b);
      out.push_back(mod->v);
    }
  }
  if (site.cond_mod) {
    out.push_back(site.cbn->gamma_table);
    out.push_back(site.cbn->beta_table);
  }
}

}  // namespace

Family family_from_string(const std::string& name) {
  if (name == "dcgan") return Family::kDcganLike;
  if (name == "resnet") return Family::kResnetLike;
  throw ArgumentError("unknown architecture family '" + name + "' (expected dcgan|resnet)");
}

std::string to_string(Family family) {
  return family == Family::kDcganLike ? "dcgan" : "resnet";
}

ModKind mod_kind_from_string(const std::string& name) {
  if (name == "none") return ModKind::kNone;
  if (name == "self") return ModKind::kSelf;
  if (name == "conditional") return ModKind::kConditional;
  if (name == "self_plus_conditional") return ModKind::kSelfPlusConditional;
  throw ArgumentError("unknown modulation kind '" + name +
                      "' (expected none|self|conditional|self_plus_conditional)");
}

std::string to_string(ModKind kind) {
  switch (kind) {
    case ModKind::kNone: return "none";
    case ModKind::kSelf: return "self";
    case ModKind::kConditional: return "conditional";
    default: return "self_plus_conditional";
  }
}

std::size_t ArchSpec::num_bn_sites() const {
  return family == Family::kDcganLike ? num_blocks : 2 * num_blocks + 1;
}

Generator build_generator(const ArchSpec& spec, std::uint64_t seed) {
  validate(spec);
  std::vector<bool> mask = resolve_mask(spec);
  // Core weights draw from their own stream so every modulation kind starts
  // from identical convolution/linear parameters on the same seed.
  Rng core(Rng::derive(seed, 0));
  Rng mods(Rng::derive(seed, 1));

  Generator g;
  g.spec = spec;
  std::size_t sh = spec.out_h / pow2(spec.num_blocks);
  std::size_t sw = spec.out_w / pow2(spec.num_blocks);
  std::size_t c0 = gen_channels(spec, 0);
  g.w_in = Var::param(core.normal_tensor({spec.latent_dim, sh * sw * c0}, 0.0, kInitStd));
  g.b_in = Var::param(Tensor({sh * sw * c0}));

  ModKind kind = spec.modulation.kind;
  bool self_kind = kind == ModKind::kSelf || kind == ModKind::kSelfPlusConditional;
  bool cond_kind = kind == ModKind::kConditional;
  auto add_site = [&](std::size_t channels) {
    BnSite site(channels);
    std::size_t idx = g.sites.size();
    if (mask[idx] && self_kind) {
      site.self_mod = true;
      site.gamma_mod =
          SelfModulator::init(channels, spec.latent_dim, spec.modulation.hidden, 1.0, mods);
      site.beta_mod =
          SelfModulator::init(channels, spec.latent_dim, spec.modulation.hidden, 0.0, mods);
    } else if (mask[idx] && cond_kind) {
      site.cond_mod = true;
      site.cbn.emplace(spec.num_classes, channels);
    }
    g.sites.push_back(std::move(site));
  };
  auto add_conv = [&](std::size_t k, std::size_t cin, std::size_t cout) {
    g.kernels.push_back(conv_weight(core, k, k, cin, cout));
    g.biases.push_back(Var::param(Tensor({cout})));
  };

  if (spec.family == Family::kDcganLike) {
    for (std::size_t i = 0; i < spec.num_blocks; ++i) {
      std::size_t cout = gen_channels(spec, i + 1);
      add_conv(3, gen_channels(spec, i), cout);
      add_site(cout);
    }
    add_conv(3, spec.base_channels, spec.out_c);
  } else {
    for (std::size_t i = 0; i < spec.num_blocks; ++i) {
      std::size_t cin = gen_channels(spec, i), cout = gen_channels(spec, i + 1);
      add_site(cin);
      add_conv(3, cin, cout);
      add_site(cout);
      add_conv(3, cout, cout);
      add_conv(1, cin, cout);  // skip path
    }
    add_site(spec.base_channels);
    add_conv(3, spec.base_channels, spec.out_c);
  }

  if (kind == ModKind::kConditional || kind == ModKind::kSelfPlusConditional) {
    g.composer.emplace(spec.num_classes, spec.latent_dim);
  }
  return g;
}

std::vector<Var> Generator::parameters() {
  std::vector<Var> out{w_in, b_in};
  for (std::size_t i = 0; i < kernels.size(); ++i) {
    out.push_back(kernels[i]);
    out.push_back(biases[i]);
  }
  for (BnSite& site : sites) push_site_params(out, site);
  if (composer) {
    out.push_back(composer->e);
    out.push_back(composer->e_prime);
  }
  return out;
}

Var Generator::forward(const Var& z, const std::vector<std::size_t>& labels, Mode mode) {
  if (z.shape().size() != 2 || z.shape()[1] != spec.latent_dim) {
    throw ShapeError("generator: latent " + z.value().shape_string() + " vs latent_dim " +
                     std::to_string(spec.latent_dim));
  }
  std::size_t n = z.shape()[0];
  if (composer && labels.size() != n) {
    throw ArgumentError("generator: conditional model needs one label per latent, got " +
                        std::to_string(labels.size()) + " for batch " + std::to_string(n));
  }
  Var zp = composer ? compose_latent(*composer, z, labels) : z;

  std::size_t sh = spec.out_h / pow2(spec.num_blocks);
  std::size_t sw = spec.out_w / pow2(spec.num_blocks);
  Var h = reshape(linear(zp, w_in, b_in), {n, sh, sw, gen_channels(spec, 0)});

  std::size_t ki = 0, si = 0;
  auto conv = [&](const Var& x, std::size_t stride) {
    Var out = add_channel(conv2d(x, kernels[ki], stride, Padding::kSame), biases[ki]);
    ++ki;
    return out;
  };
  auto site = [&](const Var& x) { return site_forward(sites[si++], x, zp, labels, mode); };

  if (spec.family == Family::kDcganLike) {
    for (std::size_t i = 0; i < spec.num_blocks; ++i) {
      h = relu(site(conv(upsample_nearest(h, 2), 1)));
    }
    h = conv(h, 1);
  } else {
    for (std::size_t i = 0; i < spec.num_blocks; ++i) {
      Var branch = relu(site(h));
      branch = conv(upsample_nearest(branch, 2), 1);
      branch = conv(relu(site(branch)), 1);
      Var skip = conv(upsample_nearest(h, 2), 1);
      h = add(branch, skip);
    }
    h = conv(relu(site(h)), 1);
  }
  return tanh_op(h);
}

Discriminator build_discriminator(const ArchSpec& spec, bool projection, bool spectral_norm,
                                  std::uint64_t seed) {
  validate(spec);
  Rng core(Rng::derive(seed, 0));
  Rng sn_rng(Rng::derive(seed, 3));
  Rng head_rng(Rng::derive(seed, 4));

  Discriminator d{spec,
                  projection,
                  spectral_norm,
                  {},
                  {},
                  ProjectionHead(1, 1, head_rng),  // re-built below once F is known
                  Var(),
                  {}};
  auto add_conv = [&](std::size_t k, std::size_t cin, std::size_t cout) {
    d.kernels.push_back(conv_weight(core, k, k, cin, cout));
    d.biases.push_back(Var::param(Tensor({cout})));
  };

  std::size_t cb = spec.base_channels * pow2(spec.num_blocks);
  std::size_t sh = spec.out_h / pow2(spec.num_blocks);
  std::size_t sw = spec.out_w / pow2(spec.num_blocks);
  std::size_t feature_dim = 0;
  if (spec.family == Family::kDcganLike) {
    add_conv(3, spec.out_c, spec.base_channels);
    for (std::size_t i = 0; i < spec.num_blocks; ++i) {
      add_conv(3, spec.base_channels * pow2(i), spec.base_channels * pow2(i + 1));
    }
    feature_dim = sh * sw * cb;  // flattened final activation
  } else {
    add_conv(3, spec.out_c, spec.base_channels);
    for (std::size_t i = 0; i < spec.num_blocks; ++i) {
      std::size_t cin = spec.base_channels * pow2(i), cout = spec.base_channels * pow2(i + 1);
      add_conv(3, cin, cout);
      add_conv(3, cout, cout);
      add_conv(1, cin, cout);  // skip path
    }
    feature_dim = cb;  // global sum pool
  }
  d.head = ProjectionHead(spec.num_classes, feature_dim, head_rng);
  d.b_out = Var::param(Tensor({1}));

  if (spectral_norm) {
    for (const Var& k : d.kernels) {
      d.sn_states.emplace_back(k.shape()[3], sn_rng);  // output features x rest
    }
    d.sn_states.emplace_back(1, sn_rng);  // psi as a 1 x F map
  }
  return d;
}

std::vector<Var> Discriminator::parameters() {
  std::vector<Var> out;
  for (std::size_t i = 0; i < kernels.size(); ++i) {
    out.push_back(kernels[i]);
    out.push_back(biases[i]);
  }
  out.push_back(head.psi_weights);
  out.push_back(b_out);
  if (projection) out.push_back(head.label_embedding);
  return out;
}

Var Discriminator::features(const Var& x) {
  if (x.shape().size() != 4 || x.shape()[1] != spec.out_h || x.shape()[2] != spec.out_w ||
      x.shape()[3] != spec.out_c) {
    throw ShapeError("discriminator: input " + x.value().shape_string() + " vs expected [N," +
                     std::to_string(spec.out_h) + "," + std::to_string(spec.out_w) + "," +
                     std::to_string(spec.out_c) + "]");
  }
  std::size_t ki = 0;
  auto conv = [&](const Var& in, std::size_t stride) {
    Var kernel = kernels[ki];
    if (spectral_norm) {
      Shape ks = kernel.shape();
      std::size_t rest = ks[0] * ks[1] * ks[2];
      Var w2 = transpose2d(reshape(kernel, {rest, ks[3]}));
      kernel = reshape(transpose2d(spectral_normalize_var(w2, sn_states[ki])), ks);
    }
    Var out = add_channel(conv2d(in, kernel, stride, Padding::kSame), biases[ki]);
    ++ki;
    return out;
  };

  Var h = x;
  if (spec.family == Family::kDcganLike) {
    h = leaky_relu(conv(h, 1));
    for (std::size_t i = 0; i < spec.num_blocks; ++i) h = leaky_relu(conv(h, 2));
    std::size_t n = h.shape()[0];
    std::size_t f = h.shape()[1] * h.shape()[2] * h.shape()[3];
    return reshape(h, {n, f});
  }
  h = conv(h, 1);
  for (std::size_t i = 0; i < spec.num_blocks; ++i) {
    Var branch = conv(relu(h), 1);
    branch = avg_pool(conv(relu(branch), 1), 2);
    Var skip = avg_pool(conv(h, 1), 2);
    h = add(branch, skip);
  }
  return global_sum_pool(relu(h));
}

Var Discriminator::forward(const Var& x, const std::vector<std::size_t>& labels, Mode) {
  Var phi = features(x);
  Var psi = head.psi_weights;
  if (spectral_norm) {
    std::size_t f = psi.shape()[0];
    Var p2 = spectral_normalize_var(reshape(psi, {1, f}), sn_states.back());
    psi = reshape(p2, {f});
  }
  std::size_t n = phi.shape()[0];
  std::size_t f = phi.shape()[1];
  Var logits = reshape(matmul(phi, reshape(psi, {f, 1})), {n});
  if (projection) {
    if (labels.size() != n) {
      throw ArgumentError("discriminator: projection head needs one label per sample, got " +
                          std::to_string(labels.size()) + " for batch " + std::to_string(n));
    }
    logits = add(logits, reduce_sum(mul(phi, gather_rows(head.label_embedding, labels)), {1}));
  }
  return reshape(add_channel(reshape(logits, {n, 1}), b_out), {n});
}

std::size_t count_modulated_layers(const Generator& g) {
  std::size_t count = 0;
  for (const BnSite& site : g.sites) count += (site.self_mod || site.cond_mod) ? 1 : 0;
  return count;
}

std::size_t count_parameters(std::vector<Var> params) {
  std::size_t total = 0;
  for (const Var& p : params) total += p.value().size();
  return total;
}

}  // namespace smgan
