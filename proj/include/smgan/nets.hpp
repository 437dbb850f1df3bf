#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "smgan/layers.hpp"
#include "smgan/ops.hpp"
#include "smgan/random.hpp"

namespace smgan {

enum class Family { kDcganLike, kResnetLike };
enum class ModKind { kNone, kSelf, kConditional, kSelfPlusConditional };

Family family_from_string(const std::string& name);
std::string to_string(Family family);
ModKind mod_kind_from_string(const std::string& name);
std::string to_string(ModKind kind);

struct ModulationSpec {
  ModKind kind = ModKind::kNone;
  /// One flag per BN site in build order; empty means all-true.
  std::vector<bool> layer_mask;
  std::size_t hidden = 32;
};

struct ArchSpec {
  Family family = Family::kDcganLike;
  std::size_t latent_dim = 8;
  std::size_t base_channels = 16;
  std::size_t num_blocks = 2;
  std::size_t out_h = 16;
  std::size_t out_w = 16;
  std::size_t out_c = 1;
  std::size_t num_classes = 1;
  ModulationSpec modulation;

  /// BN sites in a generator built from this spec: one per upsampling block
  /// for the dcgan family, two per residual block plus the pre-output BN for
  /// the resnet family.
  std::size_t num_bn_sites() const;
};

/// One batch-norm site of the generator; exactly one of the three paths is
/// active, chosen by the modulation kind and the layer mask.
struct BnSite {
  BatchNormLayer bn;
  bool self_mod = false;
  bool cond_mod = false;
  SelfModulator gamma_mod;
  SelfModulator beta_mod;
  std::optional<ConditionalBNLayer> cbn;

  explicit BnSite(std::size_t channels) : bn(channels) {}
};

struct Generator {
  ArchSpec spec;
  Var w_in;  // [latent_dim, s_h*s_w*C0]
  Var b_in;
  std::vector<Var> kernels;  // [kh,kw,Cin,Cout] per conv in build order
  std::vector<Var> biases;
  std::vector<BnSite> sites;
  std::optional<LatentComposer> composer;  // present for conditional kinds

  /// All trainable parameters, including the plain gamma/beta of modulated
  /// sites (held at init there, so baseline and modulated models differ by
  /// exactly the modulator parameters).
  std::vector<Var> parameters();
  /// Labels are required (and must match the batch) for conditional kinds.
  Var forward(const Var& z, const std::vector<std::size_t>& labels, Mode mode);
  Var forward(const Var& z, Mode mode) { return forward(z, {}, mode); }
};

struct Discriminator {
  ArchSpec spec;
  bool projection = false;
  bool spectral_norm = false;
  std::vector<Var> kernels;
  std::vector<Var> biases;
  ProjectionHead head;  // psi_weights doubles as the final linear map
  Var b_out;
  std::vector<SpectralNormState> sn_states;  // one per kernel + one for psi

  std::vector<Var> parameters();
  /// Image batch (NHWC) -> [N] logits. Labels are consulted only when the
  /// projection head is enabled.
  Var forward(const Var& x, const std::vector<std::size_t>& labels, Mode mode);
  Var forward(const Var& x, Mode mode) { return forward(x, {}, mode); }
  /// Final feature map phi(x) of shape [N, F].
  Var features(const Var& x);
  std::size_t feature_dim() const { return head.psi_weights.shape()[0]; }
};

Generator build_generator(const ArchSpec& spec, std::uint64_t seed);
Discriminator build_discriminator(const ArchSpec& spec, bool projection, bool spectral_norm,
                                  std::uint64_t seed);

std::size_t count_modulated_layers(const Generator& g);
std::size_t count_parameters(std::vector<Var> params);

}  // namespace smgan
