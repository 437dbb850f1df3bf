#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "smgan/random.hpp"
#include "smgan/tensor.hpp"

namespace smgan {

struct Batch {
  Tensor samples;  // [n, ...sample_shape]
  std::vector<std::size_t> labels;
};

/// A seeded synthetic data source. Train and test draws use decorrelated
/// substreams of the dataset seed, so the two splits never share samples
/// (draws are continuous, collisions have probability zero) and any two
/// datasets built from the same seed produce identical streams.
class Dataset {
 public:
  using Sampler = std::function<Batch(std::size_t n, Rng& rng, bool test_split)>;

  Dataset(std::string name, std::size_t num_classes, Shape sample_shape, Sampler sampler,
          std::uint64_t seed);

  Batch sample_train(std::size_t n) { return sampler_(n, train_rng_, false); }
  Batch sample_test(std::size_t n) { return sampler_(n, test_rng_, true); }

  const std::string& name() const { return name_; }
  std::size_t num_classes() const { return num_classes_; }
  const Shape& sample_shape() const { return sample_shape_; }

 private:
  std::string name_;
  std::size_t num_classes_;
  Shape sample_shape_;
  Sampler sampler_;
  Rng train_rng_;
  Rng test_rng_;
};

/// 2-D Gaussian mixture on a ring: mode k at radius*(cos, sin)(2 pi k/m),
/// isotropic stddev, label = mode index. Samples are [n,1,1,2] so both conv
/// stacks and the identity feature embedding accept them.
Dataset ring_of_gaussians(std::size_t modes, double radius, double stddev, std::uint64_t seed);

/// size x size x 1 images in [-1,1] with class-dependent procedural shapes
/// (bars / disks / crosses) under jittered position and scale.
Dataset synthetic_shapes(std::size_t size, std::size_t num_classes, std::uint64_t seed);

/// Flat binary import (all values little-endian on the host):
///   u64 count, u64 rank, rank x u64 per-sample dims, count*prod(dims) f64.
/// Rows are unlabeled (single class); the first 90% form the train split and
/// the rest the test split, sampled with replacement.
Dataset import_flat(const std::string& path, std::uint64_t seed);
void export_flat(const std::string& path, const Tensor& samples);

}  // namespace smgan
