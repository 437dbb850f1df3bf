#include "smgan/data.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <numbers>
#include <utility>

#include "smgan/errors.hpp"

namespace smgan {

namespace {

/// Balanced labels for a draw of n: each class appears floor/ceil(n/k) times,
/// order shuffled by the stream RNG.
std::vector<std::size_t> balanced_labels(std::size_t n, std::size_t num_classes, Rng& rng) {
  std::vector<std::size_t> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = i % num_classes;
  rng.shuffle(labels);
  return labels;
}

}  // namespace

Dataset::Dataset(std::string name, std::size_t num_classes, Shape sample_shape, Sampler sampler,
                 std::uint64_t seed)
    : name_(std::move(name)),
      num_classes_(num_classes),
      sample_shape_(std::move(sample_shape)),
      sampler_(std::move(sampler)),
      train_rng_(Rng::derive(seed, 0)),
      test_rng_(Rng::derive(seed, 1)) {}

Dataset ring_of_gaussians(std::size_t modes, double radius, double stddev, std::uint64_t seed) {
  if (modes < 1) throw ArgumentError("ring_of_gaussians: modes must be >= 1");
  if (!(stddev > 0.0)) throw ArgumentError("ring_of_gaussians: stddev must be positive");
  if (radius < 0.0) throw ArgumentError("ring_of_gaussians: radius must be nonnegative");

  auto sampler = [modes, radius, stddev](std::size_t n, Rng& rng, bool) {
    Batch batch;
    batch.labels = balanced_labels(n, modes, rng);
    batch.samples = Tensor({n, 1, 1, 2});
    for (std::size_t i = 0; i < n; ++i) {
      double angle = 2.0 * std::numbers::pi * static_cast<double>(batch.labels[i]) /
                     static_cast<double>(modes);
      batch.samples[i * 2 + 0] = radius * std::cos(angle) + rng.normal(0.0, stddev);
      batch.samples[i * 2 + 1] = radius * std::sin(angle) + rng.normal(0.0, stddev);
    }
    return batch;
  };
  return Dataset("ring" + std::to_string(modes), modes, {1, 1, 2}, std::move(sampler), seed);
}

Dataset synthetic_shapes(std::size_t size, std::size_t num_classes, std::uint64_t seed) {
  if (size != 8 && size != 16 && size != 32) {
    throw ArgumentError("synthetic_shapes: size must be one of 8, 16, 32, got " +
                        std::to_string(size));
  }
  if (num_classes < 1) throw ArgumentError("synthetic_shapes: num_classes must be >= 1");

  auto sampler = [size, num_classes](std::size_t n, Rng& rng, bool) {
    Batch batch;
    batch.labels = balanced_labels(n, num_classes, rng);
    batch.samples = Tensor::full({n, size, size, 1}, -1.0);
    double s = static_cast<double>(size);
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t cls = batch.labels[i];
      // Jittered center and extent; thickness drifts with the class index so
      // classes beyond the three base shapes stay separable.
      double cx = s / 2.0 + rng.uniform(-s / 8.0, s / 8.0);
      double cy = s / 2.0 + rng.uniform(-s / 8.0, s / 8.0);
      double half = s * rng.uniform(0.22, 0.38);
      double thick = s * (0.06 + 0.05 * static_cast<double>(cls / 3)) + 0.6;
      for (std::size_t y = 0; y < size; ++y) {
        for (std::size_t x = 0; x < size; ++x) {
          double dx = static_cast<double>(x) + 0.5 - cx;
          double dy = static_cast<double>(y) + 0.5 - cy;
          bool on = false;
          switch (cls % 3) {
            case 0:  // vertical bar
              on = std::abs(dx) <= thick && std::abs(dy) <= half;
              break;
            case 1:  // filled disk
              on = dx * dx + dy * dy <= half * half;
              break;
            default:  // cross
              on = (std::abs(dx) <= thick || std::abs(dy) <= thick) &&
                   std::abs(dx) <= half && std::abs(dy) <= half;
              break;
          }
          if (on) batch.samples[(i * size + y) * size + x] = 1.0;
        }
      }
    }
    return batch;
  };
  return Dataset("shapes" + std::to_string(size), num_classes, {size, size, 1},
                 std::move(sampler), seed);
}

Dataset import_flat(const std::string& path, std::uint64_t seed) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("import_flat: cannot open " + path);
  auto read_u64 = [&in, &path]() {
    std::uint64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    if (!in) throw IoError("import_flat: truncated header in " + path);
    return v;
  };
  std::uint64_t count = read_u64();
  std::uint64_t rank = read_u64();
  if (count < 2 || rank == 0 || rank > 8) {
    throw IoError("import_flat: implausible header (count " + std::to_string(count) + ", rank " +
                  std::to_string(rank) + ") in " + path);
  }
  Shape sample_shape(rank);
  std::size_t per_sample = 1;
  for (std::size_t i = 0; i < rank; ++i) {
    sample_shape[i] = read_u64();
    per_sample *= sample_shape[i];
  }
  std::vector<double> pool(count * per_sample);
  in.read(reinterpret_cast<char*>(pool.data()),
          static_cast<std::streamsize>(pool.size() * sizeof(double)));
  if (!in) throw IoError("import_flat: truncated body in " + path);

  // Leading rows form the train split, the trailing 10% (at least one row)
  // the test split: disjoint by construction.
  std::size_t test_count = count / 10 > 0 ? count / 10 : 1;
  std::size_t train_count = count - test_count;
  auto shared = std::make_shared<std::vector<double>>(std::move(pool));
  auto sampler = [shared, per_sample, sample_shape, train_count, test_count](
                     std::size_t n, Rng& rng, bool test_split) {
    Batch batch;
    batch.labels.assign(n, 0);
    Shape full{n};
    full.insert(full.end(), sample_shape.begin(), sample_shape.end());
    batch.samples = Tensor(full);
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t row = test_split ? train_count + rng.integer(test_count)
                                   : rng.integer(train_count);
      for (std::size_t j = 0; j < per_sample; ++j) {
        batch.samples[i * per_sample + j] = (*shared)[row * per_sample + j];
      }
    }
    return batch;
  };
  return Dataset("import", 1, sample_shape, std::move(sampler), seed);
}

void export_flat(const std::string& path, const Tensor& samples) {
  if (samples.rank() < 2) throw ArgumentError("export_flat: need a batched tensor");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("export_flat: cannot open " + path);
  std::uint64_t count = samples.shape()[0];
  std::uint64_t rank = samples.rank() - 1;
  auto write_u64 = [&out](std::uint64_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
  };
  write_u64(count);
  write_u64(rank);
  for (std::size_t i = 1; i < samples.rank(); ++i) write_u64(samples.shape()[i]);
  out.write(reinterpret_cast<const char*>(samples.vec().data()),
            static_cast<std::streamsize>(samples.size() * sizeof(double)));
  if (!out) throw IoError("export_flat: write failed for " + path);
}

}  // namespace smgan
