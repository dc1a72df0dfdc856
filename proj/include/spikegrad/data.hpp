#pragma once

// Seeded randomness, spike-train generators and IDX (MNIST) loading.

#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "spikegrad/snn.hpp"

namespace spikegrad {

/// mt19937_64 with platform-independent conversions to uniform and normal
/// variates (the std distributions are implementation-defined).
class Rng {
 public:
  static constexpr const char* kAlgorithm = "mt19937_64";

  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t next_u64() { return engine_(); }
  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [lo, hi].
  std::size_t uniform_int(std::size_t lo, std::size_t hi);
  bool bernoulli(double p) { return uniform() < p; }
  /// Standard normal via Box-Muller; consumes two draws per call.
  double normal();

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

/// Mixes a base seed with stream indices (splitmix64 finalizer), for
/// independent per-sample streams.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0);

/// Each entry 1 with probability p, drawn neuron by neuron, step by step.
SpikeTrain bernoulli_train(std::size_t n_neurons, std::size_t n_steps, double p, Rng& rng);

/// Neuron i fires each step with probability (pixel_i / 255) * p_max.
SpikeTrain rate_encode_image(std::span<const std::uint8_t> pixels, std::size_t n_steps,
                             double p_max, Rng& rng);

/// Neuron `class_idx` fires at steps period-1, 2*period-1, ...; all others
/// stay silent.
SpikeTrain class_target_train(std::size_t class_idx, std::size_t n_classes, std::size_t n_steps,
                              std::size_t period);

/// Row with the most spikes; ties go to the lowest index.
std::size_t decode_spike_count(const SpikeTrain& output);

struct LabeledImages {
  std::size_t rows = 28;
  std::size_t cols = 28;
  std::vector<std::uint8_t> pixels;  // n_images x (rows * cols)
  std::vector<std::uint8_t> labels;

  std::size_t size() const { return labels.size(); }
  std::size_t image_size() const { return rows * cols; }
  std::span<const std::uint8_t> image(std::size_t i) const {
    return {pixels.data() + i * image_size(), image_size()};
  }
  /// Images [first, first + count) as a new set.
  LabeledImages slice(std::size_t first, std::size_t count) const;
};

class IdxError : public std::runtime_error {
 public:
  enum class Kind { missing_file, bad_magic, truncated, count_mismatch, bad_label };

  IdxError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

/// Parses in-memory IDX image and label files.
LabeledImages parse_idx(std::span<const std::uint8_t> image_bytes,
                        std::span<const std::uint8_t> label_bytes);

LabeledImages load_idx(const std::filesystem::path& images, const std::filesystem::path& labels);

/// Serializes to the IDX image and label byte layouts.
std::vector<std::uint8_t> encode_idx_images(const LabeledImages& set);
std::vector<std::uint8_t> encode_idx_labels(const LabeledImages& set);

}  // namespace spikegrad
