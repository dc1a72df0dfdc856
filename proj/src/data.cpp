#include "spikegrad/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <numbers>

namespace spikegrad {

std::size_t Rng::uniform_int(std::size_t lo, std::size_t hi) {
  const auto span = static_cast<double>(hi - lo + 1);
  return lo + std::min(hi - lo, static_cast<std::size_t>(uniform() * span));
}

double Rng::normal() {
  const double u1 = 1.0 - uniform();  // (0, 1]
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b) {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(mix(mix(base) ^ a) ^ b);
}

SpikeTrain bernoulli_train(std::size_t n_neurons, std::size_t n_steps, double p, Rng& rng) {
  if (!(p >= 0.0 && p <= 1.0))
    throw std::invalid_argument("bernoulli_train: p must lie in [0, 1]");
  SpikeTrain s(n_neurons, n_steps);
  for (std::size_t i = 0; i < n_neurons; ++i)
    for (std::size_t t = 0; t < n_steps; ++t) s.set(i, t, rng.bernoulli(p));
  return s;
}

SpikeTrain rate_encode_image(std::span<const std::uint8_t> pixels, std::size_t n_steps,
                             double p_max, Rng& rng) {
  if (!(p_max > 0.0 && p_max <= 1.0))
    throw std::invalid_argument("rate_encode_image: p_max must lie in (0, 1]");
  SpikeTrain s(pixels.size(), n_steps);
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    const double p = pixels[i] / 255.0 * p_max;
    for (std::size_t t = 0; t < n_steps; ++t) s.set(i, t, rng.bernoulli(p));
  }
  return s;
}

SpikeTrain class_target_train(std::size_t class_idx, std::size_t n_classes, std::size_t n_steps,
                              std::size_t period) {
  if (class_idx >= n_classes)
    throw std::out_of_range("class_target_train: class index " + std::to_string(class_idx) +
                            " >= " + std::to_string(n_classes));
  if (period == 0) throw std::invalid_argument("class_target_train: period must be >= 1");
  SpikeTrain s(n_classes, n_steps);
  for (std::size_t t = period - 1; t < n_steps; t += period) s.set(class_idx, t, true);
  return s;
}

std::size_t decode_spike_count(const SpikeTrain& output) {
  std::size_t best = 0;
  std::size_t best_count = output.count(0);
  for (std::size_t i = 1; i < output.n_neurons(); ++i) {
    const std::size_t c = output.count(i);
    if (c > best_count) {
      best = i;
      best_count = c;
    }
  }
  return best;
}

LabeledImages LabeledImages::slice(std::size_t first, std::size_t count) const {
  if (first + count > size()) throw std::out_of_range("LabeledImages::slice: out of range");
  LabeledImages out;
  out.rows = rows;
  out.cols = cols;
  const auto px = static_cast<std::ptrdiff_t>(image_size());
  out.pixels.assign(pixels.begin() + static_cast<std::ptrdiff_t>(first) * px,
                    pixels.begin() + static_cast<std::ptrdiff_t>(first + count) * px);
  out.labels.assign(labels.begin() + static_cast<std::ptrdiff_t>(first),
                    labels.begin() + static_cast<std::ptrdiff_t>(first + count));
  return out;
}

namespace {

std::uint32_t read_be32(std::span<const std::uint8_t> bytes, std::size_t offset,
                        const char* what) {
  if (bytes.size() < offset + 4)
    throw IdxError(IdxError::Kind::truncated, std::string(what) + ": truncated header");
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

void write_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

std::string hex(std::uint32_t v) {
  char buf[11];
  std::snprintf(buf, sizeof buf, "0x%08x", v);
  return buf;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IdxError(IdxError::Kind::missing_file, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

LabeledImages parse_idx(std::span<const std::uint8_t> image_bytes,
                        std::span<const std::uint8_t> label_bytes) {
  const std::uint32_t image_magic = read_be32(image_bytes, 0, "image file");
  if (image_magic != kIdxImageMagic)
    throw IdxError(IdxError::Kind::bad_magic, "image file: bad magic " + hex(image_magic) +
                                                  ", expected " + hex(kIdxImageMagic));
  const std::uint32_t label_magic = read_be32(label_bytes, 0, "label file");
  if (label_magic != kIdxLabelMagic)
    throw IdxError(IdxError::Kind::bad_magic, "label file: bad magic " + hex(label_magic) +
                                                  ", expected " + hex(kIdxLabelMagic));

  const std::size_t n_images = read_be32(image_bytes, 4, "image file");
  LabeledImages set;
  set.rows = read_be32(image_bytes, 8, "image file");
  set.cols = read_be32(image_bytes, 12, "image file");
  const std::size_t n_labels = read_be32(label_bytes, 4, "label file");
  if (n_images != n_labels)
    throw IdxError(IdxError::Kind::count_mismatch,
                   std::to_string(n_images) + " images but " + std::to_string(n_labels) +
                       " labels");

  const std::size_t pixel_bytes = n_images * set.rows * set.cols;
  if (image_bytes.size() < 16 + pixel_bytes)
    throw IdxError(IdxError::Kind::truncated, "image file: truncated payload");
  if (label_bytes.size() < 8 + n_labels)
    throw IdxError(IdxError::Kind::truncated, "label file: truncated payload");

  set.pixels.assign(image_bytes.begin() + 16,
                    image_bytes.begin() + 16 + static_cast<std::ptrdiff_t>(pixel_bytes));
  set.labels.assign(label_bytes.begin() + 8,
                    label_bytes.begin() + 8 + static_cast<std::ptrdiff_t>(n_labels));
  for (std::size_t i = 0; i < set.labels.size(); ++i)
    if (set.labels[i] >= 10)
      throw IdxError(IdxError::Kind::bad_label, "label " + std::to_string(set.labels[i]) +
                                                    " at index " + std::to_string(i));
  return set;
}

LabeledImages load_idx(const std::filesystem::path& images, const std::filesystem::path& labels) {
  const auto image_bytes = read_file(images);
  const auto label_bytes = read_file(labels);
  return parse_idx(image_bytes, label_bytes);
}

std::vector<std::uint8_t> encode_idx_images(const LabeledImages& set) {
  std::vector<std::uint8_t> out;
  out.reserve(16 + set.pixels.size());
  write_be32(out, kIdxImageMagic);
  write_be32(out, static_cast<std::uint32_t>(set.size()));
  write_be32(out, static_cast<std::uint32_t>(set.rows));
  write_be32(out, static_cast<std::uint32_t>(set.cols));
  out.insert(out.end(), set.pixels.begin(), set.pixels.end());
  return out;
}

std::vector<std::uint8_t> encode_idx_labels(const LabeledImages& set) {
  std::vector<std::uint8_t> out;
  out.reserve(8 + set.labels.size());
  write_be32(out, kIdxLabelMagic);
  write_be32(out, static_cast<std::uint32_t>(set.size()));
  out.insert(out.end(), set.labels.begin(), set.labels.end());
  return out;
}

}  // namespace spikegrad
