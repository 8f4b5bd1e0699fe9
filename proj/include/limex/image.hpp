#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "limex/error.hpp"

namespace limex {

/// Dense image with pixel values in [0, 1]. Storage is row-major and
/// channel-interleaved: sample (row y, col x, channel c) lives at
/// (y * width + x) * channels + c. Pixel indices u in [0, height*width)
/// address whole pixels; per-channel samples hang off them.
struct Image {
  int height = 0;
  int width = 0;
  int channels = 1;
  std::vector<double> pixels;

  Image() = default;
  Image(int h, int w, int c, double fill = 0.0)
      : height(h),
        width(w),
        channels(c),
        pixels(static_cast<std::size_t>(h) * w * c, fill) {}

  int pixel_count() const { return height * width; }
  std::size_t sample_count() const { return pixels.size(); }

  double& at(int u, int c) { return pixels[static_cast<std::size_t>(u) * channels + c]; }
  double at(int u, int c) const { return pixels[static_cast<std::size_t>(u) * channels + c]; }

  bool same_shape(const Image& other) const {
    return height == other.height && width == other.width &&
           channels == other.channels;
  }
};

/// Pixel -> superpixel assignment. Labels are stored 0-based in memory
/// (superpixel j in file formats and reports is label j-1 here); every label
/// in {0, ..., d-1} must occur at least once.
struct SuperpixelPartition {
  int height = 0;
  int width = 0;
  int d = 0;
  std::vector<int> labels;
};

enum class ReplacementMode { MeanPerSuperpixel, SolidColor };

/// How to build the replacement image: per-superpixel channel means, or a
/// fixed color (one component per channel).
struct ReplacementSpec {
  ReplacementMode mode = ReplacementMode::MeanPerSuperpixel;
  std::vector<double> color;

  static ReplacementSpec mean() { return {ReplacementMode::MeanPerSuperpixel, {}}; }
  static ReplacementSpec solid(std::vector<double> c) {
    return {ReplacementMode::SolidColor, std::move(c)};
  }
};

/// Interpretable feature vector: bit j keeps superpixel j+1 from the original
/// image (1) or substitutes the replacement (0).
using MaskVector = std::vector<std::uint8_t>;

inline void validate_image(const Image& img) {
  if (img.height <= 0 || img.width <= 0)
    throw InvalidInput("image has empty pixel grid");
  if (img.channels != 1 && img.channels != 3)
    throw InvalidInput("image must have 1 or 3 channels, got " +
                       std::to_string(img.channels));
  if (img.pixels.size() !=
      static_cast<std::size_t>(img.height) * img.width * img.channels)
    throw InvalidInput("pixel array length does not match height*width*channels");
  for (double v : img.pixels)
    if (!(v >= 0.0 && v <= 1.0))
      throw InvalidInput("pixel value outside [0,1]");
}

/// Rejects label arrays that do not realize a full partition: wrong length,
/// out-of-range labels, or a gap (some id in {1,...,d} never used).
inline void validate_partition(const SuperpixelPartition& part) {
  if (part.height <= 0 || part.width <= 0)
    throw InvalidInput("partition has empty pixel grid");
  if (part.d < 1) throw InvalidInput("partition needs at least one superpixel");
  const std::size_t n_pixels =
      static_cast<std::size_t>(part.height) * part.width;
  if (part.labels.size() != n_pixels)
    throw InvalidInput("partition label array length does not match the pixel grid");
  std::vector<char> seen(part.d, 0);
  for (int lab : part.labels) {
    if (lab < 0 || lab >= part.d)
      throw InvalidInput("partition label " + std::to_string(lab + 1) +
                         " outside {1,...," + std::to_string(part.d) + "}");
    seen[lab] = 1;
  }
  for (int k = 0; k < part.d; ++k)
    if (!seen[k])
      throw InvalidInput("superpixel " + std::to_string(k + 1) +
                         " has no pixels (gap in partition)");
}

inline void require_same_grid(const Image& img, const SuperpixelPartition& part) {
  if (img.height != part.height || img.width != part.width)
    throw InvalidInput("partition grid " + std::to_string(part.height) + "x" +
                       std::to_string(part.width) + " does not match image " +
                       std::to_string(img.height) + "x" +
                       std::to_string(img.width));
}

/// Pixel indices of each superpixel, in ascending order.
inline std::vector<std::vector<int>> superpixel_members(
    const SuperpixelPartition& part) {
  std::vector<std::vector<int>> members(part.d);
  for (int u = 0; u < static_cast<int>(part.labels.size()); ++u)
    members[part.labels[u]].push_back(u);
  return members;
}

/// Builds the replacement image: either the channel-wise mean of the input
/// over each superpixel, or a uniform fill with the given color.
inline Image compute_replacement(const Image& img,
                                 const SuperpixelPartition& part,
                                 const ReplacementSpec& spec) {
  require_same_grid(img, part);
  validate_partition(part);
  Image out(img.height, img.width, img.channels);
  if (spec.mode == ReplacementMode::SolidColor) {
    if (static_cast<int>(spec.color.size()) != img.channels)
      throw InvalidInput("solid color needs exactly one component per channel");
    for (double v : spec.color)
      if (!(v >= 0.0 && v <= 1.0))
        throw InvalidInput("solid color component outside [0,1]");
    for (int u = 0; u < img.pixel_count(); ++u)
      for (int c = 0; c < img.channels; ++c) out.at(u, c) = spec.color[c];
    return out;
  }
  std::vector<double> sums(static_cast<std::size_t>(part.d) * img.channels, 0.0);
  std::vector<std::int64_t> counts(part.d, 0);
  for (int u = 0; u < img.pixel_count(); ++u) {
    const int k = part.labels[u];
    ++counts[k];
    for (int c = 0; c < img.channels; ++c)
      sums[static_cast<std::size_t>(k) * img.channels + c] += img.at(u, c);
  }
  for (int u = 0; u < img.pixel_count(); ++u) {
    const int k = part.labels[u];
    for (int c = 0; c < img.channels; ++c)
      out.at(u, c) = sums[static_cast<std::size_t>(k) * img.channels + c] /
                     static_cast<double>(counts[k]);
  }
  return out;
}

/// Blends original and replacement per superpixel: pixels of superpixel j
/// come from the original when bit j is set, from the replacement otherwise.
inline Image apply_mask(const Image& img, const Image& replacement,
                        const SuperpixelPartition& part, const MaskVector& z) {
  if (!img.same_shape(replacement))
    throw InvalidInput("original and replacement images have different shapes");
  require_same_grid(img, part);
  if (static_cast<int>(z.size()) != part.d)
    throw InvalidInput("mask length " + std::to_string(z.size()) +
                       " does not match superpixel count " +
                       std::to_string(part.d));
  Image out(img.height, img.width, img.channels);
  for (int u = 0; u < img.pixel_count(); ++u) {
    const bool keep = z[part.labels[u]] != 0;
    const Image& src = keep ? img : replacement;
    for (int c = 0; c < img.channels; ++c) out.at(u, c) = src.at(u, c);
  }
  return out;
}

/// Single-channel indicator image of superpixel `superpixel_id` (1-based).
inline Image binary_superpixel_mask(const SuperpixelPartition& part,
                                    int superpixel_id) {
  validate_partition(part);
  if (superpixel_id < 1 || superpixel_id > part.d)
    throw InvalidInput("superpixel id " + std::to_string(superpixel_id) +
                       " outside {1,...," + std::to_string(part.d) + "}");
  Image out(part.height, part.width, 1);
  for (int u = 0; u < part.height * part.width; ++u)
    out.pixels[u] = (part.labels[u] == superpixel_id - 1) ? 1.0 : 0.0;
  return out;
}

}  // namespace limex
