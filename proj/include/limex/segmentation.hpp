#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "limex/error.hpp"
#include "limex/image.hpp"

namespace limex {

/// Mode-seeking superpixel parameters. Pixels are samples in a
/// (2 + channels)-dimensional feature space (row, col, ratio * color...):
/// `kernel_size` is the Gaussian density bandwidth, `max_dist` caps the
/// length of a parent link, `ratio` weighs color against position.
struct QuickshiftParams {
  double ratio = 1.0;
  double kernel_size = 5.0;
  double max_dist = 10.0;
};

struct GridParams {
  int rows = 0;
  int cols = 0;
};

/// rows x cols rectangular blocks of near-equal size (sizes differ by at most
/// one row/column), labeled in row-major block order.
inline SuperpixelPartition grid_segment(int height, int width,
                                        const GridParams& params) {
  if (params.rows < 1 || params.cols < 1)
    throw InvalidInput("grid segmenter needs positive rows and cols");
  if (params.rows > height || params.cols > width)
    throw InvalidInput("grid " + std::to_string(params.rows) + "x" +
                       std::to_string(params.cols) + " exceeds image " +
                       std::to_string(height) + "x" + std::to_string(width));
  if (params.rows * params.cols < 2)
    throw InvalidInput("grid segmenter needs at least 2 blocks");

  // Band r gets height/rows pixels, the first height%rows bands one extra.
  auto band_of = [](int coord, int extent, int bands) {
    const int base = extent / bands, extra = extent % bands;
    const int pivot = (base + 1) * extra;
    return coord < pivot ? coord / (base + 1) : extra + (coord - pivot) / base;
  };

  SuperpixelPartition part;
  part.height = height;
  part.width = width;
  part.d = params.rows * params.cols;
  part.labels.resize(static_cast<std::size_t>(height) * width);
  for (int y = 0; y < height; ++y) {
    const int br = band_of(y, height, params.rows);
    for (int x = 0; x < width; ++x) {
      const int bc = band_of(x, width, params.cols);
      part.labels[static_cast<std::size_t>(y) * width + x] = br * params.cols + bc;
    }
  }
  return part;
}

/// Simplified quickshift. Density at each pixel is a Gaussian kernel sum over
/// the feature space, evaluated exactly over a ceil(3*kernel_size) pixel
/// window (the performance-sensitive kernel: O(D * w^2)). Each pixel then
/// links to its feature-nearest neighbor of higher density within `max_dist`;
/// the trees rooted at local modes are the superpixels. All ties (density and
/// nearest-neighbor) break toward the smaller linear pixel index, so the
/// result is fully deterministic.
inline SuperpixelPartition quickshift_segment(const Image& img,
                                              const QuickshiftParams& params) {
  validate_image(img);
  if (!(params.ratio > 0.0) || !(params.kernel_size > 0.0) ||
      !(params.max_dist > 0.0))
    throw InvalidInput("quickshift parameters must be strictly positive");

  const int h = img.height, w = img.width, ch = img.channels;
  const int n = h * w;
  const double inv_two_ks2 = 1.0 / (2.0 * params.kernel_size * params.kernel_size);
  const double max_dist2 = params.max_dist * params.max_dist;

  auto feature_dist2 = [&](int u, int v) {
    const int uy = u / w, ux = u % w, vy = v / w, vx = v % w;
    double d2 = static_cast<double>(uy - vy) * (uy - vy) +
                static_cast<double>(ux - vx) * (ux - vx);
    for (int c = 0; c < ch; ++c) {
      const double dc = params.ratio * (img.at(u, c) - img.at(v, c));
      d2 += dc * dc;
    }
    return d2;
  };

  // Density pass. Each pixel's density is an independent sum in fixed index
  // order, so this loop could run in parallel without changing the result.
  const int win = static_cast<int>(std::ceil(3.0 * params.kernel_size));
  std::vector<double> density(n, 0.0);
  for (int u = 0; u < n; ++u) {
    const int uy = u / w, ux = u % w;
    double sum = 0.0;
    for (int vy = std::max(0, uy - win); vy <= std::min(h - 1, uy + win); ++vy)
      for (int vx = std::max(0, ux - win); vx <= std::min(w - 1, ux + win); ++vx)
        sum += std::exp(-feature_dist2(u, vy * w + vx) * inv_two_ks2);
    density[u] = sum;
  }

  // (density, -index) is a strict total order; "higher" means greater in it.
  auto higher = [&](int v, int u) {
    return density[v] > density[u] || (density[v] == density[u] && v < u);
  };

  // Parent pass: nearest higher-density pixel within max_dist, ties toward
  // the smaller index. Feature distance dominates pixel distance, so the
  // search window of ceil(max_dist) pixels is exhaustive.
  const int pwin = static_cast<int>(std::ceil(params.max_dist));
  std::vector<int> parent(n);
  for (int u = 0; u < n; ++u) {
    const int uy = u / w, ux = u % w;
    int best = u;
    double best_d2 = max_dist2;
    for (int vy = std::max(0, uy - pwin); vy <= std::min(h - 1, uy + pwin); ++vy)
      for (int vx = std::max(0, ux - pwin); vx <= std::min(w - 1, ux + pwin); ++vx) {
        const int v = vy * w + vx;
        if (v == u || !higher(v, u)) continue;
        const double d2 = feature_dist2(u, v);
        if (d2 < best_d2 || (d2 == best_d2 && best != u && v < best)) {
          best = v;
          best_d2 = d2;
        }
      }
    parent[u] = best;
  }

  // Resolve roots with path compression; relabel to contiguous ids in order
  // of first pixel occurrence.
  std::vector<int> root(n, -1);
  auto find_root = [&](int u) {
    int r = u;
    while (parent[r] != r) r = parent[r];
    while (parent[u] != u) {
      const int next = parent[u];
      parent[u] = r;
      u = next;
    }
    return r;
  };
  SuperpixelPartition part;
  part.height = h;
  part.width = w;
  part.labels.resize(n);
  int next_label = 0;
  for (int u = 0; u < n; ++u) {
    const int r = find_root(u);
    if (root[r] < 0) root[r] = next_label++;
    part.labels[u] = root[r];
  }
  part.d = next_label;
  return part;
}

}  // namespace limex
