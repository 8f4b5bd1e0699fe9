#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <thread>
#include <vector>

#include "limex/error.hpp"
#include "limex/explanation.hpp"
#include "limex/image.hpp"
#include "limex/linalg.hpp"
#include "limex/models.hpp"
#include "limex/rng.hpp"

namespace limex {

struct LimeConfig {
  std::int64_t n = 1000;     // number of perturbed samples
  double bandwidth = 0.25;   // weight kernel bandwidth
  double ridge = 1.0;        // ridge regularization (intercept unpenalized)
  std::uint64_t seed = 0;
  int top_k = 5;             // top-coefficient count for display
  int batch_size = 64;       // model queries per batch
  int threads = 1;
};

inline void validate_config(const LimeConfig& cfg) {
  if (cfg.n < 1) throw InvalidInput("sample count must be at least 1");
  if (!(cfg.bandwidth > 0.0)) throw InvalidInput("bandwidth must be positive");
  if (!(cfg.ridge >= 0.0)) throw InvalidInput("ridge parameter must be nonnegative");
  if (cfg.top_k < 1) throw InvalidInput("top-k count must be at least 1");
  if (cfg.batch_size < 1) throw InvalidInput("batch size must be at least 1");
  if (cfg.threads < 1) throw InvalidInput("thread count must be at least 1");
}

/// Sample weight as a function of the deactivated fraction t = s/d:
/// exp(-(1 - sqrt(1-t))^2 / (2 bandwidth^2)). Always in (0, 1].
inline double weight_kernel(double t, double bandwidth) {
  if (!(t >= 0.0 && t <= 1.0))
    throw InvalidInput("weight kernel argument outside [0,1]");
  if (!(bandwidth > 0.0)) throw InvalidInput("bandwidth must be positive");
  const double a = 1.0 - std::sqrt(1.0 - t);
  return std::exp(-(a * a) / (2.0 * bandwidth * bandwidth));
}

/// Weight of a mask: the kernel evaluated at (number of zeros)/d. For masks
/// with at least one active superpixel this equals the Gaussian of the cosine
/// distance to the all-ones mask; the kernel form also covers the all-zeros
/// mask, where the cosine distance is undefined.
inline double mask_weight(const MaskVector& z, double bandwidth) {
  const int d = static_cast<int>(z.size());
  if (d < 2) throw InvalidInput("mask weight needs at least 2 superpixels");
  int zeros = 0;
  for (std::uint8_t b : z) zeros += (b == 0);
  return weight_kernel(static_cast<double>(zeros) / d, bandwidth);
}

/// n x d matrix of fair coin flips, row-major. Entry (i,j) depends only on
/// (seed, i, j), so the matrix is identical no matter how or in what order it
/// is filled.
inline std::vector<std::uint8_t> draw_masks(int d, std::int64_t n,
                                            std::uint64_t seed) {
  if (d < 2) throw InvalidInput("mask sampling needs at least 2 superpixels");
  if (n < 1) throw InvalidInput("sample count must be at least 1");
  std::vector<std::uint8_t> masks(static_cast<std::size_t>(n) * d);
  for (std::int64_t i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j)
      masks[static_cast<std::size_t>(i) * d + j] =
          coin_flip(seed, static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(j)) ? 1 : 0;
  return masks;
}

/// Design matrix, precomputed weights, and model responses for one surrogate
/// fit. Rows of `design` are masks.
struct SampleBatch {
  int d = 0;
  std::vector<std::uint8_t> design;  // n x d, row-major
  std::vector<double> weights;
  std::vector<double> responses;

  std::int64_t size() const { return static_cast<std::int64_t>(weights.size()); }
  MaskVector row(std::int64_t i) const {
    return MaskVector(design.begin() + i * d, design.begin() + (i + 1) * d);
  }
};

/// Weighted ridge on the intercept-augmented design: minimizes
///   sum_i w_i (y_i - b0 - sum_j bj z_ij)^2 + ridge * sum_{j>=1} bj^2.
/// The intercept is not penalized (the convention of standard ridge
/// implementations). Solved by the normal equations; at ridge 0 a superpixel
/// column that never toggles makes the system singular and raises
/// SingularSystem naming that column.
inline ExplanationVector fit_surrogate(const SampleBatch& batch, double ridge) {
  if (!(ridge >= 0.0)) throw InvalidInput("ridge parameter must be nonnegative");
  const int d = batch.d;
  const std::int64_t n = batch.size();
  if (n < 1) throw InvalidInput("cannot fit a surrogate on an empty batch");
  if (batch.design.size() != static_cast<std::size_t>(n) * d ||
      batch.responses.size() != static_cast<std::size_t>(n))
    throw InvalidInput("inconsistent sample batch");

  Matrix gram(d + 1, d + 1);
  std::vector<double> rhs(d + 1, 0.0);
  // Fixed accumulation order over samples keeps the result bit-stable.
  for (std::int64_t i = 0; i < n; ++i) {
    const std::uint8_t* z = &batch.design[static_cast<std::size_t>(i) * d];
    const double w = batch.weights[i];
    const double wy = w * batch.responses[i];
    gram(0, 0) += w;
    rhs[0] += wy;
    for (int j = 0; j < d; ++j) {
      if (!z[j]) continue;
      gram(0, j + 1) += w;
      rhs[j + 1] += wy;
      for (int k = j; k < d; ++k)
        if (z[k]) gram(j + 1, k + 1) += w;
    }
  }
  for (int j = 1; j <= d; ++j) {
    gram(j, j) += ridge;
    gram(j, 0) = gram(0, j);
    for (int k = j + 1; k <= d; ++k) gram(k, j) = gram(j, k);
  }

  std::vector<double> beta = solve_spd(std::move(gram), std::move(rhs));
  ExplanationVector expl;
  expl.intercept = beta[0];
  expl.coefficients.assign(beta.begin() + 1, beta.end());
  expl.provenance = Provenance::Empirical;
  return expl;
}

namespace detail {

/// Evaluates the model on every mask row, in batches, optionally across
/// threads. Each response lands in its own slot, so the output is identical
/// for any thread count.
inline std::vector<double> batched_responses(
    const BlackBoxModel& model, const Image& image, const Image& replacement,
    const SuperpixelPartition& part, const std::vector<std::uint8_t>& masks,
    std::int64_t n, int batch_size, int threads) {
  const int d = part.d;
  std::vector<double> responses(n);
  const std::int64_t n_batches = (n + batch_size - 1) / batch_size;

  auto run_batches = [&](std::int64_t first_batch, std::int64_t last_batch) {
    std::vector<Image> xs;
    for (std::int64_t b = first_batch; b < last_batch; ++b) {
      const std::int64_t lo = b * batch_size;
      const std::int64_t hi = std::min<std::int64_t>(lo + batch_size, n);
      xs.clear();
      for (std::int64_t i = lo; i < hi; ++i) {
        MaskVector z(masks.begin() + i * d, masks.begin() + (i + 1) * d);
        xs.push_back(apply_mask(image, replacement, part, z));
      }
      model.evaluate_batch(std::span<const Image>(xs),
                           std::span<double>(responses.data() + lo, hi - lo));
    }
  };

  if (threads <= 1 || n_batches <= 1) {
    run_batches(0, n_batches);
  } else {
    const int t = static_cast<int>(std::min<std::int64_t>(threads, n_batches));
    std::vector<std::thread> pool;
    for (int w = 0; w < t; ++w) {
      const std::int64_t lo = n_batches * w / t;
      const std::int64_t hi = n_batches * (w + 1) / t;
      pool.emplace_back(run_batches, lo, hi);
    }
    for (auto& th : pool) th.join();
  }
  return responses;
}

}  // namespace detail

struct LimeExplanation {
  ExplanationVector explanation;
  LimeConfig config;
};

/// The full pipeline: sample masks, synthesize perturbed images, query the
/// model, weight, and fit the surrogate. Deterministic given (inputs, seed),
/// independent of threads/batch size.
inline LimeExplanation explain(const Image& image,
                               const SuperpixelPartition& part,
                               const ReplacementSpec& replacement_spec,
                               const BlackBoxModel& model,
                               const LimeConfig& config) {
  validate_config(config);
  validate_partition(part);
  require_same_grid(image, part);
  if (part.d < 2)
    throw InvalidInput("surrogate fitting needs at least 2 superpixels");

  const Image replacement = compute_replacement(image, part, replacement_spec);
  SampleBatch batch;
  batch.d = part.d;
  batch.design = draw_masks(part.d, config.n, config.seed);
  batch.responses = detail::batched_responses(model, image, replacement, part,
                                              batch.design, config.n,
                                              config.batch_size, config.threads);
  batch.weights.resize(config.n);
  for (std::int64_t i = 0; i < config.n; ++i) {
    int zeros = 0;
    for (int j = 0; j < part.d; ++j)
      zeros += (batch.design[static_cast<std::size_t>(i) * part.d + j] == 0);
    batch.weights[i] =
        weight_kernel(static_cast<double>(zeros) / part.d, config.bandwidth);
  }

  LimeExplanation result;
  result.explanation = fit_surrogate(batch, config.ridge);
  result.config = config;
  return result;
}

}  // namespace limex
