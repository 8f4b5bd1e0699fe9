#pragma once

#include <cmath>
#include <cstdint>
#include <variant>
#include <vector>

#include "limex/error.hpp"
#include "limex/explanation.hpp"
#include "limex/image.hpp"
#include "limex/lime.hpp"
#include "limex/linalg.hpp"
#include "limex/models.hpp"

namespace limex {

namespace detail {
inline void require_d(int d) {
  if (d < 2) throw InvalidInput("the coefficient theory needs d >= 2 superpixels");
}
inline void require_enumerable(int d) {
  if (d > 20)
    throw InvalidInput("exhaustive enumeration is limited to d <= 20 superpixels");
}
}  // namespace detail

/// Generalized alpha coefficient: the expectation of the sample weight times
/// p fixed active and q fixed inactive mask coordinates,
///   2^{-d} sum_s C(d-p-q, s-q) psi(s/d).
/// The binomial mass C(d-p-q, s-q)/2^d is accumulated through recursive term
/// ratios, which stays in double range for d up to 1000 (no binomial is ever
/// materialized). C(n, k) is 0 outside 0 <= k <= n.
inline double generalized_alpha(int d, int p, int q, double bandwidth) {
  detail::require_d(d);
  if (p < 0 || q < 0 || p + q > d)
    throw InvalidInput("alpha coefficient orders must satisfy p, q >= 0, p+q <= d");
  if (!(bandwidth > 0.0)) throw InvalidInput("bandwidth must be positive");
  if (d > 1022) throw InvalidInput("alpha coefficients support d <= 1022");
  const int m = d - p - q;  // binomial row C(m, s-q)
  double term = std::ldexp(1.0, -d);
  double sum = 0.0;
  for (int s = q; s <= q + m; ++s) {
    sum += term * weight_kernel(static_cast<double>(s) / d, bandwidth);
    term *= static_cast<double>(m - (s - q)) / static_cast<double>(s - q + 1);
  }
  return sum;
}

inline double alpha_coefficient(int d, int p, double bandwidth) {
  if (p < 0 || p > d) throw InvalidInput("alpha coefficient order outside {0,...,d}");
  return generalized_alpha(d, p, 0, bandwidth);
}

/// Exact enumeration oracle over all 2^d masks: the average of
/// psi(zeros/d) * z_1...z_p * (1-z_{p+1})...(1-z_{p+q}).
inline double alpha_enumeration(int d, int p, int q, double bandwidth) {
  detail::require_d(d);
  detail::require_enumerable(d);
  if (p < 0 || q < 0 || p + q > d)
    throw InvalidInput("alpha coefficient orders must satisfy p, q >= 0, p+q <= d");
  const std::uint32_t on_bits = (p == 0) ? 0u : ((1u << p) - 1u);
  const std::uint32_t off_bits = ((q == 0) ? 0u : ((1u << q) - 1u)) << p;
  double sum = 0.0;
  for (std::uint32_t mask = 0; mask < (1u << d); ++mask) {
    if ((mask & on_bits) != on_bits) continue;
    if ((mask & off_bits) != 0) continue;
    const int zeros = d - __builtin_popcount(mask);
    sum += weight_kernel(static_cast<double>(zeros) / d, bandwidth);
  }
  return std::ldexp(sum, -d);
}

/// On-demand alpha values for a fixed (d, bandwidth).
struct AlphaTable {
  int d = 2;
  double bandwidth = 0.25;
  double operator()(int p, int q = 0) const {
    return generalized_alpha(d, p, q, bandwidth);
  }
};

/// Entries of the closed-form inverse expected covariance matrix, plus its
/// normalizer. All five are rational functions of alpha_0, alpha_1, alpha_2.
struct SigmaCoefficients {
  double sigma0 = 0.0;
  double sigma1 = 0.0;
  double sigma2 = 0.0;
  double sigma3 = 0.0;
  double normalizer = 0.0;  // (d-1) a0 a2 - d a1^2 + a0 a1, provably positive
};

inline SigmaCoefficients sigma_coefficients(int d, double bandwidth) {
  detail::require_d(d);
  const double a0 = alpha_coefficient(d, 0, bandwidth);
  const double a1 = alpha_coefficient(d, 1, bandwidth);
  const double a2 = alpha_coefficient(d, 2, bandwidth);
  SigmaCoefficients s;
  s.sigma0 = (d - 1) * a2 + a1;
  s.sigma1 = -a1;
  s.sigma2 = ((d - 2) * a0 * a2 - (d - 1) * a1 * a1 + a0 * a1) / (a1 - a2);
  s.sigma3 = (a1 * a1 - a0 * a2) / (a1 - a2);
  s.normalizer = (d - 1) * a0 * a2 - d * a1 * a1 + a0 * a1;
  return s;
}

/// Expected covariance of the intercept-augmented design under the mask
/// distribution: alpha_0 at (0,0); alpha_1 on the first row/column and the
/// diagonal; alpha_2 everywhere else.
inline Matrix expected_covariance(int d, double bandwidth) {
  detail::require_d(d);
  const double a0 = alpha_coefficient(d, 0, bandwidth);
  const double a1 = alpha_coefficient(d, 1, bandwidth);
  const double a2 = alpha_coefficient(d, 2, bandwidth);
  Matrix m(d + 1, d + 1, a2);
  m(0, 0) = a0;
  for (int j = 1; j <= d; ++j) {
    m(0, j) = a1;
    m(j, 0) = a1;
    m(j, j) = a1;
  }
  return m;
}

/// Closed-form inverse of the expected covariance: sigma0 at (0,0), sigma1 on
/// the first row/column, sigma2 on the diagonal, sigma3 elsewhere, all over
/// the normalizer.
inline Matrix expected_covariance_inverse(int d, double bandwidth) {
  const SigmaCoefficients s = sigma_coefficients(d, bandwidth);
  Matrix m(d + 1, d + 1, s.sigma3 / s.normalizer);
  m(0, 0) = s.sigma0 / s.normalizer;
  for (int j = 1; j <= d; ++j) {
    m(0, j) = s.sigma1 / s.normalizer;
    m(j, 0) = s.sigma1 / s.normalizer;
    m(j, j) = s.sigma2 / s.normalizer;
  }
  return m;
}

enum class MomentTag { ExactEnumeration, MonteCarlo, ClosedForm };

/// First moments of the weighted responses: gamma0 = E[w f(x)] and
/// gamma[j] = E[w z_{j+1} f(x)].
struct MomentVector {
  double gamma0 = 0.0;
  std::vector<double> gamma;
  MomentTag tag = MomentTag::ClosedForm;

  int dimension() const { return static_cast<int>(gamma.size()); }
};

/// Exact moments by full enumeration of the 2^d masks (d <= 20).
inline MomentVector moments_exact(const BlackBoxModel& model, const Image& image,
                                  const SuperpixelPartition& part,
                                  const Image& replacement, double bandwidth) {
  detail::require_d(part.d);
  detail::require_enumerable(part.d);
  validate_partition(part);
  require_same_grid(image, part);
  const int d = part.d;
  MomentVector mv;
  mv.gamma.assign(d, 0.0);
  mv.tag = MomentTag::ExactEnumeration;
  MaskVector z(d);
  for (std::uint32_t mask = 0; mask < (1u << d); ++mask) {
    for (int j = 0; j < d; ++j) z[j] = (mask >> j) & 1u;
    const int zeros = d - __builtin_popcount(mask);
    const double w = weight_kernel(static_cast<double>(zeros) / d, bandwidth);
    const double f = model.evaluate(apply_mask(image, replacement, part, z));
    const double wf = std::ldexp(w * f, -d);
    mv.gamma0 += wf;
    for (int j = 0; j < d; ++j)
      if (z[j]) mv.gamma[j] += wf;
  }
  return mv;
}

/// Monte-Carlo moments over n masks drawn exactly as the sampling pipeline
/// draws them (same counter-based stream for a given seed).
inline MomentVector moments_monte_carlo(const BlackBoxModel& model,
                                        const Image& image,
                                        const SuperpixelPartition& part,
                                        const Image& replacement,
                                        double bandwidth, std::int64_t n,
                                        std::uint64_t seed) {
  detail::require_d(part.d);
  validate_partition(part);
  require_same_grid(image, part);
  if (n < 1) throw InvalidInput("sample count must be at least 1");
  const int d = part.d;
  const std::vector<std::uint8_t> masks = draw_masks(d, n, seed);
  MomentVector mv;
  mv.gamma.assign(d, 0.0);
  mv.tag = MomentTag::MonteCarlo;
  MaskVector z(d);
  for (std::int64_t i = 0; i < n; ++i) {
    int zeros = 0;
    for (int j = 0; j < d; ++j) {
      z[j] = masks[static_cast<std::size_t>(i) * d + j];
      zeros += (z[j] == 0);
    }
    const double w = weight_kernel(static_cast<double>(zeros) / d, bandwidth);
    const double f = model.evaluate(apply_mask(image, replacement, part, z));
    const double wf = w * f;
    mv.gamma0 += wf;
    for (int j = 0; j < d; ++j)
      if (z[j]) mv.gamma[j] += wf;
  }
  mv.gamma0 /= static_cast<double>(n);
  for (double& g : mv.gamma) g /= static_cast<double>(n);
  return mv;
}

/// Limit explanation from weighted moments:
///   b0 = (sigma0 g0 + sigma1 sum_j g_j) / normalizer
///   bj = (sigma1 g0 + sigma2 g_j + sigma3 sum_{k != j} g_k) / normalizer,
/// which is the closed-form inverse covariance applied to the moment vector.
inline ExplanationVector explanation_from_moments(const MomentVector& moments,
                                                  int d, double bandwidth) {
  detail::require_d(d);
  if (moments.dimension() != d)
    throw InvalidInput("moment vector dimension does not match d");
  const SigmaCoefficients s = sigma_coefficients(d, bandwidth);
  double total = 0.0;
  for (double g : moments.gamma) total += g;
  ExplanationVector expl;
  expl.provenance = Provenance::Limit;
  expl.intercept = (s.sigma0 * moments.gamma0 + s.sigma1 * total) / s.normalizer;
  expl.coefficients.resize(d);
  for (int j = 0; j < d; ++j)
    expl.coefficients[j] = (s.sigma1 * moments.gamma0 +
                            s.sigma2 * moments.gamma[j] +
                            s.sigma3 * (total - moments.gamma[j])) /
                           s.normalizer;
  return expl;
}

/// Closed-form limit explanation of a shape detector (all shape pixels must
/// exceed tau for the response to fire), for a replacement image that is
/// known wherever the shape lives.
///
/// Each shape pixel constrains the superpixel that owns it: if it is bright
/// in both the original and the replacement it never blocks detection; bright
/// only in the original forces the superpixel on; bright only in the
/// replacement forces it off; bright in neither makes detection impossible
/// and the whole explanation is zero (as it is when one superpixel would have
/// to be both on and off). With p forced-on and q forced-off superpixels the
/// moments are generalized alpha coefficients, which the inverse covariance
/// then maps to the explanation.
inline ExplanationVector limit_explanation_shape_detector(
    const SuperpixelPartition& part, const std::vector<int>& shape_pixels,
    double tau, const Image& image, const Image& replacement,
    double bandwidth) {
  detail::require_d(part.d);
  validate_partition(part);
  require_same_grid(image, part);
  if (!image.same_shape(replacement))
    throw InvalidInput("original and replacement images have different shapes");
  if (image.channels != 1)
    throw InvalidInput("shape detector analysis requires a single-channel image");
  if (!(tau > 0.0 && tau < 1.0))
    throw InvalidInput("shape detector threshold must lie in (0,1)");

  const int d = part.d;
  enum class Need : std::uint8_t { Free, On, Off };
  std::vector<Need> need(d, Need::Free);
  bool impossible = false;
  for (int u : shape_pixels) {
    if (u < 0 || u >= part.height * part.width)
      throw InvalidInput("shape pixel index out of range");
    const bool lit_original = image.pixels[u] > tau;
    const bool lit_replacement = replacement.pixels[u] > tau;
    if (lit_original && lit_replacement) continue;
    if (!lit_original && !lit_replacement) {
      impossible = true;
      break;
    }
    const int j = part.labels[u];
    const Need want = lit_original ? Need::On : Need::Off;
    if (need[j] == Need::Free) need[j] = want;
    else if (need[j] != want) {
      impossible = true;
      break;
    }
  }

  ExplanationVector zero;
  zero.provenance = Provenance::Limit;
  zero.coefficients.assign(d, 0.0);
  if (impossible) return zero;

  int p = 0, q = 0;
  for (Need nd : need) {
    p += (nd == Need::On);
    q += (nd == Need::Off);
  }
  MomentVector mv;
  mv.tag = MomentTag::ClosedForm;
  mv.gamma0 = generalized_alpha(d, p, q, bandwidth);
  const double gamma_on = mv.gamma0;
  const double gamma_free = generalized_alpha(d, p + 1, q, bandwidth);
  mv.gamma.resize(d);
  for (int j = 0; j < d; ++j)
    mv.gamma[j] = need[j] == Need::Off
                      ? 0.0
                      : (need[j] == Need::On ? gamma_on : gamma_free);
  return explanation_from_moments(mv, d, bandwidth);
}

/// Limit explanation of a linear model: the coefficient of superpixel j is
/// the model's coefficients times (original - replacement) summed over the
/// superpixel; the intercept is the model at the replacement. The prediction
/// at the original image is reproduced exactly: b0 + sum_j bj = f(original).
inline ExplanationVector limit_explanation_linear(
    const std::vector<double>& coefficients, const Image& image,
    const Image& replacement, const SuperpixelPartition& part) {
  detail::require_d(part.d);
  validate_partition(part);
  require_same_grid(image, part);
  if (!image.same_shape(replacement))
    throw InvalidInput("original and replacement images have different shapes");
  if (coefficients.size() != image.sample_count())
    throw InvalidInput("linear coefficient count does not match image shape");

  ExplanationVector expl;
  expl.provenance = Provenance::Limit;
  expl.coefficients.assign(part.d, 0.0);
  for (int u = 0; u < image.pixel_count(); ++u) {
    const int j = part.labels[u];
    for (int c = 0; c < image.channels; ++c) {
      const std::size_t i = static_cast<std::size_t>(u) * image.channels + c;
      expl.coefficients[j] +=
          coefficients[i] * (image.pixels[i] - replacement.pixels[i]);
      expl.intercept += coefficients[i] * replacement.pixels[i];
    }
  }
  return expl;
}

struct ExactEnumeration {};
struct MonteCarloEstimator {
  std::int64_t n = 1000;
  std::uint64_t seed = 0;
};
using LargeBandwidthEstimator = std::variant<ExactEnumeration, MonteCarloEstimator>;

/// The large-bandwidth limit of the explanation, where weighting disappears:
///   bj = 2 (E[f(x) | superpixel j active] - E[f(x)])
/// under unweighted fair-coin masks. The intercept is the matching limit
/// E[f(x)] - (1/2) sum_j bj. Exact enumeration (d <= 20) or Monte Carlo.
inline ExplanationVector limit_explanation_large_bandwidth(
    const BlackBoxModel& model, const Image& image,
    const SuperpixelPartition& part, const Image& replacement,
    const LargeBandwidthEstimator& estimator) {
  detail::require_d(part.d);
  validate_partition(part);
  require_same_grid(image, part);
  const int d = part.d;

  double mean_all = 0.0;
  std::vector<double> mean_active(d, 0.0);

  if (std::holds_alternative<ExactEnumeration>(estimator)) {
    detail::require_enumerable(d);
    MaskVector z(d);
    for (std::uint32_t mask = 0; mask < (1u << d); ++mask) {
      for (int j = 0; j < d; ++j) z[j] = (mask >> j) & 1u;
      const double f = model.evaluate(apply_mask(image, replacement, part, z));
      mean_all += std::ldexp(f, -d);
      for (int j = 0; j < d; ++j)
        if (z[j]) mean_active[j] += std::ldexp(f, -(d - 1));
    }
  } else {
    const auto& mc = std::get<MonteCarloEstimator>(estimator);
    if (mc.n < 1) throw InvalidInput("sample count must be at least 1");
    const std::vector<std::uint8_t> masks = draw_masks(d, mc.n, mc.seed);
    std::vector<std::int64_t> active_count(d, 0);
    MaskVector z(d);
    for (std::int64_t i = 0; i < mc.n; ++i) {
      for (int j = 0; j < d; ++j)
        z[j] = masks[static_cast<std::size_t>(i) * d + j];
      const double f = model.evaluate(apply_mask(image, replacement, part, z));
      mean_all += f;
      for (int j = 0; j < d; ++j)
        if (z[j]) {
          mean_active[j] += f;
          ++active_count[j];
        }
    }
    mean_all /= static_cast<double>(mc.n);
    for (int j = 0; j < d; ++j) {
      if (active_count[j] == 0)
        throw NumericError("no sample activated superpixel " +
                           std::to_string(j + 1) +
                           "; increase the sample count");
      mean_active[j] /= static_cast<double>(active_count[j]);
    }
  }

  ExplanationVector expl;
  expl.provenance = Provenance::Limit;
  expl.coefficients.resize(d);
  double coeff_sum = 0.0;
  for (int j = 0; j < d; ++j) {
    expl.coefficients[j] = 2.0 * (mean_active[j] - mean_all);
    coeff_sum += expl.coefficients[j];
  }
  expl.intercept = mean_all - 0.5 * coeff_sum;
  return expl;
}

/// Sample count sufficient for the concentration guarantee: with a model
/// bounded by `bound`, at least
///   ceil(max(2^15 d^4 e^{2/nu^2},
///            2^21 d^7 max(M, M^2) e^{4/nu^2} / eps^2) * log(8d/eta))
/// samples put the fitted coefficients within eps of the limit explanation
/// with probability 1-eta. Reported verbatim; the constants are not claimed
/// to be tight.
inline std::uint64_t min_sample_size(double bound, double epsilon, double eta,
                                     int d, double bandwidth) {
  detail::require_d(d);
  if (!(bound > 0.0)) throw InvalidInput("model bound must be positive");
  if (!(epsilon > 0.0)) throw InvalidInput("accuracy epsilon must be positive");
  if (!(eta > 0.0 && eta < 1.0))
    throw InvalidInput("failure probability eta must lie in (0,1)");
  if (!(bandwidth > 0.0)) throw InvalidInput("bandwidth must be positive");
  const long double dd = static_cast<long double>(d);
  const long double e2 = std::exp(2.0L / (static_cast<long double>(bandwidth) *
                                          bandwidth));
  const long double first = 32768.0L * dd * dd * dd * dd * e2;
  const long double second = 2097152.0L * dd * dd * dd * dd * dd * dd * dd *
                             std::max<long double>(bound, static_cast<long double>(bound) * bound) *
                             e2 * e2 /
                             (static_cast<long double>(epsilon) * epsilon);
  const long double v =
      std::ceil(std::max(first, second) * std::log(8.0L * dd / eta));
  if (!(v >= 1.0L) || v > 9.0e18L)
    throw NumericError("sample size bound exceeds the 64-bit integer range");
  return static_cast<std::uint64_t>(v);
}

/// Brute-force sum over index pairs j < k of C(d,j) C(d,k) (j-k)^2 in exact
/// integer arithmetic. Equals d * 4^(d-1); the exact-range guard keeps every
/// intermediate inside 128-bit integers.
inline std::uint64_t binomial_pair_square_sum(int d) {
  if (d < 1) throw InvalidInput("pair sum needs d >= 1");
  if (d > 30)
    throw NumericError("pair sum over d > 30 leaves the exact integer range");
  std::vector<std::uint64_t> binom(d + 1);
  binom[0] = 1;
  for (int k = 1; k <= d; ++k)
    binom[k] = binom[k - 1] * static_cast<std::uint64_t>(d - k + 1) /
               static_cast<std::uint64_t>(k);
  unsigned __int128 sum = 0;
  for (int j = 0; j < d; ++j)
    for (int k = j + 1; k <= d; ++k) {
      const unsigned __int128 term =
          static_cast<unsigned __int128>(binom[j]) * binom[k] *
          static_cast<std::uint64_t>(k - j) * static_cast<std::uint64_t>(k - j);
      sum += term;
    }
  if (sum > static_cast<unsigned __int128>(UINT64_MAX))
    throw NumericError("pair sum overflows 64 bits");
  return static_cast<std::uint64_t>(sum);
}

}  // namespace limex
