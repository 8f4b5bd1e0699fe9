#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "limex/error.hpp"

namespace limex {

enum class Provenance { Empirical, Limit, IntegratedGradients };

inline std::string to_string(Provenance p) {
  switch (p) {
    case Provenance::Empirical: return "empirical";
    case Provenance::Limit: return "limit";
    case Provenance::IntegratedGradients: return "integrated-gradients";
  }
  return "unknown";
}

/// Interpretable coefficients: an intercept plus one coefficient per
/// superpixel (d+1 numbers in total).
struct ExplanationVector {
  double intercept = 0.0;
  std::vector<double> coefficients;
  Provenance provenance = Provenance::Empirical;

  int dimension() const { return static_cast<int>(coefficients.size()); }
};

/// Ids (1-based) of the k largest strictly positive coefficients, descending;
/// ties break toward the smaller id. Returns fewer than k if fewer exist.
inline std::vector<int> top_k_positive(const ExplanationVector& expl, int k) {
  if (k < 1) throw InvalidInput("top-k count must be at least 1");
  std::vector<int> ids;
  for (int j = 0; j < expl.dimension(); ++j)
    if (expl.coefficients[j] > 0.0) ids.push_back(j + 1);
  std::sort(ids.begin(), ids.end(), [&](int a, int b) {
    const double ca = expl.coefficients[a - 1], cb = expl.coefficients[b - 1];
    return ca != cb ? ca > cb : a < b;
  });
  if (static_cast<int>(ids.size()) > k) ids.resize(k);
  return ids;
}

}  // namespace limex
