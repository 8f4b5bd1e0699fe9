#pragma once

#include <cmath>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "limex/error.hpp"
#include "limex/image.hpp"
#include "limex/pnm_io.hpp"
#include "limex/rng.hpp"

namespace limex {

/// Scalar-valued model over images, optionally differentiable. Instances are
/// immutable after construction; evaluate/gradient are pure and safe to call
/// concurrently.
class BlackBoxModel {
 public:
  virtual ~BlackBoxModel() = default;

  virtual double evaluate(const Image& x) const = 0;

  virtual void evaluate_batch(std::span<const Image> xs,
                              std::span<double> out) const {
    for (std::size_t i = 0; i < xs.size(); ++i) out[i] = evaluate(xs[i]);
  }

  virtual bool has_gradient() const { return false; }

  /// Per-sample derivative array, same length as Image::pixels.
  virtual std::vector<double> gradient(const Image&) const {
    throw InvalidInput("model does not provide a gradient");
  }

  /// Known bound M with |evaluate| <= M on [0,1]^D, when available.
  virtual std::optional<double> bound() const { return std::nullopt; }
};

/// Fires (returns 1) iff every pixel of a fixed shape strictly exceeds the
/// threshold. Grayscale only. The gradient is identically zero: the model is
/// piecewise constant, so gradient-based attributions of it vanish.
class ShapeDetector final : public BlackBoxModel {
 public:
  ShapeDetector(std::vector<int> shape_pixels, double threshold)
      : pixels_(std::move(shape_pixels)), threshold_(threshold) {
    if (!(threshold_ > 0.0 && threshold_ < 1.0))
      throw InvalidInput("shape detector threshold must lie in (0,1)");
    std::vector<int> sorted = pixels_;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i + 1 < sorted.size(); ++i)
      if (sorted[i] == sorted[i + 1])
        throw InvalidInput("shape pixels must be distinct");
  }

  double evaluate(const Image& x) const override {
    if (x.channels != 1)
      throw InvalidInput("shape detector requires a single-channel image");
    for (int u : pixels_) {
      if (u < 0 || u >= x.pixel_count())
        throw InvalidInput("shape pixel index out of range");
      if (!(x.pixels[u] > threshold_)) return 0.0;
    }
    return 1.0;
  }

  bool has_gradient() const override { return true; }

  std::vector<double> gradient(const Image& x) const override {
    return std::vector<double>(x.sample_count(), 0.0);
  }

  std::optional<double> bound() const override { return 1.0; }

  const std::vector<int>& shape_pixels() const { return pixels_; }
  double threshold() const { return threshold_; }

 private:
  std::vector<int> pixels_;
  double threshold_;
};

/// f(x) = sum_u lambda_u x_u over all samples (per channel when the image is
/// multi-channel). The gradient is the constant coefficient array.
class LinearModel final : public BlackBoxModel {
 public:
  explicit LinearModel(std::vector<double> coefficients)
      : coefficients_(std::move(coefficients)) {}

  double evaluate(const Image& x) const override {
    check_shape(x);
    double s = 0.0;
    for (std::size_t i = 0; i < coefficients_.size(); ++i)
      s += coefficients_[i] * x.pixels[i];
    return s;
  }

  bool has_gradient() const override { return true; }

  std::vector<double> gradient(const Image& x) const override {
    check_shape(x);
    return coefficients_;
  }

  std::optional<double> bound() const override {
    double pos = 0.0, neg = 0.0;
    for (double c : coefficients_) (c > 0.0 ? pos : neg) += std::abs(c);
    return std::max(pos, neg);
  }

  const std::vector<double>& coefficients() const { return coefficients_; }

 private:
  void check_shape(const Image& x) const {
    if (x.sample_count() != coefficients_.size())
      throw InvalidInput("linear model has " +
                         std::to_string(coefficients_.size()) +
                         " coefficients but image has " +
                         std::to_string(x.sample_count()) + " samples");
  }
  std::vector<double> coefficients_;
};

/// Fully connected network with tanh hidden layers and an affine scalar
/// output. Gradients come from reverse-mode accumulation through the layers.
class SmallMlp final : public BlackBoxModel {
 public:
  /// weights[l] is (sizes[l+1] x sizes[l]) row-major; biases[l] has sizes[l+1].
  SmallMlp(std::vector<int> layer_sizes,
           std::vector<std::vector<double>> weights,
           std::vector<std::vector<double>> biases)
      : sizes_(std::move(layer_sizes)),
        weights_(std::move(weights)),
        biases_(std::move(biases)) {
    if (sizes_.size() < 2) throw InvalidInput("mlp needs at least two layer sizes");
    if (sizes_.back() != 1) throw InvalidInput("mlp output layer must be scalar");
    const std::size_t n_layers = sizes_.size() - 1;
    if (weights_.size() != n_layers || biases_.size() != n_layers)
      throw InvalidInput("mlp weight/bias count does not match layer count");
    for (std::size_t l = 0; l < n_layers; ++l) {
      if (sizes_[l] < 1 || sizes_[l + 1] < 1)
        throw InvalidInput("mlp layer sizes must be positive");
      if (weights_[l].size() != static_cast<std::size_t>(sizes_[l]) * sizes_[l + 1])
        throw InvalidInput("mlp weight matrix shape mismatch at layer " +
                           std::to_string(l));
      if (biases_[l].size() != static_cast<std::size_t>(sizes_[l + 1]))
        throw InvalidInput("mlp bias length mismatch at layer " + std::to_string(l));
      for (double v : weights_[l])
        if (!std::isfinite(v)) throw InvalidInput("non-finite mlp weight");
      for (double v : biases_[l])
        if (!std::isfinite(v)) throw InvalidInput("non-finite mlp bias");
    }
  }

  /// Deterministic uniform initialization in +-sqrt(6/(fan_in+fan_out)),
  /// derived entry-wise from the seed (order-independent).
  static SmallMlp seeded(const std::vector<int>& layer_sizes, std::uint64_t seed) {
    std::vector<std::vector<double>> weights, biases;
    for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
      const int fan_in = layer_sizes[l], fan_out = layer_sizes[l + 1];
      const double scale = std::sqrt(6.0 / (fan_in + fan_out));
      std::vector<double> w(static_cast<std::size_t>(fan_in) * fan_out);
      for (std::size_t i = 0; i < w.size(); ++i)
        w[i] = scale * (2.0 * counter_uniform(seed, l, i) - 1.0);
      weights.push_back(std::move(w));
      biases.emplace_back(fan_out, 0.0);
    }
    return SmallMlp(layer_sizes, std::move(weights), std::move(biases));
  }

  double evaluate(const Image& x) const override {
    check_shape(x);
    std::vector<double> a = x.pixels;
    for (std::size_t l = 0; l < weights_.size(); ++l)
      a = forward_layer(l, a, /*hidden=*/l + 1 < weights_.size());
    return a[0];
  }

  bool has_gradient() const override { return true; }

  std::vector<double> gradient(const Image& x) const override {
    check_shape(x);
    const std::size_t n_layers = weights_.size();
    std::vector<std::vector<double>> activations;
    activations.push_back(x.pixels);
    for (std::size_t l = 0; l < n_layers; ++l)
      activations.push_back(
          forward_layer(l, activations.back(), l + 1 < n_layers));

    std::vector<double> delta{1.0};
    for (std::size_t l = n_layers; l-- > 0;) {
      const int in = sizes_[l], out = sizes_[l + 1];
      if (l + 1 < n_layers) {  // undo tanh of this layer's output
        for (int i = 0; i < out; ++i) {
          const double t = activations[l + 1][i];
          delta[i] *= 1.0 - t * t;
        }
      }
      std::vector<double> prev(in, 0.0);
      for (int i = 0; i < out; ++i) {
        const double di = delta[i];
        const double* row = &weights_[l][static_cast<std::size_t>(i) * in];
        for (int j = 0; j < in; ++j) prev[j] += di * row[j];
      }
      delta = std::move(prev);
    }
    return delta;
  }

  std::optional<double> bound() const override {
    // The last layer's inputs live in [-1,1] (tanh) or [0,1] (raw pixels for
    // a single affine layer); either way |out| <= |b| + sum |w|.
    double m = std::abs(biases_.back()[0]);
    for (double w : weights_.back()) m += std::abs(w);
    return m;
  }

  const std::vector<int>& layer_sizes() const { return sizes_; }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["type"] = "mlp";
    j["layer_sizes"] = sizes_;
    j["weights"] = weights_;
    j["biases"] = biases_;
    return j;
  }

 private:
  void check_shape(const Image& x) const {
    if (x.sample_count() != static_cast<std::size_t>(sizes_.front()))
      throw InvalidInput("mlp expects " + std::to_string(sizes_.front()) +
                         " inputs but image has " +
                         std::to_string(x.sample_count()) + " samples");
  }

  std::vector<double> forward_layer(std::size_t l, const std::vector<double>& a,
                                    bool hidden) const {
    const int in = sizes_[l], out = sizes_[l + 1];
    std::vector<double> r(out);
    for (int i = 0; i < out; ++i) {
      double s = biases_[l][i];
      const double* row = &weights_[l][static_cast<std::size_t>(i) * in];
      for (int j = 0; j < in; ++j) s += row[j] * a[j];
      r[i] = hidden ? std::tanh(s) : s;
    }
    return r;
  }

  std::vector<int> sizes_;
  std::vector<std::vector<double>> weights_;
  std::vector<std::vector<double>> biases_;
};

/// Central finite differences, step h per sample. Costs 2 * samples model
/// queries; intended as the gradient fallback for models without one.
inline std::vector<double> finite_difference_gradient(const BlackBoxModel& model,
                                                      const Image& x,
                                                      double h = 1e-4) {
  Image probe = x;
  std::vector<double> g(x.sample_count());
  for (std::size_t i = 0; i < x.sample_count(); ++i) {
    const double v = x.pixels[i];
    probe.pixels[i] = v + h;
    const double up = model.evaluate(probe);
    probe.pixels[i] = v - h;
    const double down = model.evaluate(probe);
    probe.pixels[i] = v;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

/// Resolves a model spec JSON against the image dimensions it will be
/// applied to. Supported specs:
///   {"type":"shape_detector","tau":T,"pixels":[...]}
///   {"type":"shape_detector","tau":T,"rect":{"x":..,"y":..,"w":..,"h":..}}
///   {"type":"linear","coefficients":[...]}
///   {"type":"linear","coefficients_csv":"path"}
///   {"type":"mlp","layer_sizes":[...],"seed":S}
///   {"type":"mlp","layer_sizes":[...],"weights":[[..]],"biases":[[..]]}
inline std::unique_ptr<BlackBoxModel> load_model(const nlohmann::json& spec,
                                                 int height, int width,
                                                 int channels) {
  const std::string type = spec.at("type").get<std::string>();
  if (type == "shape_detector") {
    const double tau = spec.at("tau").get<double>();
    std::vector<int> pixels;
    if (spec.contains("pixels")) {
      pixels = spec.at("pixels").get<std::vector<int>>();
    } else if (spec.contains("rect")) {
      const auto& r = spec.at("rect");
      const int x0 = r.at("x").get<int>(), y0 = r.at("y").get<int>();
      const int rw = r.at("w").get<int>(), rh = r.at("h").get<int>();
      if (x0 < 0 || y0 < 0 || rw < 1 || rh < 1 || x0 + rw > width ||
          y0 + rh > height)
        throw InvalidInput("shape rect does not fit in the image");
      for (int y = y0; y < y0 + rh; ++y)
        for (int x = x0; x < x0 + rw; ++x) pixels.push_back(y * width + x);
    } else {
      throw InvalidInput("shape_detector spec needs 'pixels' or 'rect'");
    }
    for (int u : pixels)
      if (u < 0 || u >= height * width)
        throw InvalidInput("shape pixel index out of range for image");
    return std::make_unique<ShapeDetector>(std::move(pixels), tau);
  }
  if (type == "linear") {
    std::vector<double> coeffs;
    if (spec.contains("coefficients")) {
      coeffs = spec.at("coefficients").get<std::vector<double>>();
    } else if (spec.contains("coefficients_csv")) {
      const Image c =
          read_image_csv(spec.at("coefficients_csv").get<std::string>(), channels);
      coeffs = c.pixels;
    } else {
      throw InvalidInput("linear spec needs 'coefficients' or 'coefficients_csv'");
    }
    if (coeffs.size() != static_cast<std::size_t>(height) * width * channels)
      throw InvalidInput("linear coefficient count does not match image shape");
    return std::make_unique<LinearModel>(std::move(coeffs));
  }
  if (type == "mlp") {
    const auto sizes = spec.at("layer_sizes").get<std::vector<int>>();
    if (sizes.empty() ||
        sizes.front() != height * width * channels)
      throw InvalidInput("mlp input size does not match image shape");
    if (spec.contains("weights")) {
      return std::make_unique<SmallMlp>(
          sizes, spec.at("weights").get<std::vector<std::vector<double>>>(),
          spec.at("biases").get<std::vector<std::vector<double>>>());
    }
    return std::make_unique<SmallMlp>(
        SmallMlp::seeded(sizes, spec.value("seed", std::uint64_t{0})));
  }
  throw InvalidInput("unknown model type '" + type + "'");
}

inline std::unique_ptr<BlackBoxModel> load_model_file(const std::string& path,
                                                      int height, int width,
                                                      int channels) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open model spec: " + path);
  nlohmann::json spec;
  try {
    in >> spec;
  } catch (const std::exception& e) {
    throw InvalidInput("malformed model spec " + path + ": " + e.what());
  }
  return load_model(spec, height, width, channels);
}

}  // namespace limex
