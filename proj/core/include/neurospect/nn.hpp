#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

namespace neurospect::nn {

enum class Activation { none, relu };

/// Valid padding only.
struct Conv2D {
  std::size_t filters = 1;
  std::size_t kernel_h = 3;
  std::size_t kernel_w = 3;
  std::size_t stride = 1;
  Activation activation = Activation::relu;
};

struct MaxPool {
  std::size_t size = 2;
  std::size_t stride = 2;
};

struct Flatten {};

/// Appends the auxiliary (demographic) vector to a flat activation.
struct ConcatAux {
  std::size_t aux_len = 4;
};

struct Dense {
  std::size_t units = 1;
  Activation activation = Activation::none;
};

struct Softmax {};

using LayerSpec = std::variant<Conv2D, MaxPool, Flatten, ConcatAux, Dense, Softmax>;

std::string layer_name(const LayerSpec& layer);
nlohmann::json layer_to_json(const LayerSpec& layer);
LayerSpec layer_from_json(const nlohmann::json& j);

/// Activation shape: three dims (C, H, W) for feature maps, one for vectors.
using Shape = std::vector<std::size_t>;
std::size_t shape_size(const Shape& s);

struct Architecture {
  Shape input{6, 19, 19};
  std::vector<LayerSpec> layers;

  /// Conv2D(16, 3x3, relu) -> Conv2D(32, 3x3, relu) -> Flatten ->
  /// ConcatAux(aux_len) -> Dense(64, relu) -> Dense(n_classes) -> Softmax.
  static Architecture reference(std::size_t n_bands = 6, std::size_t n_channels = 19,
                                std::size_t aux_len = 4, std::size_t n_classes = 7);

  /// Output shape of every layer; throws ShapeError when shapes do not chain,
  /// a kernel exceeds the spatial dims, or Softmax is not the final layer.
  std::vector<Shape> shapes() const;
  void validate() const { (void)shapes(); }
  std::size_t aux_len() const;
  std::size_t n_classes() const;

  nlohmann::json to_json() const;
  static Architecture from_json(const nlohmann::json& j);
};

template <typename T>
struct Tensor {
  Shape shape;
  std::vector<T> values;

  std::size_t size() const { return values.size(); }
  /// product(shape) == values.size() and every value finite.
  void validate() const;
};

/// Weight layouts: Conv2D [filter][channel][kh][kw]; Dense [unit][input].
template <typename T>
struct LayerParams {
  std::vector<T> weight;
  std::vector<T> bias;
};

template <typename T>
using Gradients = std::vector<LayerParams<T>>;

template <typename T>
struct Sample {
  std::vector<T> input;  // product(arch.input) values, row-major (C, H, W)
  std::vector<T> aux;
  int target = 0;
};

template <typename T>
class Model {
 public:
  Model() = default;
  Model(Architecture arch, std::vector<LayerParams<T>> params);

  /// He-uniform weights (limit sqrt(6 / fan_in)) and zero biases.
  static Model init(Architecture arch, std::uint64_t seed);

  const Architecture& architecture() const { return arch_; }
  const std::vector<LayerParams<T>>& params() const { return params_; }
  std::vector<LayerParams<T>>& params() { return params_; }
  std::size_t param_count() const;

  /// Class probabilities.
  std::vector<T> predict(std::span<const T> input, std::span<const T> aux) const;

  template <typename U>
  Model<U> cast() const {
    std::vector<LayerParams<U>> out;
    out.reserve(params_.size());
    for (const auto& p : params_) {
      out.push_back({std::vector<U>(p.weight.begin(), p.weight.end()),
                     std::vector<U>(p.bias.begin(), p.bias.end())});
    }
    return Model<U>(arch_, std::move(out));
  }

 private:
  Architecture arch_;
  std::vector<LayerParams<T>> params_;
};

/// Zero gradients shaped like the model's parameters.
template <typename T>
Gradients<T> zero_gradients(const Model<T>& model);

template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& input, const Conv2D& layer, const LayerParams<T>& p);

template <typename T>
std::vector<T> dense_forward(std::span<const T> input, const Dense& layer,
                             const LayerParams<T>& p);

template <typename T>
std::vector<T> softmax(std::span<const T> logits);

template <typename T>
struct SoftmaxResult {
  T loss{};
  std::vector<T> probabilities;
  std::vector<T> gradient;  // d loss / d logits = p - onehot(target)
};

template <typename T>
SoftmaxResult<T> softmax_cross_entropy(std::span<const T> logits, int target);

template <typename T>
struct BackwardResult {
  T loss{};
  std::vector<T> probabilities;
  Gradients<T> grads;
  std::vector<T> aux_grad;
};

/// Reverse-mode gradients of the cross-entropy loss. Throws NumericError
/// naming the layer index when an intermediate value is not finite.
template <typename T>
BackwardResult<T> backward_pass(const Model<T>& model, const Sample<T>& sample);

/// Reusable buffers for repeated forward/backward passes on one thread.
template <typename T>
class Workspace {
 public:
  explicit Workspace(const Architecture& arch);

  /// Adds this sample's gradient to `acc` and returns its loss. `correct` is
  /// set when the argmax prediction equals the target.
  T accumulate(const Model<T>& model, const Sample<T>& sample, Gradients<T>& acc,
               bool* correct = nullptr);
  /// Forward only; returns the probabilities (valid until the next call).
  std::span<const T> forward(const Model<T>& model, std::span<const T> input,
                             std::span<const T> aux);
  /// Cross-entropy loss of one sample, computed from the logits.
  T loss(const Model<T>& model, const Sample<T>& sample);
  /// Probabilities of the most recent forward pass.
  std::span<const T> output() const { return act_.back(); }
  /// accumulate() that also reports probabilities and the aux-input gradient.
  T backward(const Model<T>& model, const Sample<T>& sample, Gradients<T>& acc,
             std::vector<T>* probabilities, std::vector<T>* aux_grad, bool* correct);

 private:
  std::vector<Shape> shapes_;
  std::vector<std::vector<T>> act_;   // output of each layer
  std::vector<std::vector<T>> grad_;  // d loss / d output of each layer
  std::vector<std::vector<std::size_t>> argmax_;

  void run_forward(const Model<T>& model, std::span<const T> input, std::span<const T> aux);
};

struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t t = 0;
  std::vector<std::vector<double>> m;  // flattened per layer: weights then bias
  std::vector<std::vector<double>> v;
};

/// One bias-corrected Adam update. Moments are kept in double for both
/// precisions. Throws ShapeError when shapes disagree and NumericError when
/// an updated parameter is not finite.
template <typename T>
void adam_step(std::vector<LayerParams<T>>& params, const Gradients<T>& grads, AdamState& state);

struct GradientCheckOptions {
  double h = 1e-6;
  std::size_t n_params = 200;
  std::uint64_t seed = 1;
  /// Lower bound on the relative-error denominator so parameters whose true
  /// gradient is ~0 are judged on absolute error.
  double floor = 1e-4;
};

struct GradientCheckResult {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::size_t worst_layer = 0;
  std::size_t worst_index = 0;
};

/// Optional replacement for the analytic gradient (used for fault injection).
using GradientFn = std::function<Gradients<double>(const Model<double>&, const Sample<double>&)>;

/// Compares analytic gradients to central differences
/// (L(theta + h) - L(theta - h)) / 2h on a random parameter subset.
/// Relative error is |a - n| / max(|a|, |n|, floor).
GradientCheckResult gradient_check(const Model<double>& model, const Sample<double>& sample,
                                   const GradientCheckOptions& opts = {},
                                   const GradientFn& analytic = {});

/// Loss only.
double sample_loss(const Model<double>& model, const Sample<double>& sample);

}  // namespace neurospect::nn
