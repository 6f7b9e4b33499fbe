#include "neurospect/nn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "neurospect/errors.hpp"

namespace neurospect::nn {
namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

std::string activation_name(Activation a) { return a == Activation::relu ? "relu" : "none"; }

Activation parse_activation(const std::string& s) {
  if (s == "relu") return Activation::relu;
  if (s == "none") return Activation::none;
  throw InvalidArgument("unknown activation '" + s + "'");
}

// Four independent partial sums combined in a fixed order.
template <typename T>
inline T dot(const T* a, const T* b, std::size_t n) {
  T s0{}, s1{}, s2{}, s3{};
  std::size_t k = 0;
  for (; k + 4 <= n; k += 4) {
    s0 += a[k] * b[k];
    s1 += a[k + 1] * b[k + 1];
    s2 += a[k + 2] * b[k + 2];
    s3 += a[k + 3] * b[k + 3];
  }
  for (; k < n; ++k) s0 += a[k] * b[k];
  return (s0 + s1) + (s2 + s3);
}

template <typename T>
inline T sum(const T* a, std::size_t n) {
  T s0{}, s1{}, s2{}, s3{};
  std::size_t k = 0;
  for (; k + 4 <= n; k += 4) {
    s0 += a[k];
    s1 += a[k + 1];
    s2 += a[k + 2];
    s3 += a[k + 3];
  }
  for (; k < n; ++k) s0 += a[k];
  return (s0 + s1) + (s2 + s3);
}

template <typename T>
void check_finite(std::span<const T> v, std::size_t layer, const char* what) {
  for (T x : v) {
    if (!std::isfinite(x)) {
      throw NumericError("non-finite " + std::string(what) + " at layer " + std::to_string(layer));
    }
  }
}

std::size_t conv_out(std::size_t in, std::size_t k, std::size_t stride) {
  return (in - k) / stride + 1;
}

template <typename T>
void conv_forward_raw(const T* in, std::size_t C, std::size_t H, std::size_t W, const Conv2D& L,
                      const T* w, const T* b, T* out) {
  const std::size_t OH = conv_out(H, L.kernel_h, L.stride);
  const std::size_t OW = conv_out(W, L.kernel_w, L.stride);
  const std::size_t s = L.stride;
  for (std::size_t f = 0; f < L.filters; ++f) {
    T* o = out + f * OH * OW;
    std::fill(o, o + OH * OW, b[f]);
    for (std::size_t c = 0; c < C; ++c) {
      for (std::size_t i = 0; i < L.kernel_h; ++i) {
        for (std::size_t j = 0; j < L.kernel_w; ++j) {
          const T wv = w[((f * C + c) * L.kernel_h + i) * L.kernel_w + j];
          for (std::size_t y = 0; y < OH; ++y) {
            const T* src = in + (c * H + y * s + i) * W + j;
            T* dst = o + y * OW;
            if (s == 1) {
              for (std::size_t x = 0; x < OW; ++x) dst[x] += wv * src[x];
            } else {
              for (std::size_t x = 0; x < OW; ++x) dst[x] += wv * src[x * s];
            }
          }
        }
      }
    }
    if (L.activation == Activation::relu) {
      for (std::size_t k = 0; k < OH * OW; ++k) o[k] = o[k] > T(0) ? o[k] : T(0);
    }
  }
}

// g: d loss / d pre-activation output (already masked). din may be null.
template <typename T>
void conv_backward_raw(const T* in, std::size_t C, std::size_t H, std::size_t W, const Conv2D& L,
                       const T* w, const T* g, T* dw, T* db, T* din) {
  const std::size_t OH = conv_out(H, L.kernel_h, L.stride);
  const std::size_t OW = conv_out(W, L.kernel_w, L.stride);
  const std::size_t s = L.stride;
  if (din) std::fill(din, din + C * H * W, T(0));
  for (std::size_t f = 0; f < L.filters; ++f) {
    const T* gf = g + f * OH * OW;
    db[f] += sum(gf, OH * OW);
    for (std::size_t c = 0; c < C; ++c) {
      for (std::size_t i = 0; i < L.kernel_h; ++i) {
        for (std::size_t j = 0; j < L.kernel_w; ++j) {
          const std::size_t widx = ((f * C + c) * L.kernel_h + i) * L.kernel_w + j;
          const T wv = w[widx];
          T acc{};
          for (std::size_t y = 0; y < OH; ++y) {
            const T* grow = gf + y * OW;
            const std::size_t base = (c * H + y * s + i) * W + j;
            if (s == 1) {
              acc += dot(grow, in + base, OW);
              if (din) {
                T* drow = din + base;
                for (std::size_t x = 0; x < OW; ++x) drow[x] += wv * grow[x];
              }
            } else {
              for (std::size_t x = 0; x < OW; ++x) {
                acc += grow[x] * in[base + x * s];
                if (din) din[base + x * s] += wv * grow[x];
              }
            }
          }
          dw[widx] += acc;
        }
      }
    }
  }
}

template <typename T>
void dense_forward_raw(const T* in, std::size_t n_in, const Dense& L, const T* w, const T* b,
                       T* out) {
  for (std::size_t u = 0; u < L.units; ++u) {
    T v = b[u] + dot(w + u * n_in, in, n_in);
    if (L.activation == Activation::relu && v < T(0)) v = T(0);
    out[u] = v;
  }
}

template <typename T>
void dense_backward_raw(const T* in, std::size_t n_in, const Dense& L, const T* w, const T* g,
                        T* dw, T* db, T* din) {
  if (din) std::fill(din, din + n_in, T(0));
  for (std::size_t u = 0; u < L.units; ++u) {
    const T gu = g[u];
    db[u] += gu;
    if (gu == T(0)) continue;
    T* dwu = dw + u * n_in;
    for (std::size_t k = 0; k < n_in; ++k) dwu[k] += gu * in[k];
    if (din) {
      const T* wu = w + u * n_in;
      for (std::size_t k = 0; k < n_in; ++k) din[k] += gu * wu[k];
    }
  }
}

std::pair<std::size_t, std::size_t> param_sizes(const LayerSpec& layer, const Shape& in) {
  return std::visit(
      overloaded{
          [&](const Conv2D& c) -> std::pair<std::size_t, std::size_t> {
            return {c.filters * in[0] * c.kernel_h * c.kernel_w, c.filters};
          },
          [&](const Dense& d) -> std::pair<std::size_t, std::size_t> {
            return {d.units * in[0], d.units};
          },
          [](const auto&) -> std::pair<std::size_t, std::size_t> { return {0, 0}; }},
      layer);
}

std::size_t fan_in(const LayerSpec& layer, const Shape& in) {
  return std::visit(overloaded{[&](const Conv2D& c) { return in[0] * c.kernel_h * c.kernel_w; },
                               [&](const Dense&) { return in[0]; },
                               [](const auto&) { return std::size_t{0}; }},
                    layer);
}

}  // namespace

std::string layer_name(const LayerSpec& layer) {
  return std::visit(overloaded{[](const Conv2D&) { return std::string("conv2d"); },
                               [](const MaxPool&) { return std::string("maxpool"); },
                               [](const Flatten&) { return std::string("flatten"); },
                               [](const ConcatAux&) { return std::string("concat_aux"); },
                               [](const Dense&) { return std::string("dense"); },
                               [](const Softmax&) { return std::string("softmax"); }},
                    layer);
}

std::size_t shape_size(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
}

Architecture Architecture::reference(std::size_t n_bands, std::size_t n_channels,
                                     std::size_t aux_len, std::size_t n_classes) {
  Architecture a;
  a.input = {n_bands, n_channels, n_channels};
  a.layers = {Conv2D{16, 3, 3, 1, Activation::relu},
              Conv2D{32, 3, 3, 1, Activation::relu},
              Flatten{},
              ConcatAux{aux_len},
              Dense{64, Activation::relu},
              Dense{n_classes, Activation::none},
              Softmax{}};
  return a;
}

std::vector<Shape> Architecture::shapes() const {
  if (input.empty() || shape_size(input) == 0) throw ShapeError("empty input shape");
  if (input.size() != 1 && input.size() != 3) throw ShapeError("input must have 1 or 3 dims");
  if (layers.size() < 2) throw ShapeError("architecture needs at least one layer before softmax");
  std::vector<Shape> out;
  Shape cur = input;
  std::size_t concat_count = 0;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const std::string where = "layer " + std::to_string(l) + " (" + layer_name(layers[l]) + ")";
    auto need3 = [&] {
      if (cur.size() != 3) throw ShapeError(where + " expects a (C, H, W) input");
    };
    auto need1 = [&] {
      if (cur.size() != 1) throw ShapeError(where + " expects a flat input");
    };
    std::visit(overloaded{
                   [&](const Conv2D& c) {
                     need3();
                     if (c.filters == 0 || c.kernel_h == 0 || c.kernel_w == 0 || c.stride == 0) {
                       throw ShapeError(where + " has a zero size");
                     }
                     if (c.kernel_h > cur[1] || c.kernel_w > cur[2]) {
                       throw ShapeError(where + " kernel exceeds spatial dims");
                     }
                     cur = {c.filters, conv_out(cur[1], c.kernel_h, c.stride),
                            conv_out(cur[2], c.kernel_w, c.stride)};
                   },
                   [&](const MaxPool& p) {
                     need3();
                     if (p.size == 0 || p.stride == 0) throw ShapeError(where + " has a zero size");
                     if (p.size > cur[1] || p.size > cur[2]) {
                       throw ShapeError(where + " window exceeds spatial dims");
                     }
                     cur = {cur[0], conv_out(cur[1], p.size, p.stride),
                            conv_out(cur[2], p.size, p.stride)};
                   },
                   [&](const Flatten&) {
                     need3();
                     cur = {shape_size(cur)};
                   },
                   [&](const ConcatAux& c) {
                     need1();
                     if (++concat_count > 1) throw ShapeError("at most one concat_aux layer");
                     cur = {cur[0] + c.aux_len};
                   },
                   [&](const Dense& d) {
                     need1();
                     if (d.units == 0) throw ShapeError(where + " has zero units");
                     cur = {d.units};
                   },
                   [&](const Softmax&) {
                     need1();
                     if (l + 1 != layers.size()) throw ShapeError("softmax must be the final layer");
                     if (cur[0] < 2) throw ShapeError("softmax needs at least 2 classes");
                   }},
               layers[l]);
    out.push_back(cur);
  }
  if (!std::holds_alternative<Softmax>(layers.back())) {
    throw ShapeError("softmax must be the final layer");
  }
  return out;
}

std::size_t Architecture::aux_len() const {
  for (const auto& l : layers) {
    if (const auto* c = std::get_if<ConcatAux>(&l)) return c->aux_len;
  }
  return 0;
}

std::size_t Architecture::n_classes() const { return shapes().back()[0]; }

nlohmann::json layer_to_json(const LayerSpec& layer) {
  nlohmann::json j = {{"type", layer_name(layer)}};
  std::visit(overloaded{[&](const Conv2D& c) {
                          j["filters"] = c.filters;
                          j["kernel"] = {c.kernel_h, c.kernel_w};
                          j["stride"] = c.stride;
                          j["activation"] = activation_name(c.activation);
                        },
                        [&](const MaxPool& p) {
                          j["size"] = p.size;
                          j["stride"] = p.stride;
                        },
                        [&](const ConcatAux& c) { j["aux_len"] = c.aux_len; },
                        [&](const Dense& d) {
                          j["units"] = d.units;
                          j["activation"] = activation_name(d.activation);
                        },
                        [](const auto&) {}},
             layer);
  return j;
}

LayerSpec layer_from_json(const nlohmann::json& l) {
  const auto type = l.at("type").get<std::string>();
  if (type == "conv2d") {
    const auto k = l.at("kernel");
    return Conv2D{l.at("filters").get<std::size_t>(), k.at(0).get<std::size_t>(),
                  k.at(1).get<std::size_t>(), l.value("stride", std::size_t{1}),
                  parse_activation(l.value("activation", std::string("relu")))};
  }
  if (type == "maxpool") {
    return MaxPool{l.value("size", std::size_t{2}), l.value("stride", std::size_t{2})};
  }
  if (type == "flatten") return Flatten{};
  if (type == "concat_aux") return ConcatAux{l.at("aux_len").get<std::size_t>()};
  if (type == "dense") {
    return Dense{l.at("units").get<std::size_t>(),
                 parse_activation(l.value("activation", std::string("none")))};
  }
  if (type == "softmax") return Softmax{};
  throw InvalidArgument("unknown layer type '" + type + "'");
}

nlohmann::json Architecture::to_json() const {
  nlohmann::json lj = nlohmann::json::array();
  for (const auto& layer : layers) lj.push_back(layer_to_json(layer));
  return {{"input", input}, {"layers", lj}};
}

Architecture Architecture::from_json(const nlohmann::json& j) {
  Architecture a;
  a.input = j.at("input").get<Shape>();
  for (const auto& l : j.at("layers")) a.layers.push_back(layer_from_json(l));
  a.validate();
  return a;
}

template <typename T>
void Tensor<T>::validate() const {
  if (shape_size(shape) != values.size()) throw ShapeError("tensor shape does not match values");
  for (T v : values) {
    if (!std::isfinite(v)) throw NumericError("tensor contains a non-finite value");
  }
}

template <typename T>
Model<T>::Model(Architecture arch, std::vector<LayerParams<T>> params)
    : arch_(std::move(arch)), params_(std::move(params)) {
  const auto shapes = arch_.shapes();
  if (params_.size() != arch_.layers.size()) {
    throw ShapeError("parameter list does not match layer count");
  }
  for (std::size_t l = 0; l < arch_.layers.size(); ++l) {
    const Shape& in = l == 0 ? arch_.input : shapes[l - 1];
    const auto [nw, nb] = param_sizes(arch_.layers[l], in);
    if (params_[l].weight.size() != nw || params_[l].bias.size() != nb) {
      throw ShapeError("parameters of layer " + std::to_string(l) + " have the wrong shape");
    }
  }
}

template <typename T>
Model<T> Model<T>::init(Architecture arch, std::uint64_t seed) {
  const auto shapes = arch.shapes();
  std::mt19937_64 rng(seed);
  std::vector<LayerParams<T>> params(arch.layers.size());
  for (std::size_t l = 0; l < arch.layers.size(); ++l) {
    const Shape& in = l == 0 ? arch.input : shapes[l - 1];
    const auto [nw, nb] = param_sizes(arch.layers[l], in);
    if (nw == 0) continue;
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in(arch.layers[l], in)));
    std::uniform_real_distribution<double> dist(-limit, limit);
    params[l].weight.resize(nw);
    for (auto& w : params[l].weight) w = static_cast<T>(dist(rng));
    params[l].bias.assign(nb, T(0));
  }
  return Model(std::move(arch), std::move(params));
}

template <typename T>
std::size_t Model<T>::param_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.weight.size() + p.bias.size();
  return n;
}

template <typename T>
std::vector<T> Model<T>::predict(std::span<const T> input, std::span<const T> aux) const {
  Workspace<T> ws(arch_);
  const auto p = ws.forward(*this, input, aux);
  return {p.begin(), p.end()};
}

template <typename T>
Gradients<T> zero_gradients(const Model<T>& model) {
  Gradients<T> g;
  g.reserve(model.params().size());
  for (const auto& p : model.params()) {
    g.push_back({std::vector<T>(p.weight.size(), T(0)), std::vector<T>(p.bias.size(), T(0))});
  }
  return g;
}

template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& input, const Conv2D& layer, const LayerParams<T>& p) {
  if (input.shape.size() != 3) throw ShapeError("conv2d input must be (C, H, W)");
  if (shape_size(input.shape) != input.values.size()) {
    throw ShapeError("tensor shape does not match values");
  }
  const std::size_t C = input.shape[0], H = input.shape[1], W = input.shape[2];
  if (layer.filters == 0 || layer.stride == 0 || layer.kernel_h == 0 || layer.kernel_w == 0) {
    throw ShapeError("conv2d has a zero size");
  }
  if (layer.kernel_h > H || layer.kernel_w > W) throw ShapeError("kernel exceeds spatial dims");
  if (p.weight.size() != layer.filters * C * layer.kernel_h * layer.kernel_w ||
      p.bias.size() != layer.filters) {
    throw ShapeError("conv2d parameters do not match the layer and input");
  }
  Tensor<T> out;
  out.shape = {layer.filters, conv_out(H, layer.kernel_h, layer.stride),
               conv_out(W, layer.kernel_w, layer.stride)};
  out.values.resize(shape_size(out.shape));
  conv_forward_raw(input.values.data(), C, H, W, layer, p.weight.data(), p.bias.data(),
                   out.values.data());
  return out;
}

template <typename T>
std::vector<T> dense_forward(std::span<const T> input, const Dense& layer,
                             const LayerParams<T>& p) {
  if (p.bias.size() != layer.units || p.weight.size() != layer.units * input.size()) {
    throw ShapeError("dense parameters do not match the layer and input width");
  }
  std::vector<T> out(layer.units);
  dense_forward_raw(input.data(), input.size(), layer, p.weight.data(), p.bias.data(), out.data());
  return out;
}

template <typename T>
std::vector<T> softmax(std::span<const T> logits) {
  if (logits.empty()) throw InvalidArgument("softmax of an empty vector");
  const T m = *std::max_element(logits.begin(), logits.end());
  std::vector<T> p(logits.size());
  T s{};
  for (std::size_t k = 0; k < logits.size(); ++k) {
    p[k] = std::exp(logits[k] - m);
    s += p[k];
  }
  for (auto& v : p) v /= s;
  return p;
}

template <typename T>
SoftmaxResult<T> softmax_cross_entropy(std::span<const T> logits, int target) {
  if (logits.size() < 2) throw InvalidArgument("cross-entropy needs at least 2 classes");
  if (target < 0 || static_cast<std::size_t>(target) >= logits.size()) {
    throw InvalidArgument("target class " + std::to_string(target) + " out of range");
  }
  const T m = *std::max_element(logits.begin(), logits.end());
  SoftmaxResult<T> r;
  r.probabilities.resize(logits.size());
  T s{};
  for (std::size_t k = 0; k < logits.size(); ++k) {
    r.probabilities[k] = std::exp(logits[k] - m);
    s += r.probabilities[k];
  }
  for (auto& v : r.probabilities) v /= s;
  r.loss = std::log(s) - (logits[static_cast<std::size_t>(target)] - m);
  r.gradient = r.probabilities;
  r.gradient[static_cast<std::size_t>(target)] -= T(1);
  return r;
}

template <typename T>
Workspace<T>::Workspace(const Architecture& arch) : shapes_(arch.shapes()) {
  act_.resize(shapes_.size());
  grad_.resize(shapes_.size());
  argmax_.resize(shapes_.size());
  for (std::size_t l = 0; l < shapes_.size(); ++l) {
    act_[l].resize(shape_size(shapes_[l]));
    grad_[l].resize(shape_size(shapes_[l]));
    if (std::holds_alternative<MaxPool>(arch.layers[l])) argmax_[l].resize(act_[l].size());
  }
}

template <typename T>
void Workspace<T>::run_forward(const Model<T>& model, std::span<const T> input,
                               std::span<const T> aux) {
  const auto& arch = model.architecture();
  if (input.size() != shape_size(arch.input)) {
    throw ShapeError("input has " + std::to_string(input.size()) + " values; expected " +
                     std::to_string(shape_size(arch.input)));
  }
  if (aux.size() != arch.aux_len()) {
    throw ShapeError("aux input has " + std::to_string(aux.size()) + " values; expected " +
                     std::to_string(arch.aux_len()));
  }
  check_finite(input, 0, "input");
  check_finite(aux, 0, "aux input");
  for (std::size_t l = 0; l < arch.layers.size(); ++l) {
    const Shape& in_shape = l == 0 ? arch.input : shapes_[l - 1];
    const T* in = l == 0 ? input.data() : act_[l - 1].data();
    const std::size_t n_in = shape_size(in_shape);
    T* out = act_[l].data();
    const auto& p = model.params()[l];
    std::visit(overloaded{
                   [&](const Conv2D& c) {
                     conv_forward_raw(in, in_shape[0], in_shape[1], in_shape[2], c,
                                      p.weight.data(), p.bias.data(), out);
                   },
                   [&](const MaxPool& mp) {
                     const std::size_t C = in_shape[0], H = in_shape[1], W = in_shape[2];
                     const std::size_t OH = shapes_[l][1], OW = shapes_[l][2];
                     for (std::size_t c = 0; c < C; ++c) {
                       for (std::size_t y = 0; y < OH; ++y) {
                         for (std::size_t x = 0; x < OW; ++x) {
                           std::size_t best = (c * H + y * mp.stride) * W + x * mp.stride;
                           for (std::size_t i = 0; i < mp.size; ++i) {
                             for (std::size_t j = 0; j < mp.size; ++j) {
                               const std::size_t idx =
                                   (c * H + y * mp.stride + i) * W + x * mp.stride + j;
                               if (in[idx] > in[best]) best = idx;
                             }
                           }
                           const std::size_t o = (c * OH + y) * OW + x;
                           out[o] = in[best];
                           argmax_[l][o] = best;
                         }
                       }
                     }
                   },
                   [&](const Flatten&) { std::copy(in, in + n_in, out); },
                   [&](const ConcatAux&) {
                     std::copy(in, in + n_in, out);
                     std::copy(aux.begin(), aux.end(), out + n_in);
                   },
                   [&](const Dense& d) {
                     dense_forward_raw(in, n_in, d, p.weight.data(), p.bias.data(), out);
                   },
                   [&](const Softmax&) {
                     const auto probs = softmax(std::span<const T>(in, n_in));
                     std::copy(probs.begin(), probs.end(), out);
                   }},
               arch.layers[l]);
    check_finite(std::span<const T>(act_[l]), l, "activation");
  }
}

template <typename T>
std::span<const T> Workspace<T>::forward(const Model<T>& model, std::span<const T> input,
                                         std::span<const T> aux) {
  run_forward(model, input, aux);
  return act_.back();
}

template <typename T>
T Workspace<T>::loss(const Model<T>& model, const Sample<T>& sample) {
  run_forward(model, sample.input, sample.aux);
  const auto& logits = act_[act_.size() - 2];
  return softmax_cross_entropy(std::span<const T>(logits), sample.target).loss;
}

template <typename T>
T Workspace<T>::accumulate(const Model<T>& model, const Sample<T>& sample, Gradients<T>& acc,
                           bool* correct) {
  return backward(model, sample, acc, nullptr, nullptr, correct);
}

template <typename T>
T Workspace<T>::backward(const Model<T>& model, const Sample<T>& sample, Gradients<T>& acc,
                         std::vector<T>* probabilities, std::vector<T>* aux_grad, bool* correct) {
  const auto& arch = model.architecture();
  if (acc.size() != model.params().size()) throw ShapeError("gradient buffer does not match model");
  run_forward(model, sample.input, sample.aux);
  const std::size_t L = arch.layers.size();
  const auto& logits = act_[L - 2];
  const auto sm = softmax_cross_entropy(std::span<const T>(logits), sample.target);
  if (!std::isfinite(sm.loss)) throw NumericError("non-finite loss at layer " + std::to_string(L - 1));
  if (probabilities) *probabilities = sm.probabilities;
  if (correct) {
    const auto best = std::max_element(sm.probabilities.begin(), sm.probabilities.end()) -
                      sm.probabilities.begin();
    *correct = best == sample.target;
  }
  std::copy(sm.gradient.begin(), sm.gradient.end(), grad_[L - 2].begin());

  for (std::size_t l = L - 1; l-- > 0;) {
    const Shape& in_shape = l == 0 ? arch.input : shapes_[l - 1];
    const T* in = l == 0 ? sample.input.data() : act_[l - 1].data();
    const std::size_t n_in = shape_size(in_shape);
    T* g = grad_[l].data();
    T* din = l == 0 ? nullptr : grad_[l - 1].data();
    const auto& p = model.params()[l];
    auto& gp = acc[l];
    std::visit(overloaded{
                   [&](const Conv2D& c) {
                     if (c.activation == Activation::relu) {
                       const T* out = act_[l].data();
                       for (std::size_t k = 0; k < act_[l].size(); ++k) {
                         if (!(out[k] > T(0))) g[k] = T(0);
                       }
                     }
                     conv_backward_raw(in, in_shape[0], in_shape[1], in_shape[2], c,
                                       p.weight.data(), g, gp.weight.data(), gp.bias.data(), din);
                   },
                   [&](const MaxPool&) {
                     if (!din) return;
                     std::fill(din, din + n_in, T(0));
                     for (std::size_t o = 0; o < act_[l].size(); ++o) din[argmax_[l][o]] += g[o];
                   },
                   [&](const Flatten&) {
                     if (din) std::copy(g, g + n_in, din);
                   },
                   [&](const ConcatAux&) {
                     if (din) std::copy(g, g + n_in, din);
                     if (aux_grad) aux_grad->assign(g + n_in, g + act_[l].size());
                   },
                   [&](const Dense& d) {
                     if (d.activation == Activation::relu) {
                       const T* out = act_[l].data();
                       for (std::size_t k = 0; k < d.units; ++k) {
                         if (!(out[k] > T(0))) g[k] = T(0);
                       }
                     }
                     dense_backward_raw(in, n_in, d, p.weight.data(), g, gp.weight.data(),
                                        gp.bias.data(), din);
                   },
                   [](const Softmax&) {}},
               arch.layers[l]);
    if (din) check_finite(std::span<const T>(din, n_in), l, "gradient");
  }
  return sm.loss;
}

template <typename T>
BackwardResult<T> backward_pass(const Model<T>& model, const Sample<T>& sample) {
  Workspace<T> ws(model.architecture());
  BackwardResult<T> r;
  r.grads = zero_gradients(model);
  r.loss = ws.backward(model, sample, r.grads, &r.probabilities, &r.aux_grad, nullptr);
  for (std::size_t l = 0; l < r.grads.size(); ++l) {
    check_finite(std::span<const T>(r.grads[l].weight), l, "weight gradient");
    check_finite(std::span<const T>(r.grads[l].bias), l, "bias gradient");
  }
  return r;
}

template <typename T>
void adam_step(std::vector<LayerParams<T>>& params, const Gradients<T>& grads, AdamState& state) {
  if (grads.size() != params.size()) throw ShapeError("gradients do not match parameters");
  for (std::size_t l = 0; l < params.size(); ++l) {
    if (grads[l].weight.size() != params[l].weight.size() ||
        grads[l].bias.size() != params[l].bias.size()) {
      throw ShapeError("gradient shape mismatch at layer " + std::to_string(l));
    }
  }
  if (state.m.empty()) {
    state.m.resize(params.size());
    state.v.resize(params.size());
    for (std::size_t l = 0; l < params.size(); ++l) {
      const std::size_t n = params[l].weight.size() + params[l].bias.size();
      state.m[l].assign(n, 0.0);
      state.v[l].assign(n, 0.0);
    }
  }
  if (state.m.size() != params.size()) throw ShapeError("optimizer state does not match parameters");
  ++state.t;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
  for (std::size_t l = 0; l < params.size(); ++l) {
    auto& m = state.m[l];
    auto& v = state.v[l];
    const std::size_t nw = params[l].weight.size();
    if (m.size() != nw + params[l].bias.size()) {
      throw ShapeError("optimizer state shape mismatch at layer " + std::to_string(l));
    }
    auto update = [&](T& theta, T grad, std::size_t k) {
      const double g = static_cast<double>(grad);
      m[k] = state.beta1 * m[k] + (1.0 - state.beta1) * g;
      v[k] = state.beta2 * v[k] + (1.0 - state.beta2) * g * g;
      const double mhat = m[k] / bc1;
      const double vhat = v[k] / bc2;
      const double next = static_cast<double>(theta) - state.lr * mhat / (std::sqrt(vhat) + state.eps);
      if (!std::isfinite(next)) {
        throw NumericError("non-finite parameter after update at layer " + std::to_string(l));
      }
      theta = static_cast<T>(next);
    };
    for (std::size_t k = 0; k < nw; ++k) update(params[l].weight[k], grads[l].weight[k], k);
    for (std::size_t k = 0; k < params[l].bias.size(); ++k) {
      update(params[l].bias[k], grads[l].bias[k], nw + k);
    }
  }
}

double sample_loss(const Model<double>& model, const Sample<double>& sample) {
  Workspace<double> ws(model.architecture());
  return ws.loss(model, sample);
}

GradientCheckResult gradient_check(const Model<double>& model, const Sample<double>& sample,
                                   const GradientCheckOptions& opts, const GradientFn& analytic) {
  if (!(opts.h > 0.0)) throw InvalidArgument("finite-difference step must be positive");
  const auto grads = analytic ? analytic(model, sample) : backward_pass(model, sample).grads;
  if (grads.size() != model.params().size()) throw ShapeError("gradients do not match model");

  // Flat index over every layer's weights then biases.
  std::vector<std::size_t> offsets{0};
  for (const auto& p : model.params()) offsets.push_back(offsets.back() + p.weight.size() + p.bias.size());
  const std::size_t total = offsets.back();
  std::vector<std::size_t> all(total);
  std::iota(all.begin(), all.end(), std::size_t{0});
  std::vector<std::size_t> chosen;
  std::mt19937_64 rng(opts.seed);
  std::sample(all.begin(), all.end(), std::back_inserter(chosen), std::min(opts.n_params, total),
              rng);

  Model<double> work = model;
  Workspace<double> ws(model.architecture());
  GradientCheckResult result;
  for (std::size_t flat : chosen) {
    const std::size_t l = static_cast<std::size_t>(
        std::upper_bound(offsets.begin(), offsets.end(), flat) - offsets.begin() - 1);
    const std::size_t k = flat - offsets[l];
    auto& p = work.params()[l];
    const bool is_bias = k >= p.weight.size();
    double& theta = is_bias ? p.bias[k - p.weight.size()] : p.weight[k];
    const double a = is_bias ? grads[l].bias[k - p.weight.size()] : grads[l].weight[k];
    const double orig = theta;
    theta = orig + opts.h;
    const double lp = ws.loss(work, sample);
    theta = orig - opts.h;
    const double lm = ws.loss(work, sample);
    theta = orig;
    if (!std::isfinite(lp) || !std::isfinite(lm)) throw NumericError("non-finite loss in gradient check");
    const double n = (lp - lm) / (2.0 * opts.h);
    const double rel = std::abs(a - n) / std::max({std::abs(a), std::abs(n), opts.floor});
    if (rel > result.max_rel_error || result.checked == 0) {
      result.max_rel_error = std::max(result.max_rel_error, rel);
      result.worst_layer = l;
      result.worst_index = k;
    }
    ++result.checked;
  }
  return result;
}

#define NEUROSPECT_NN_INSTANTIATE(T)                                                        \
  template struct Tensor<T>;                                                                \
  template class Model<T>;                                                                  \
  template class Workspace<T>;                                                              \
  template Gradients<T> zero_gradients<T>(const Model<T>&);                                 \
  template Tensor<T> conv2d_forward<T>(const Tensor<T>&, const Conv2D&, const LayerParams<T>&); \
  template std::vector<T> dense_forward<T>(std::span<const T>, const Dense&,                \
                                           const LayerParams<T>&);                          \
  template std::vector<T> softmax<T>(std::span<const T>);                                   \
  template SoftmaxResult<T> softmax_cross_entropy<T>(std::span<const T>, int);              \
  template BackwardResult<T> backward_pass<T>(const Model<T>&, const Sample<T>&);           \
  template void adam_step<T>(std::vector<LayerParams<T>>&, const Gradients<T>&, AdamState&);

NEUROSPECT_NN_INSTANTIATE(float)
NEUROSPECT_NN_INSTANTIATE(double)

}  // namespace neurospect::nn
