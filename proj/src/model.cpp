#include "robust1d/model.hpp"

#include <algorithm>
#include <cmath>

#include "robust1d/errors.hpp"
#include "robust1d/ops.hpp"

namespace robust1d {

namespace {

Tensor gaussian(Shape shape, double stddev, Rng& rng) {
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = stddev * rng.normal();
  return t;
}

Var batched(Var input, const Shape& sample_shape) {
  const Shape& s = input.shape();
  if (s == sample_shape) {
    Shape b{1};
    b.insert(b.end(), s.begin(), s.end());
    return ops::reshape(input, b);
  }
  if (s.size() == sample_shape.size() + 1 && std::equal(sample_shape.begin(), sample_shape.end(), s.begin() + 1)) {
    return input;
  }
  throw ShapeError("model input " + shape_string(s) + " does not match sample shape " + shape_string(sample_shape));
}

}  // namespace

std::vector<Tensor*> Classifier::parameter_list() {
  std::vector<Tensor*> out;
  for (auto& [name, t] : params_) out.push_back(&t);
  return out;
}

Var Classifier::bind(Tape& tape, const std::string& name, const ForwardOptions& options,
                     std::vector<std::pair<std::string, Var>>& bound) const {
  if (options.overrides) {
    if (auto it = options.overrides->find(name); it != options.overrides->end()) return it->second;
  }
  const Tensor& t = params_.at(name);
  if (!options.parameter_grads) return tape.constant_ref(t);
  const Var v = tape.parameter(t);
  bound.emplace_back(name, v);
  return v;
}

void Classifier::accumulate_gradients(const Tape& tape, const ForwardResult& result) {
  for (const auto& [name, var] : result.bound) {
    Tensor& p = params_.at(name);
    auto acc = p.ensure_grad();
    auto g = tape.grad(var);
    for (std::size_t i = 0; i < g.size(); ++i) acc[i] += g[i];
  }
}

void Classifier::zero_gradients() {
  for (auto& [name, t] : params_) t.zero_grad();
}

void Classifier::load_parameters(const ParameterMap& loaded) {
  for (const auto& [name, t] : params_) {
    auto it = loaded.find(name);
    if (it == loaded.end()) throw FormatError("checkpoint is missing parameter '" + name + "'");
    if (it->second.shape() != t.shape()) {
      throw FormatError("checkpoint parameter '" + name + "' has shape " + shape_string(it->second.shape()) +
                        ", model expects " + shape_string(t.shape()));
    }
  }
  for (auto& [name, t] : params_) t = loaded.at(name);
}

CharCnnConfig CharCnnConfig::full(std::size_t num_classes) {
  CharCnnConfig c;
  c.length = 1014;
  c.convs = {{256, 7, 3}, {256, 7, 3}, {256, 3, 0}, {256, 3, 0}, {256, 3, 0}, {256, 3, 3}};
  c.hidden = {1024, 1024};
  c.num_classes = num_classes;
  c.dropout = 0.5;
  return c;
}

CharCnnConfig CharCnnConfig::tiny(std::size_t num_classes) {
  CharCnnConfig c;
  c.length = 128;
  c.convs = {{64, 5, 2}, {64, 3, 2}};
  c.hidden = {128};
  c.num_classes = num_classes;
  c.dropout = 0.0;
  return c;
}

std::size_t CharCnnConfig::final_length() const {
  std::size_t len = length;
  for (std::size_t i = 0; i < convs.size(); ++i) {
    if (len < convs[i].kernel) {
      throw ShapeError("conv stage " + std::to_string(i) + " kernel " + std::to_string(convs[i].kernel) +
                       " exceeds signal length " + std::to_string(len));
    }
    len = len - convs[i].kernel + 1;
    if (convs[i].pool) {
      if (len < convs[i].pool) throw ShapeError("pool stage " + std::to_string(i) + " exceeds signal length");
      len = (len - convs[i].pool) / convs[i].pool + 1;
    }
  }
  return len;
}

void CharCnnConfig::validate() const {
  if (convs.empty()) throw ContractViolation("char-cnn: at least one conv stage required");
  if (hidden.empty() || hidden.back() == 0) throw ContractViolation("char-cnn: feature dimension must be positive");
  if (num_classes < 2) throw ContractViolation("char-cnn: need at least two classes");
  if (dropout < 0.0 || dropout >= 1.0) throw ContractViolation("char-cnn: dropout must be in [0, 1)");
  if (final_length() == 0) throw ShapeError("char-cnn: flatten length is zero");
}

CharCnnModel::CharCnnModel(CharCnnConfig config, std::uint64_t seed) : config_(std::move(config)) {
  config_.validate();
  Rng rng(seed);
  std::size_t in = config_.alphabet_size;
  for (std::size_t i = 0; i < config_.convs.size(); ++i) {
    const ConvSpec& c = config_.convs[i];
    const double fan_in = static_cast<double>(in * c.kernel);
    const std::string p = "conv" + std::to_string(i);
    params_[p + ".weight"] = gaussian({c.out_channels, in, c.kernel}, std::sqrt(2.0 / fan_in), rng);
    params_[p + ".bias"] = Tensor({c.out_channels});
    in = c.out_channels;
  }
  std::size_t width = config_.flatten_size();
  for (std::size_t i = 0; i < config_.hidden.size(); ++i) {
    const std::string p = "fc" + std::to_string(i);
    params_[p + ".weight"] = gaussian({config_.hidden[i], width}, std::sqrt(2.0 / static_cast<double>(width)), rng);
    params_[p + ".bias"] = Tensor({config_.hidden[i]});
    width = config_.hidden[i];
  }
  params_["out.weight"] =
      gaussian({config_.num_classes, width}, std::sqrt(1.0 / static_cast<double>(width)), rng);
  if (config_.output_bias) params_["out.bias"] = Tensor({config_.num_classes});
}

ForwardResult CharCnnModel::forward(Tape& tape, Var input, const ForwardOptions& options) const {
  if (options.training && config_.dropout > 0.0 && options.rng == nullptr) {
    throw ContractViolation("char-cnn: training-mode dropout needs an rng");
  }
  ForwardResult r;
  Var x = batched(input, input_shape());
  const std::size_t batch = x.shape()[0];
  x = ops::transpose(x);  // [B, alphabet, L]
  for (std::size_t i = 0; i < config_.convs.size(); ++i) {
    const std::string p = "conv" + std::to_string(i);
    x = ops::conv1d(x, bind(tape, p + ".weight", options, r.bound), 1);
    x = ops::relu(ops::add_channel_bias(x, bind(tape, p + ".bias", options, r.bound)));
    if (const std::size_t pool = config_.convs[i].pool) x = ops::maxpool1d(x, pool, pool);
  }
  x = ops::reshape(x, {batch, config_.flatten_size()});
  for (std::size_t i = 0; i < config_.hidden.size(); ++i) {
    const std::string p = "fc" + std::to_string(i);
    x = ops::matmul_nt(x, bind(tape, p + ".weight", options, r.bound));
    x = ops::relu(ops::add_row_bias(x, bind(tape, p + ".bias", options, r.bound)));
    if (options.training && config_.dropout > 0.0) x = ops::dropout(x, config_.dropout, *options.rng);
  }
  r.features = x;
  r.logits = ops::matmul_nt(x, bind(tape, "out.weight", options, r.bound));
  if (config_.output_bias) r.logits = ops::add_row_bias(r.logits, bind(tape, "out.bias", options, r.bound));
  return r;
}

void TabularNetConfig::validate() const {
  if (num_features == 0) throw ContractViolation("tabular net: need at least one input feature");
  if (hidden.empty() || std::find(hidden.begin(), hidden.end(), 0u) != hidden.end()) {
    throw ContractViolation("tabular net: hidden widths must be positive");
  }
  if (num_classes < 2) throw ContractViolation("tabular net: need at least two classes");
}

TabularNet::TabularNet(TabularNetConfig config, std::uint64_t seed) : config_(std::move(config)) {
  config_.validate();
  Rng rng(seed);
  std::size_t width = config_.num_features;
  for (std::size_t i = 0; i < config_.hidden.size(); ++i) {
    const std::string p = "fc" + std::to_string(i);
    params_[p + ".weight"] = gaussian({config_.hidden[i], width}, std::sqrt(2.0 / static_cast<double>(width)), rng);
    params_[p + ".bias"] = Tensor({config_.hidden[i]});
    width = config_.hidden[i];
  }
  params_["out.weight"] =
      gaussian({config_.num_classes, width}, std::sqrt(1.0 / static_cast<double>(width)), rng);
  if (config_.output_bias) params_["out.bias"] = Tensor({config_.num_classes});
}

ForwardResult TabularNet::forward(Tape& tape, Var input, const ForwardOptions& options) const {
  ForwardResult r;
  Var x = batched(input, input_shape());
  for (std::size_t i = 0; i < config_.hidden.size(); ++i) {
    const std::string p = "fc" + std::to_string(i);
    x = ops::matmul_nt(x, bind(tape, p + ".weight", options, r.bound));
    x = ops::relu(ops::add_row_bias(x, bind(tape, p + ".bias", options, r.bound)));
  }
  r.features = x;
  r.logits = ops::matmul_nt(x, bind(tape, "out.weight", options, r.bound));
  if (config_.output_bias) r.logits = ops::add_row_bias(r.logits, bind(tape, "out.bias", options, r.bound));
  return r;
}

Tensor softmax_rows(const Tensor& logits) {
  if (logits.rank() != 2) throw ShapeError("softmax_rows: expected a matrix, got " + shape_string(logits.shape()));
  const std::size_t rows = logits.dim(0), n = logits.dim(1);
  Tensor out(logits.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    double mx = logits.at(r, 0);
    for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, logits.at(r, j));
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      out.at(r, j) = std::exp(logits.at(r, j) - mx);
      z += out.at(r, j);
    }
    for (std::size_t j = 0; j < n; ++j) out.at(r, j) /= z;
  }
  return out;
}

Tensor predict_probabilities(const Classifier& model, const Tensor& inputs) {
  Tape tape;
  const ForwardResult r = model.forward(tape, tape.constant_ref(inputs));
  return softmax_rows(r.logits.value());
}

std::vector<std::size_t> predict_classes(const Classifier& model, const Tensor& inputs) {
  const Tensor p = predict_probabilities(model, inputs);
  std::vector<std::size_t> out(p.dim(0));
  for (std::size_t r = 0; r < out.size(); ++r) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < p.dim(1); ++j) {
      if (p.at(r, j) > p.at(r, best)) best = j;
    }
    out[r] = best;
  }
  return out;
}

double predict_true_class_prob(const Classifier& model, const AlphabetCodec& codec, std::string_view text,
                               std::size_t y) {
  if (y >= model.num_classes()) throw ContractViolation("predict_true_class_prob: class index out of range");
  const Tensor p = predict_probabilities(model, codec.encode(text));
  return p.at(0, y);
}

}  // namespace robust1d
