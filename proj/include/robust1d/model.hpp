#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "robust1d/codec.hpp"
#include "robust1d/rng.hpp"
#include "robust1d/tape.hpp"

namespace robust1d {

/// Parameters keyed by name. std::map keeps addresses stable and iterates in
/// sorted-name order, which is also the checkpoint record order.
using ParameterMap = std::map<std::string, Tensor>;

struct ForwardOptions {
  /// Enables dropout; requires rng.
  bool training = false;
  /// Bind parameters as gradient-collecting leaves.
  bool parameter_grads = false;
  Rng* rng = nullptr;
  /// Variables used in place of the named parameters (e.g. gradient probes).
  const std::map<std::string, Var>* overrides = nullptr;
};

struct ForwardResult {
  /// Penultimate activations, [batch x feature_dim].
  Var features;
  /// features * W^T (+ bias), [batch x num_classes].
  Var logits;
  /// Parameter leaves bound on the tape, for gradient collection.
  std::vector<std::pair<std::string, Var>> bound;
};

/// A classifier exposing its penultimate features and final linear layer.
/// Forward passes only read parameters, so several tapes may run concurrently
/// over one model.
class Classifier {
 public:
  virtual ~Classifier() = default;

  /// `input` is [batch x input_shape...] or a single unbatched sample.
  virtual ForwardResult forward(Tape& tape, Var input, const ForwardOptions& options = {}) const = 0;

  /// Per-sample input shape.
  virtual Shape input_shape() const = 0;
  virtual std::size_t num_classes() const = 0;
  virtual std::size_t feature_dim() const = 0;
  virtual std::unique_ptr<Classifier> clone() const = 0;

  ParameterMap& parameters() { return params_; }
  const ParameterMap& parameters() const { return params_; }
  std::vector<Tensor*> parameter_list();

  /// Final classification matrix W, [num_classes x feature_dim].
  const Tensor& classifier_weights() const { return params_.at("out.weight"); }

  /// Adds the gradients recorded on `tape` for the bound parameters.
  void accumulate_gradients(const Tape& tape, const ForwardResult& result);
  void zero_gradients();

  /// Replaces parameters; names and shapes must match exactly.
  void load_parameters(const ParameterMap& loaded);

 protected:
  ParameterMap params_;

  Var bind(Tape& tape, const std::string& name, const ForwardOptions& options,
           std::vector<std::pair<std::string, Var>>& bound) const;
};

/// One convolution stage: conv -> bias -> relu -> optional max-pool.
struct ConvSpec {
  std::size_t out_channels;
  std::size_t kernel;
  std::size_t pool = 0;  // 0: no pooling; pooling stride equals its size
};

struct CharCnnConfig {
  std::size_t length = 1014;
  std::size_t alphabet_size = 70;
  std::vector<ConvSpec> convs;
  /// Widths of the fully connected hidden layers; the last one is the
  /// feature dimension.
  std::vector<std::size_t> hidden;
  std::size_t num_classes = 2;
  double dropout = 0.0;
  bool output_bias = false;

  /// Six 256-filter convolutions and two 1024-wide layers.
  static CharCnnConfig full(std::size_t num_classes);
  /// Two 64-filter convolutions and one 128-wide layer on a 128-character window.
  static CharCnnConfig tiny(std::size_t num_classes);

  std::size_t feature_dim() const { return hidden.back(); }
  /// Signal length after every conv/pool stage; throws ShapeError if a stage
  /// would shrink the signal below its window.
  std::size_t final_length() const;
  std::size_t flatten_size() const { return final_length() * convs.back().out_channels; }
  void validate() const;
};

class CharCnnModel final : public Classifier {
 public:
  CharCnnModel(CharCnnConfig config, std::uint64_t seed);

  ForwardResult forward(Tape& tape, Var input, const ForwardOptions& options = {}) const override;
  Shape input_shape() const override { return {config_.length, config_.alphabet_size}; }
  std::size_t num_classes() const override { return config_.num_classes; }
  std::size_t feature_dim() const override { return config_.feature_dim(); }
  std::unique_ptr<Classifier> clone() const override { return std::make_unique<CharCnnModel>(*this); }

  const CharCnnConfig& config() const { return config_; }

 private:
  CharCnnConfig config_;
};

struct TabularNetConfig {
  std::size_t num_features = 1;
  std::vector<std::size_t> hidden{64, 32};
  std::size_t num_classes = 2;
  bool output_bias = false;

  void validate() const;
};

/// Fully connected network over [0,1]-normalized feature vectors.
class TabularNet final : public Classifier {
 public:
  TabularNet(TabularNetConfig config, std::uint64_t seed);

  ForwardResult forward(Tape& tape, Var input, const ForwardOptions& options = {}) const override;
  Shape input_shape() const override { return {config_.num_features}; }
  std::size_t num_classes() const override { return config_.num_classes; }
  std::size_t feature_dim() const override { return config_.hidden.back(); }
  std::unique_ptr<Classifier> clone() const override { return std::make_unique<TabularNet>(*this); }

  const TabularNetConfig& config() const { return config_; }

 private:
  TabularNetConfig config_;
};

/// Numerically stable softmax of each row of a [rows x n] tensor.
Tensor softmax_rows(const Tensor& logits);

/// Class probabilities for a batch of inputs, [batch x num_classes].
Tensor predict_probabilities(const Classifier& model, const Tensor& inputs);
std::vector<std::size_t> predict_classes(const Classifier& model, const Tensor& inputs);

/// softmax(logits)[y] for one text; the confidence every text scoring rule
/// differences.
double predict_true_class_prob(const Classifier& model, const AlphabetCodec& codec, std::string_view text,
                               std::size_t y);

}  // namespace robust1d
