#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "robust1d/codec.hpp"
#include "robust1d/data.hpp"
#include "robust1d/experiment.hpp"
#include "robust1d/losses.hpp"
#include "robust1d/model.hpp"

namespace robust1d {

/// A labelled dataset the training and evaluation loops can draw batches from.
class Task {
 public:
  virtual ~Task() = default;
  virtual std::size_t size() const = 0;
  /// 0-based labels.
  virtual const std::vector<std::size_t>& labels() const = 0;
  virtual std::size_t num_classes() const = 0;
  virtual std::string name() const = 0;
  /// Batched model inputs for the given rows.
  virtual Tensor inputs(const std::vector<std::size_t>& rows) const = 0;
  /// Inputs for adversarial counterparts of the given rows, attacked against
  /// `model`. `stream` distinguishes the random streams of separate calls.
  virtual Tensor adversarial_inputs(const Classifier& model, const AttackLoss& loss,
                                    const std::vector<std::size_t>& rows, const AttackSpec& attack,
                                    std::uint64_t stream) const = 0;
  /// A fresh model of the right architecture.
  virtual std::unique_ptr<Classifier> make_model(Profile profile, std::uint64_t seed) const = 0;
  virtual bool is_text() const = 0;
};

class TextTask final : public Task {
 public:
  TextTask(TextDataset dataset, AlphabetCodec codec);
  std::size_t size() const override { return dataset_.size(); }
  const std::vector<std::size_t>& labels() const override { return labels_; }
  std::size_t num_classes() const override { return dataset_.num_classes; }
  std::string name() const override { return dataset_.name; }
  Tensor inputs(const std::vector<std::size_t>& rows) const override;
  Tensor adversarial_inputs(const Classifier& model, const AttackLoss& loss, const std::vector<std::size_t>& rows,
                            const AttackSpec& attack, std::uint64_t stream) const override;
  std::unique_ptr<Classifier> make_model(Profile profile, std::uint64_t seed) const override;
  bool is_text() const override { return true; }

  const TextDataset& dataset() const { return dataset_; }
  const AlphabetCodec& codec() const { return codec_; }
  Tensor encode(const std::vector<std::string>& texts) const;

 private:
  TextDataset dataset_;
  AlphabetCodec codec_;
  std::vector<std::size_t> labels_;
};

class TabularTask final : public Task {
 public:
  explicit TabularTask(TabularDataset dataset);
  std::size_t size() const override { return dataset_.size(); }
  const std::vector<std::size_t>& labels() const override { return dataset_.labels; }
  std::size_t num_classes() const override { return dataset_.num_classes; }
  std::string name() const override { return dataset_.name; }
  Tensor inputs(const std::vector<std::size_t>& rows) const override;
  Tensor adversarial_inputs(const Classifier& model, const AttackLoss& loss, const std::vector<std::size_t>& rows,
                            const AttackSpec& attack, std::uint64_t stream) const override;
  std::unique_ptr<Classifier> make_model(Profile profile, std::uint64_t seed) const override;
  bool is_text() const override { return false; }

  const TabularDataset& dataset() const { return dataset_; }

 private:
  TabularDataset dataset_;
};

/// A classifier together with the class centers its loss learns.
struct TrainedModel {
  std::unique_ptr<Classifier> model;
  ClassCenters centers;
  LossConfig loss;

  /// Model parameters plus "loss.centers" when the loss uses centers.
  ParameterMap checkpoint() const;
  /// Inverse of checkpoint(); throws FormatError on missing or mismatched entries.
  void restore(const ParameterMap& saved);
  /// The objective attacks ascend: the trained loss, or cross-entropy.
  AttackLoss attack_loss(bool adaptive) const;
};

TrainedModel make_trained_model(const Task& task, Profile profile, const LossConfig& loss, std::uint64_t seed);

struct TrainSettings {
  std::size_t epochs = 10;
  std::size_t batch_size = 32;
  OptimizerSettings optimizer;
  std::uint64_t seed = 0;
  /// When set, every batch is augmented with adversarial counterparts.
  std::optional<AttackSpec> adversarial;
  double adversarial_ratio = 1.0;
  /// Attacks during training ascend the trained loss.
  bool adaptive = true;
};

struct EpochLog {
  std::size_t epoch = 0;
  double mean_loss = 0.0;
  /// Percent correct on the held-out task, or -1 without one.
  double heldout_accuracy = -1.0;
  /// Rows the optimizer saw per full batch (doubled by 1:1 augmentation).
  std::size_t effective_batch = 0;
};

struct TrainResult {
  std::vector<EpochLog> log;
  bool diverged = false;
  std::string message;
};

/// Mini-batch training. A non-finite loss stops training and restores the
/// parameters from the end of the last completed epoch.
TrainResult train(TrainedModel& tm, const Task& train_task, const Task* heldout, const TrainSettings& settings);

/// Percent of rows classified correctly.
double accuracy(const Classifier& model, const Task& task, const std::vector<std::size_t>& rows);
double accuracy(const Classifier& model, const Task& task);

std::string format_log(const TrainResult& result);

}  // namespace robust1d
