#include "robust1d/training.hpp"

#include <algorithm>
#include <cmath>

#include "robust1d/errors.hpp"
#include "robust1d/format.hpp"
#include "robust1d/ops.hpp"
#include "robust1d/optimizer.hpp"

namespace robust1d {

namespace {

constexpr const char* kCentersName = "loss.centers";
constexpr std::size_t kPredictChunk = 256;

std::vector<std::size_t> pick(const std::vector<std::size_t>& labels, const std::vector<std::size_t>& rows) {
  std::vector<std::size_t> out;
  out.reserve(rows.size());
  for (std::size_t r : rows) out.push_back(labels.at(r));
  return out;
}

}  // namespace

TextTask::TextTask(TextDataset dataset, AlphabetCodec codec)
    : dataset_(std::move(dataset)), codec_(std::move(codec)), labels_(dataset_.labels0()) {
  if (dataset_.num_classes < 2) throw ContractViolation("text task needs at least two classes");
}

Tensor TextTask::encode(const std::vector<std::string>& texts) const {
  const std::size_t per = codec_.length() * codec_.alphabet_size();
  Tensor x({texts.size(), codec_.length(), codec_.alphabet_size()});
  for (std::size_t i = 0; i < texts.size(); ++i) {
    codec_.encode_into(texts[i], x.data().subspan(i * per, per));
  }
  return x;
}

Tensor TextTask::inputs(const std::vector<std::size_t>& rows) const {
  std::vector<std::string> texts;
  texts.reserve(rows.size());
  for (std::size_t r : rows) texts.push_back(dataset_.records.at(r).text);
  return encode(texts);
}

Tensor TextTask::adversarial_inputs(const Classifier& model, const AttackLoss& loss,
                                    const std::vector<std::size_t>& rows, const AttackSpec& attack,
                                    std::uint64_t stream) const {
  if (attack.kind != AttackSpec::Kind::Text) throw ContractViolation("text data needs a text attack");
  DiscreteAttackSpec spec = attack.text;
  spec.seed = derive_seed(spec.seed, stream);
  std::vector<std::string> texts;
  for (std::size_t r : rows) texts.push_back(dataset_.records.at(r).text);
  const auto adv = generate_adversarial_batch(model, codec_, loss, texts, pick(labels_, rows), spec);
  for (std::size_t i = 0; i < adv.size(); ++i) texts[i] = adv[i].text;
  return encode(texts);
}

std::unique_ptr<Classifier> TextTask::make_model(Profile profile, std::uint64_t seed) const {
  CharCnnConfig c = profile == Profile::Full ? CharCnnConfig::full(num_classes()) : CharCnnConfig::tiny(num_classes());
  c.length = codec_.length();
  c.alphabet_size = codec_.alphabet_size();
  return std::make_unique<CharCnnModel>(c, seed);
}

TabularTask::TabularTask(TabularDataset dataset) : dataset_(std::move(dataset)) {
  if (dataset_.num_classes < 2) throw ContractViolation("tabular task needs at least two classes");
}

Tensor TabularTask::inputs(const std::vector<std::size_t>& rows) const {
  const std::size_t f = dataset_.features.dim(1);
  Tensor x({rows.size(), f});
  for (std::size_t k = 0; k < rows.size(); ++k)
    for (std::size_t j = 0; j < f; ++j) x.at(k, j) = dataset_.features.at(rows[k], j);
  return x;
}

Tensor TabularTask::adversarial_inputs(const Classifier& model, const AttackLoss& loss,
                                       const std::vector<std::size_t>& rows, const AttackSpec& attack,
                                       std::uint64_t stream) const {
  if (attack.kind != AttackSpec::Kind::Continuous) throw ContractViolation("tabular data needs fgsm or pgd");
  ContinuousAttackSpec spec = attack.continuous;
  spec.seed = derive_seed(spec.seed, stream);
  const auto y = pick(dataset_.labels, rows);
  return run_attack(model, loss, inputs(rows), y, spec).adversarial;
}

std::unique_ptr<Classifier> TabularTask::make_model(Profile, std::uint64_t seed) const {
  return std::make_unique<TabularNet>(TabularNetConfig{dataset_.features.dim(1), {64, 32}, num_classes()}, seed);
}

ParameterMap TrainedModel::checkpoint() const {
  ParameterMap out = model->parameters();
  if (loss.uses_centers()) out.emplace(kCentersName, centers.matrix);
  return out;
}

void TrainedModel::restore(const ParameterMap& saved) {
  ParameterMap rest = saved;
  if (loss.uses_centers()) {
    const auto it = rest.find(kCentersName);
    if (it == rest.end()) throw FormatError("checkpoint has no class centers");
    if (it->second.shape() != centers.matrix.shape()) {
      throw FormatError("checkpoint centers have shape " + shape_string(it->second.shape()) + ", expected " +
                        shape_string(centers.matrix.shape()));
    }
    centers.matrix = it->second;
    rest.erase(it);
  }
  model->load_parameters(rest);
}

AttackLoss TrainedModel::attack_loss(bool adaptive) const {
  if (!adaptive) return cross_entropy_objective();
  return trained_objective(loss, loss.uses_centers() ? &centers.matrix : nullptr);
}

TrainedModel make_trained_model(const Task& task, Profile profile, const LossConfig& loss, std::uint64_t seed) {
  loss.validate();
  TrainedModel tm;
  tm.model = task.make_model(profile, derive_seed(seed, 1));
  tm.centers = ClassCenters(task.num_classes(), tm.model->feature_dim(), derive_seed(seed, 2));
  tm.loss = loss;
  return tm;
}

double accuracy(const Classifier& model, const Task& task, const std::vector<std::size_t>& rows) {
  if (rows.empty()) throw ContractViolation("accuracy over no rows");
  std::size_t correct = 0;
  for (std::size_t b = 0; b < rows.size(); b += kPredictChunk) {
    const std::vector<std::size_t> chunk(rows.begin() + static_cast<std::ptrdiff_t>(b),
                                         rows.begin() + static_cast<std::ptrdiff_t>(std::min(rows.size(), b + kPredictChunk)));
    const auto predicted = predict_classes(model, task.inputs(chunk));
    for (std::size_t i = 0; i < chunk.size(); ++i) correct += predicted[i] == task.labels()[chunk[i]];
  }
  return 100.0 * static_cast<double>(correct) / static_cast<double>(rows.size());
}

double accuracy(const Classifier& model, const Task& task) {
  std::vector<std::size_t> rows(task.size());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  return accuracy(model, task, rows);
}

TrainResult train(TrainedModel& tm, const Task& task, const Task* heldout, const TrainSettings& s) {
  if (s.batch_size < 1) throw ContractViolation("batch size must be at least 1");
  if (task.num_classes() != tm.model->num_classes()) throw ContractViolation("task and model class counts differ");
  if (s.adversarial && !(s.adversarial_ratio > 0.0 && s.adversarial_ratio <= 1.0)) {
    throw ContractViolation("adversarial ratio must lie in (0,1]");
  }
  Classifier& model = *tm.model;
  const bool centers_learned = tm.loss.uses_centers() && tm.centers.trainable;
  std::vector<Tensor*> params = model.parameter_list();
  if (centers_learned) params.push_back(&tm.centers.matrix);

  Optimizer optimizer(s.optimizer);
  Rng dropout_rng(derive_seed(s.seed, 0xd509));
  ParameterMap last_good = tm.checkpoint();
  const AttackLoss attack_loss = tm.attack_loss(s.adaptive);
  TrainResult result;

  for (std::size_t epoch = 0; epoch < s.epochs; ++epoch) {
    const auto order = batches(task.size(), s.batch_size, derive_seed(s.seed, 1000 + epoch));
    double loss_sum = 0.0;
    std::size_t effective = 0;
    for (std::size_t b = 0; b < order.size(); ++b) {
      const auto& rows = order[b];
      const auto y = pick(task.labels(), rows);
      const Tensor x = task.inputs(rows);

      std::vector<std::size_t> adv_rows;
      Tensor adv;
      if (s.adversarial) {
        const auto k = static_cast<std::size_t>(std::llround(s.adversarial_ratio * static_cast<double>(rows.size())));
        adv_rows.assign(rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(std::clamp<std::size_t>(k, 1, rows.size())));
        adv = task.adversarial_inputs(model, attack_loss, adv_rows, *s.adversarial, epoch * 1000003 + b);
      }

      Tape tape;
      // Each branch binds its own centers leaf so that the two halves of the
      // gradient are summed as wholes, as for the model parameters.
      auto bind_centers = [&] {
        if (!tm.loss.uses_centers()) return Var{};
        return centers_learned ? tape.parameter(tm.centers.matrix) : tape.constant_ref(tm.centers.matrix);
      };
      const Var centers = bind_centers();
      Var adv_centers;
      // The adversarial branch replays the clean branch's dropout stream, so
      // each counterpart sees its clean row's mask.
      Rng branch_rng = dropout_rng;
      ForwardOptions fo;
      fo.training = true;
      fo.parameter_grads = true;
      fo.rng = &dropout_rng;
      const ForwardResult clean = model.forward(tape, tape.constant_ref(x), fo);
      Var loss = losses::objective(tm.loss, clean.features, clean.logits, y, centers);
      ForwardResult counter;
      if (s.adversarial) {
        const double n_clean = static_cast<double>(rows.size()), n_adv = static_cast<double>(adv_rows.size());
        fo.rng = &branch_rng;
        counter = model.forward(tape, tape.constant_ref(adv), fo);
        const auto ya = pick(task.labels(), adv_rows);
        adv_centers = bind_centers();
        const Var adv_loss = losses::objective(tm.loss, counter.features, counter.logits, ya, adv_centers);
        loss = ops::add(ops::scale(loss, n_clean / (n_clean + n_adv)), ops::scale(adv_loss, n_adv / (n_clean + n_adv)));
      }
      const double value = loss.value()[0];
      if (!std::isfinite(value)) {
        tm.restore(last_good);
        model.zero_gradients();
        result.diverged = true;
        result.message = "non-finite loss at epoch " + std::to_string(epoch + 1) + " batch " + std::to_string(b + 1) +
                         "; parameters restored from the last completed epoch";
        return result;
      }
      tape.backward(loss);
      model.accumulate_gradients(tape, clean);
      if (s.adversarial) model.accumulate_gradients(tape, counter);
      if (centers_learned) {
        Tensor& c = tm.centers.matrix;
        c.ensure_grad();
        for (const Var& v : {centers, adv_centers}) {
          if (!v.tape) continue;
          const auto g = tape.grad(v);
          for (std::size_t i = 0; i < g.size(); ++i) c.grad()[i] += g[i];
        }
      }
      optimizer.step(params);
      loss_sum += value;
      effective = std::max(effective, rows.size() + adv_rows.size());
    }
    EpochLog entry;
    entry.epoch = epoch + 1;
    entry.mean_loss = loss_sum / static_cast<double>(order.size());
    entry.effective_batch = effective;
    if (heldout) entry.heldout_accuracy = accuracy(model, *heldout);
    result.log.push_back(entry);
    last_good = tm.checkpoint();
  }
  return result;
}

std::string format_log(const TrainResult& result) {
  std::string out;
  for (const auto& e : result.log) {
    out += "epoch=" + std::to_string(e.epoch) + " loss=" + format_double(e.mean_loss) +
           " batch=" + std::to_string(e.effective_batch);
    if (e.heldout_accuracy >= 0.0) out += " heldout_accuracy=" + format_double(e.heldout_accuracy);
    out += "\n";
  }
  if (result.diverged) out += "aborted: " + result.message + "\n";
  return out;
}

}  // namespace robust1d
