#include "robust1d/experiment.hpp"

#include <algorithm>
#include <filesystem>
#include <map>
#include <set>

#include "robust1d/errors.hpp"
#include "robust1d/format.hpp"

namespace robust1d {

std::string to_string(Profile p) { return p == Profile::Full ? "full" : "tiny"; }

Profile parse_profile(const std::string& s) {
  if (s == "full") return Profile::Full;
  if (s == "tiny") return Profile::Tiny;
  throw ContractViolation("unknown profile '" + s + "' (expected full or tiny)");
}

namespace {

std::map<std::string, std::string> parse_options(const std::string& body, const std::string& spec) {
  std::map<std::string, std::string> out;
  std::size_t start = 0;
  while (start <= body.size() && !body.empty()) {
    const auto comma = body.find(',', start);
    const std::string item = body.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == item.size()) {
      throw ContractViolation("attack '" + spec + "': expected key=value, got '" + item + "'");
    }
    if (!out.emplace(item.substr(0, eq), item.substr(eq + 1)).second) {
      throw ContractViolation("attack '" + spec + "': repeated key '" + item.substr(0, eq) + "'");
    }
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

double real_option(const std::string& value, const std::string& spec) {
  try {
    return parse_real(value);
  } catch (const FormatError&) {
    throw ContractViolation("attack '" + spec + "': '" + value + "' is not a number");
  }
}

std::uint64_t uint_option(const std::string& value, const std::string& spec) {
  std::size_t used = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(value, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != value.size() || value.empty() || value.front() == '-') {
    throw ContractViolation("attack '" + spec + "': '" + value + "' is not a non-negative integer");
  }
  return v;
}

}  // namespace

AttackSpec AttackSpec::parse(const std::string& spec) {
  const auto colon = spec.find(':');
  const std::string name = spec.substr(0, colon);
  const auto options = parse_options(colon == std::string::npos ? "" : spec.substr(colon + 1), spec);
  AttackSpec a;
  std::set<std::string> allowed;
  if (name == "fgsm" || name == "pgd") {
    a.kind = Kind::Continuous;
    a.continuous.kind = name == "fgsm" ? ContinuousAttackKind::Fgsm : ContinuousAttackKind::Pgd;
    allowed = name == "fgsm" ? std::set<std::string>{"eps"}
                             : std::set<std::string>{"eps", "steps", "alpha", "random_start", "seed"};
    if (options.count("eps")) a.continuous.epsilon = real_option(options.at("eps"), spec);
    if (options.count("steps")) a.continuous.steps = uint_option(options.at("steps"), spec);
    if (options.count("alpha")) a.continuous.step_size = real_option(options.at("alpha"), spec);
    if (options.count("random_start")) a.continuous.random_start = uint_option(options.at("random_start"), spec) != 0;
    if (options.count("seed")) {
      a.continuous.seed = uint_option(options.at("seed"), spec);
      a.seeded = true;
    }
    if (a.continuous.kind == ContinuousAttackKind::Fgsm) a.continuous.steps = 1;
    a.continuous.validate();
  } else if (name == "text") {
    a.kind = Kind::Text;
    allowed = {"score", "transform", "budget", "lambda", "seed"};
    if (options.count("score")) a.text.scoring = parse_scoring(options.at("score"));
    if (options.count("transform")) a.text.transform = parse_transform(options.at("transform"));
    if (options.count("budget")) a.text.budget = uint_option(options.at("budget"), spec);
    if (options.count("lambda")) a.text.lambda = real_option(options.at("lambda"), spec);
    if (options.count("seed")) {
      a.text.seed = uint_option(options.at("seed"), spec);
      a.seeded = true;
    }
    a.text.validate();
  } else {
    throw ContractViolation("unknown attack '" + name + "' (expected fgsm, pgd or text)");
  }
  for (const auto& [key, value] : options) {
    if (!allowed.count(key)) throw ContractViolation("attack '" + spec + "': unknown key '" + key + "'");
  }
  return a;
}

std::string AttackSpec::id() const {
  std::string s = kind == Kind::Continuous ? continuous.describe() : text.describe();
  if (seeded) s += ",seed=" + std::to_string(kind == Kind::Continuous ? continuous.seed : text.seed);
  return s;
}

double AttackSpec::epsilon() const {
  return kind == Kind::Continuous ? continuous.epsilon : static_cast<double>(text.budget);
}

void AttackSpec::set_seed(std::uint64_t seed) {
  continuous.seed = seed;
  text.seed = seed;
}

std::size_t ExperimentConfig::resolved_epochs() const {
  return epochs ? epochs : (profile == Profile::Full ? 100 : 10);
}
std::size_t ExperimentConfig::resolved_batch_size() const {
  return batch_size ? batch_size : (profile == Profile::Full ? 128 : 32);
}
std::size_t ExperimentConfig::resolved_length() const {
  return length ? length : (profile == Profile::Full ? 1014 : 128);
}

void ExperimentConfig::validate() const {
  if (manifest.empty()) throw ContractViolation("config: data.manifest is required");
  loss.validate();
  if (!(optimizer.learning_rate > 0.0)) throw ContractViolation("config: learning rate must be positive");
  if (!(adversarial_ratio > 0.0 && adversarial_ratio <= 1.0)) {
    throw ContractViolation("config: adversarial_ratio must lie in (0,1]");
  }
  if (output_dir.empty()) throw ContractViolation("config: output directory is empty");
}

ExperimentConfig ExperimentConfig::from_keyvalue(const KeyValueFile& kv) {
  static const std::set<std::string> known{
      "seed", "output", "data.manifest", "model.profile", "model.length", "loss.kind", "loss.margin",
      "loss.variant", "loss.center_weight", "loss.normalizer", "train.epochs", "train.batch_size",
      "train.learning_rate", "train.optimizer", "train.momentum", "train.adversarial_attack",
      "train.adversarial_ratio", "eval.attacks", "eval.subsample", "eval.adaptive"};
  for (const auto& key : kv.keys()) {
    if (!known.count(key)) throw FormatError("config: unknown key '" + key + "'");
  }
  auto count = [&](const std::string& key, std::size_t fallback) {
    const auto v = kv.get_int(key, static_cast<std::int64_t>(fallback));
    if (v < 0) throw FormatError("config: '" + key + "' must be >= 0");
    return static_cast<std::size_t>(v);
  };

  ExperimentConfig c;
  c.source = kv.source();
  c.seed = static_cast<std::uint64_t>(kv.get_int("seed", 0));
  c.output_dir = kv.get_string("output", c.output_dir);
  c.manifest = kv.get_string("data.manifest", "");
  c.profile = parse_profile(kv.get_string("model.profile", "tiny"));
  c.length = count("model.length", 0);
  c.loss.kind = parse_loss_kind(kv.get_string("loss.kind", to_string(c.loss.kind)));
  c.loss.margin = kv.get_real("loss.margin", c.loss.margin);
  c.loss.variant = parse_variant(kv.get_string("loss.variant", to_string(c.loss.variant)));
  c.loss.center_weight = kv.get_real("loss.center_weight", c.loss.center_weight);
  const std::string normalizer = kv.get_string("loss.normalizer", "batch");
  if (normalizer != "batch" && normalizer != "classes") throw FormatError("config: loss.normalizer must be batch or classes");
  c.loss.normalizer = normalizer == "batch" ? ContrastiveNormalizer::BatchSize : ContrastiveNormalizer::ClassCount;
  c.epochs = count("train.epochs", 0);
  c.batch_size = count("train.batch_size", 0);
  c.optimizer.learning_rate = kv.get_real("train.learning_rate", c.optimizer.learning_rate);
  const std::string opt = kv.get_string("train.optimizer", "adam");
  if (opt != "adam" && opt != "sgd") throw FormatError("config: train.optimizer must be adam or sgd");
  c.optimizer.kind = opt == "adam" ? OptimizerKind::Adam : OptimizerKind::SgdMomentum;
  c.optimizer.momentum = kv.get_real("train.momentum", c.optimizer.momentum);
  if (kv.has("train.adversarial_attack")) c.training_attack = AttackSpec::parse(kv.get_string("train.adversarial_attack"));
  c.adversarial_ratio = kv.get_real("train.adversarial_ratio", 1.0);
  if (kv.has("eval.attacks")) {
    for (const auto& s : kv.get_list("eval.attacks")) c.attacks.push_back(AttackSpec::parse(s));
  }
  c.subsample = count("eval.subsample", c.subsample);
  c.adaptive_attacks = kv.get_bool("eval.adaptive", true);
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  ExperimentConfig c = from_keyvalue(KeyValueFile::load(path));
  // Relative manifest paths are resolved against the config's directory.
  if (!c.manifest.empty() && c.manifest.front() != '/') {
    const auto slash = path.find_last_of('/');
    if (slash != std::string::npos) c.manifest = path.substr(0, slash + 1) + c.manifest;
  }
  if (!c.manifest.empty() && !std::filesystem::exists(c.manifest)) {
    throw FormatError("config: manifest " + c.manifest + " does not exist");
  }
  return c;
}

}  // namespace robust1d
