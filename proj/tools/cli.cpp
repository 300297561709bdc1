#include "cli.hpp"

#include <CLI11.hpp>
#include <filesystem>
#include <optional>
#include <ostream>

#include "robust1d/data.hpp"
#include "robust1d/errors.hpp"
#include "robust1d/evaluation.hpp"
#include "robust1d/format.hpp"

namespace robust1d::cli {

namespace {

namespace fs = std::filesystem;

/// Bad input the user can fix: reported with exit code 1.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ExperimentFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> profile;
  std::optional<std::string> loss;
  std::optional<double> margin;
  std::optional<std::string> variant;
  std::vector<std::string> attacks;
  std::optional<std::size_t> subsample;
  std::optional<std::size_t> epochs;
};

void add_experiment_flags(CLI::App* cmd, ExperimentFlags& f) {
  cmd->add_option("--config", f.config, "Experiment config file")->required();
  cmd->add_option("--seed", f.seed, "Seed for every random choice");
  cmd->add_option("--out", f.out, "Output directory");
  cmd->add_option("--profile", f.profile, "Model size")->check(CLI::IsMember({"full", "tiny"}));
  cmd->add_option("--loss", f.loss, "Training loss")->check(CLI::IsMember({"ce", "center", "marginal", "marginal-contrastive"}));
  cmd->add_option("--margin", f.margin, "Softmax margin m");
  cmd->add_option("--variant", f.variant, "Contrastive denominator")->check(CLI::IsMember({"eq4", "eq6"}));
  cmd->add_option("--attack", f.attacks, "Evaluation attack, repeatable (e.g. pgd:eps=8/255,steps=10)");
  cmd->add_option("--subsample", f.subsample, "Evaluated test samples, 0 for all");
  cmd->add_option("--epochs", f.epochs, "Training epochs");
}

/// Loads the config and applies command-line overrides. Every failure here is
/// a ConfigError.
ExperimentConfig resolve(const ExperimentFlags& f) {
  try {
    ExperimentConfig c = ExperimentConfig::load(f.config);
    std::string echo;
    if (f.seed) {
      c.seed = *f.seed;
      echo += " --seed " + std::to_string(*f.seed);
    }
    if (f.out) {
      c.output_dir = *f.out;
      echo += " --out " + *f.out;
    }
    if (f.profile) {
      c.profile = parse_profile(*f.profile);
      echo += " --profile " + *f.profile;
    }
    if (f.loss) {
      c.loss.kind = parse_loss_kind(*f.loss);
      echo += " --loss " + *f.loss;
    }
    if (f.margin) {
      c.loss.margin = *f.margin;
      echo += " --margin " + format_double(*f.margin);
    }
    if (f.variant) {
      c.loss.variant = parse_variant(*f.variant);
      echo += " --variant " + *f.variant;
    }
    if (!f.attacks.empty()) {
      c.attacks.clear();
      for (const auto& a : f.attacks) {
        c.attacks.push_back(AttackSpec::parse(a));
        echo += " --attack " + a;
      }
    }
    if (f.subsample) {
      c.subsample = *f.subsample;
      echo += " --subsample " + std::to_string(*f.subsample);
    }
    if (f.epochs) {
      c.epochs = *f.epochs;
      echo += " --epochs " + std::to_string(*f.epochs);
    }
    if (!echo.empty()) c.source += "# command line:" + echo + "\n";
    c.validate();
    return c;
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
}

void print_report(std::ostream& out, const EvalReport& report) {
  for (const auto& r : report.rows) {
    out << r.attack << ": clean " << format_double(r.clean_accuracy) << "% adversarial "
        << format_double(r.adversarial_accuracy) << "% over " << r.samples << " samples\n";
  }
}

int cmd_train(const ExperimentFlags& flags, const std::optional<std::string>& train_attack, bool adversarial,
              std::ostream& out) {
  ExperimentConfig c = resolve(flags);
  if (adversarial) {
    try {
      if (train_attack) {
        c.training_attack = AttackSpec::parse(*train_attack);
      } else if (!c.training_attack) {
        if (c.attacks.size() != 1) {
          throw ConfigError("advtrain needs exactly one training attack (--train-attack or train.adversarial_attack)");
        }
        c.training_attack = c.attacks.front();
      }
    } catch (const ContractViolation& e) {
      throw ConfigError(e.what());
    }
    c.source += "# training attack: " + c.training_attack->id() + "\n";
  } else {
    c.training_attack.reset();
  }
  const ExperimentOutcome outcome = run_experiment(c);
  out << format_log(outcome.training);
  print_report(out, outcome.report);
  out << "wrote " << c.output_dir << "/{model.ckpt,train.log,report.csv,report.json}\n";
  return kExitOk;
}

std::string checkpoint_path(const ExperimentConfig& c, const std::string& given) {
  const std::string path = given.empty() ? c.output_dir + "/model.ckpt" : given;
  if (!fs::exists(path)) throw ConfigError("checkpoint " + path + " does not exist");
  return path;
}

int cmd_eval(const ExperimentFlags& flags, const std::string& checkpoint, std::ostream& out) {
  const ExperimentConfig c = resolve(flags);
  const std::string path = checkpoint_path(c, checkpoint);
  const LoadedData data = load_data(c);
  const TrainedModel tm = load_trained_model(c, *data.test, path);
  EvalReport report = evaluate(tm, *data.test, c.attacks, EvalOptions{c.subsample, c.seed, c.adaptive_attacks});
  report.config = c.source;
  write_reports(c.output_dir, {report});
  print_report(out, report);
  return kExitOk;
}

int cmd_attack(const ExperimentFlags& flags, const std::string& checkpoint, std::ostream& out) {
  const ExperimentConfig c = resolve(flags);
  if (c.attacks.empty()) throw ConfigError("attack needs at least one --attack or eval.attacks entry");
  const std::string path = checkpoint_path(c, checkpoint);
  const LoadedData data = load_data(c);
  const TrainedModel tm = load_trained_model(c, *data.test, path);
  const AttackLoss loss = tm.attack_loss(c.adaptive_attacks);
  const auto rows = evaluation_rows(data.test->size(), c.subsample, c.seed);
  fs::create_directories(c.output_dir);

  for (std::size_t a = 0; a < c.attacks.size(); ++a) {
    AttackSpec spec = c.attacks[a];
    if (!spec.seeded) spec.set_seed(derive_seed(c.seed, 0xa7 + a));
    const std::string file = c.output_dir + "/adversarial-" + std::to_string(a + 1) + ".csv";
    std::size_t successes = 0;
    if (const auto* text = dynamic_cast<const TextTask*>(data.test.get())) {
      if (spec.kind != AttackSpec::Kind::Text) throw ConfigError("text data needs a text attack");
      std::vector<std::string> texts;
      std::vector<std::size_t> labels;
      for (std::size_t r : rows) {
        texts.push_back(text->dataset().records[r].text);
        labels.push_back(text->labels()[r]);
      }
      const auto adv = generate_adversarial_batch(*tm.model, text->codec(), loss, texts, labels, spec.text);
      std::string csv_text = csv::format_row({"label", "text", "original", "modified_words", "success"});
      for (std::size_t i = 0; i < adv.size(); ++i) {
        successes += adv[i].success;
        csv_text += csv::format_row({std::to_string(labels[i] + 1), adv[i].text, texts[i],
                                     std::to_string(adv[i].modified.size()), adv[i].success ? "1" : "0"});
      }
      write_text_file(file, csv_text);
    } else {
      if (spec.kind != AttackSpec::Kind::Continuous) throw ConfigError("tabular data needs fgsm or pgd");
      const auto& table = dynamic_cast<const TabularTask&>(*data.test);
      const Tensor x = table.inputs(rows);
      std::vector<std::size_t> labels;
      for (std::size_t r : rows) labels.push_back(table.labels()[r]);
      const auto result = batch_attack(*tm.model, loss, x, labels, spec.continuous);
      successes = result.successes();
      std::vector<std::string> header = table.dataset().feature_names;
      header.push_back("label");
      header.push_back("success");
      std::string csv_text = csv::format_row(header);
      for (std::size_t i = 0; i < rows.size(); ++i) {
        std::vector<std::string> fields;
        for (std::size_t j = 0; j < x.dim(1); ++j) fields.push_back(format_double(result.adversarial.at(i, j)));
        fields.push_back(std::to_string(labels[i]));
        fields.push_back(result.success[i] ? "1" : "0");
        csv_text += csv::format_row(fields);
      }
      write_text_file(file, csv_text);
    }
    out << spec.id() << ": " << successes << "/" << rows.size() << " misclassified after attack, wrote " << file
        << "\n";
  }
  return kExitOk;
}

struct GradcheckFlags {
  std::string profile = "tiny";
  std::string loss = "marginal-contrastive";
  double margin = 0.5;
  std::string variant = "eq4";
  std::string data = "text";
  std::uint64_t seed = 0;
  std::size_t classes = 3;
  std::size_t batch = 4;
  std::size_t entries = 12;
  double tolerance = 1e-4;
};

int cmd_gradcheck(const GradcheckFlags& f, std::ostream& out) {
  LossConfig loss;
  Profile profile;
  try {
    loss.kind = parse_loss_kind(f.loss);
    loss.margin = f.margin;
    loss.variant = parse_variant(f.variant);
    loss.validate();
    profile = parse_profile(f.profile);
    if (f.classes < 2 || f.batch < 1) throw ConfigError("gradcheck needs --classes >= 2 and --batch >= 1");
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }

  std::unique_ptr<Task> task;
  if (f.data == "text") {
    TextDataset d = synth_text_dataset(f.classes, f.batch, derive_seed(f.seed, 1));
    task = std::make_unique<TextTask>(std::move(d), AlphabetCodec(profile == Profile::Full ? 1014 : 128));
  } else {
    RawTable raw = synth_tabular(std::max<std::size_t>(f.batch, 2), derive_seed(f.seed, 1));
    task = std::make_unique<TabularTask>(normalize(raw));
  }
  const TrainedModel tm = make_trained_model(*task, profile, loss, derive_seed(f.seed, 2));
  std::vector<std::size_t> rows(std::min(f.batch, task->size()));
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  std::vector<std::size_t> labels;
  for (std::size_t r : rows) labels.push_back(task->labels()[r]);
  // Dense random inputs: padded one-hot text gives tied max-pool windows,
  // where the loss has no derivative to check.
  Tensor x = task->inputs(rows);
  Rng rng(derive_seed(f.seed, 3));
  for (double& v : x.data()) v = rng.uniform();
  const auto result = check_gradients(tm, x, labels, GradCheckSampling{f.entries, f.seed});
  out << "max_rel_error=" << format_double(result.max_rel_error) << "\n";
  if (!result.finite) out << "non-finite: " << result.failure << "\n";
  const bool ok = result.passed(f.tolerance);
  out << (ok ? "PASS" : "FAIL") << " (tolerance " << format_double(f.tolerance) << ")\n";
  return ok ? kExitOk : kExitRuntime;
}

int cmd_report(const std::vector<std::string>& inputs, const std::string& dir, std::ostream& out) {
  std::vector<EvalReport> reports;
  for (const auto& path : inputs) {
    EvalReport r;
    r.rows = read_report_csv(path);
    r.config = "# rows read from " + path + "\n";
    reports.push_back(std::move(r));
  }
  write_reports(dir, reports);
  out << "wrote " << dir << "/report.csv and " << dir << "/report.json\n";
  return kExitOk;
}

struct SynthFlags {
  std::string kind = "text";
  std::size_t classes = 3;
  std::size_t per_class = 100;
  std::size_t rows = 1000;
  std::uint64_t seed = 0;
  std::string out;
};

int cmd_synth(const SynthFlags& f, std::ostream& out) {
  if (f.kind == "text" && f.classes < 2) throw ConfigError("synth needs --classes >= 2");
  const fs::path csv_path = fs::absolute(f.out);
  if (!csv_path.parent_path().empty()) fs::create_directories(csv_path.parent_path());
  const fs::path stem = csv_path.parent_path() / csv_path.stem();

  DatasetManifest m;
  m.name = csv_path.stem().string();
  m.kind = f.kind;
  m.path = csv_path.filename().string();
  m.split.seed = f.seed;
  if (f.kind == "text") {
    TextDataset d = synth_text_dataset(f.classes, f.per_class, f.seed);
    write_text_csv(d, csv_path.string());
    m.num_classes = f.classes;
  } else {
    const RawTable t = synth_tabular(f.rows, f.seed);
    write_tabular_csv(t, csv_path.string());
    m.num_classes = 2;
  }
  const std::string manifest = stem.string() + ".manifest";
  m.save(manifest);

  KeyValueFile config;
  config.set("seed", std::to_string(f.seed));
  config.set("output", KeyValueFile::quote(stem.filename().string() + "-run"));
  config.set("data.manifest", KeyValueFile::quote(stem.filename().string() + ".manifest"));
  config.set("model.profile", KeyValueFile::quote("tiny"));
  const std::string config_path = stem.string() + ".toml";
  write_text_file(config_path, config.to_string());
  out << "wrote " << csv_path.string() << ", " << manifest << " and " << config_path << "\n";
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Robust 1D classifiers: training, attacks and evaluation", "robust1d"};
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);

  ExperimentFlags train_flags, adv_flags, eval_flags, attack_flags;
  std::optional<std::string> train_attack;
  std::string eval_checkpoint, attack_checkpoint;
  auto* train = app.add_subcommand("train", "Train, evaluate and write reports");
  add_experiment_flags(train, train_flags);
  auto* advtrain = app.add_subcommand("advtrain", "Train on batches augmented with adversarial counterparts");
  add_experiment_flags(advtrain, adv_flags);
  advtrain->add_option("--train-attack", train_attack, "Attack used during training");
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint under the configured attacks");
  add_experiment_flags(eval, eval_flags);
  eval->add_option("--checkpoint", eval_checkpoint, "Checkpoint (default <out>/model.ckpt)");
  auto* attack = app.add_subcommand("attack", "Write adversarial examples for the test split");
  add_experiment_flags(attack, attack_flags);
  attack->add_option("--checkpoint", attack_checkpoint, "Checkpoint (default <out>/model.ckpt)");

  GradcheckFlags gc;
  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of model and loss gradients");
  gradcheck->add_option("--profile", gc.profile)->check(CLI::IsMember({"full", "tiny"}));
  gradcheck->add_option("--loss", gc.loss)->check(CLI::IsMember({"ce", "center", "marginal", "marginal-contrastive"}));
  gradcheck->add_option("--margin", gc.margin);
  gradcheck->add_option("--variant", gc.variant)->check(CLI::IsMember({"eq4", "eq6"}));
  gradcheck->add_option("--data", gc.data, "Model family")->check(CLI::IsMember({"text", "tabular"}));
  gradcheck->add_option("--seed", gc.seed);
  gradcheck->add_option("--classes", gc.classes);
  gradcheck->add_option("--batch", gc.batch);
  gradcheck->add_option("--entries", gc.entries, "Probed entries per parameter, 0 for all");
  gradcheck->add_option("--tolerance", gc.tolerance);

  std::vector<std::string> report_inputs;
  std::string report_out = "report";
  auto* report = app.add_subcommand("report", "Combine report.csv files; the first is the baseline");
  report->add_option("reports", report_inputs, "report.csv files")->required()->check(CLI::ExistingFile);
  report->add_option("--out", report_out, "Output directory");

  SynthFlags sf;
  auto* synth = app.add_subcommand("synth", "Write a synthetic dataset with its manifest and config");
  synth->add_option("--kind", sf.kind)->check(CLI::IsMember({"text", "tabular"}));
  synth->add_option("--classes", sf.classes, "Text classes");
  synth->add_option("--per-class", sf.per_class, "Text samples per class");
  synth->add_option("--rows", sf.rows, "Tabular rows");
  synth->add_option("--seed", sf.seed);
  synth->add_option("--out", sf.out, "CSV path")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*train) return cmd_train(train_flags, std::nullopt, false, out);
    if (*advtrain) return cmd_train(adv_flags, train_attack, true, out);
    if (*eval) return cmd_eval(eval_flags, eval_checkpoint, out);
    if (*attack) return cmd_attack(attack_flags, attack_checkpoint, out);
    if (*gradcheck) return cmd_gradcheck(gc, out);
    if (*report) return cmd_report(report_inputs, report_out, out);
    if (*synth) return cmd_synth(sf, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace robust1d::cli
