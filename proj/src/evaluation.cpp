#include "robust1d/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <json.hpp>
#include <sstream>

#include "robust1d/checkpoint.hpp"
#include "robust1d/errors.hpp"
#include "robust1d/format.hpp"

namespace robust1d {

namespace {

const std::vector<std::string> kColumns{"dataset", "loss", "attack", "scoring", "transform", "epsilon",
                                        "clean_accuracy", "adversarial_accuracy", "samples", "seed"};

constexpr const char* kSeedRecord = "meta.seed";

std::uint64_t parse_u64(const std::string& s, const std::string& what) {
  std::size_t used = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (s.empty() || used != s.size() || s.front() == '-') throw FormatError("bad " + what + " '" + s + "'");
  return static_cast<std::uint64_t>(v);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

std::vector<std::size_t> evaluation_rows(std::size_t size, std::size_t subsample, std::uint64_t seed) {
  std::vector<std::size_t> rows;
  if (subsample == 0 || subsample >= size) {
    rows.resize(size);
    for (std::size_t i = 0; i < size; ++i) rows[i] = i;
    return rows;
  }
  Rng rng(derive_seed(seed, 0x5eb5));
  rows = rng.permutation(size);
  rows.resize(subsample);
  std::sort(rows.begin(), rows.end());
  return rows;
}

EvalReport evaluate(const TrainedModel& tm, const Task& test, const std::vector<AttackSpec>& attacks,
                    const EvalOptions& options) {
  if (tm.model->num_classes() != test.num_classes()) {
    throw FormatError("model has " + std::to_string(tm.model->num_classes()) + " classes, data has " +
                      std::to_string(test.num_classes()));
  }
  const auto rows = evaluation_rows(test.size(), options.subsample, options.seed);
  if (rows.empty()) throw ContractViolation("nothing to evaluate");
  const double clean = accuracy(*tm.model, test, rows);

  ReportRow base;
  base.dataset = test.name();
  base.loss = to_string(tm.loss.kind);
  base.clean_accuracy = clean;
  base.adversarial_accuracy = clean;
  base.samples = rows.size();
  base.seed = options.seed;

  EvalReport report;
  ReportRow first = base;
  first.attack = "clean";
  report.rows.push_back(first);

  const AttackLoss loss = tm.attack_loss(options.adaptive);
  for (std::size_t a = 0; a < attacks.size(); ++a) {
    AttackSpec spec = attacks[a];
    if (!spec.seeded) spec.set_seed(derive_seed(options.seed, 0xa7 + a));
    const Tensor adv = test.adversarial_inputs(*tm.model, loss, rows, spec, 0);
    const auto predicted = predict_classes(*tm.model, adv);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < rows.size(); ++i) correct += predicted[i] == test.labels()[rows[i]];

    ReportRow row = base;
    row.attack = attacks[a].id();
    if (spec.kind == AttackSpec::Kind::Text) {
      row.scoring = to_string(spec.text.scoring);
      row.transform = to_string(spec.text.transform);
    }
    row.epsilon = spec.epsilon();
    row.adversarial_accuracy = 100.0 * static_cast<double>(correct) / static_cast<double>(rows.size());
    report.rows.push_back(row);
  }
  return report;
}

double improvement(double baseline, double ours) { return std::round((ours - baseline) * 1e6) / 1e6; }

std::string render_report_csv(const std::vector<EvalReport>& reports) {
  if (reports.empty()) throw ContractViolation("report needs at least one evaluation");
  const bool compare = reports.size() >= 2;
  std::map<std::pair<std::string, std::string>, double> baseline;
  for (const auto& r : reports.front().rows) baseline.emplace(std::make_pair(r.dataset, r.attack), r.adversarial_accuracy);

  std::vector<std::string> header = kColumns;
  if (compare) header.push_back("improvement");
  std::string out = csv::format_row(header);
  for (std::size_t k = 0; k < reports.size(); ++k) {
    for (const auto& r : reports[k].rows) {
      std::vector<std::string> f{r.dataset,
                                 r.loss,
                                 r.attack,
                                 r.scoring,
                                 r.transform,
                                 format_double(r.epsilon),
                                 format_double(r.clean_accuracy),
                                 format_double(r.adversarial_accuracy),
                                 std::to_string(r.samples),
                                 std::to_string(r.seed)};
      if (compare) {
        const auto it = baseline.find({r.dataset, r.attack});
        f.push_back(k > 0 && it != baseline.end() ? format_double(improvement(it->second, r.adversarial_accuracy)) : "");
      }
      out += csv::format_row(f);
    }
  }
  return out;
}

std::vector<ReportRow> parse_report_csv(const std::string& content) {
  const auto records = csv::parse(content);
  if (records.empty()) throw FormatError("report is empty");
  const auto& header = records.front().fields;
  if (header.size() < kColumns.size() || !std::equal(kColumns.begin(), kColumns.end(), header.begin())) {
    throw FormatError("report header does not match");
  }
  std::vector<ReportRow> rows;
  for (std::size_t i = 1; i < records.size(); ++i) {
    const auto& rec = records[i];
    if (!rec.well_formed || rec.fields.size() != header.size()) {
      throw FormatError("report line " + std::to_string(rec.line) + " is malformed");
    }
    const auto& f = rec.fields;
    ReportRow r;
    r.dataset = f[0];
    r.loss = f[1];
    r.attack = f[2];
    r.scoring = f[3];
    r.transform = f[4];
    r.epsilon = parse_real(f[5]);
    r.clean_accuracy = parse_real(f[6]);
    r.adversarial_accuracy = parse_real(f[7]);
    r.samples = static_cast<std::size_t>(parse_u64(f[8], "sample count"));
    r.seed = parse_u64(f[9], "seed");
    rows.push_back(r);
  }
  return rows;
}

std::vector<ReportRow> read_report_csv(const std::string& path) { return parse_report_csv(read_file(path)); }

std::string render_report_json(const std::vector<EvalReport>& reports) {
  nlohmann::ordered_json doc;
  doc["reports"] = nlohmann::ordered_json::array();
  for (const auto& report : reports) {
    nlohmann::ordered_json entry;
    entry["config"] = report.config;
    entry["rows"] = nlohmann::ordered_json::array();
    for (const auto& r : report.rows) {
      nlohmann::ordered_json row;
      row["dataset"] = r.dataset;
      row["loss"] = r.loss;
      row["attack"] = r.attack;
      row["scoring"] = r.scoring;
      row["transform"] = r.transform;
      row["epsilon"] = r.epsilon;
      row["clean_accuracy"] = r.clean_accuracy;
      row["adversarial_accuracy"] = r.adversarial_accuracy;
      row["samples"] = r.samples;
      row["seed"] = r.seed;
      entry["rows"].push_back(row);
    }
    doc["reports"].push_back(entry);
  }
  return doc.dump(2) + "\n";
}

GradCheckResult check_gradients(const TrainedModel& tm, const Tensor& batch, const std::vector<std::size_t>& labels,
                                GradCheckSampling sampling) {
  const Classifier& model = *tm.model;
  std::vector<std::string> names;
  std::vector<Tensor> params;
  for (const auto& [name, t] : model.parameters()) {
    names.push_back(name);
    params.push_back(t);
  }
  const bool with_centers = tm.loss.uses_centers();
  if (with_centers) params.push_back(tm.centers.matrix);
  const LossConfig loss = tm.loss;
  return grad_check(
      [&](Tape& tape, std::span<const Var> vars) {
        std::map<std::string, Var> overrides;
        for (std::size_t i = 0; i < names.size(); ++i) overrides.emplace(names[i], vars[i]);
        ForwardOptions opts;
        opts.overrides = &overrides;
        const ForwardResult out = model.forward(tape, tape.constant(batch), opts);
        return losses::objective(loss, out.features, out.logits, labels, with_centers ? vars.back() : Var{});
      },
      params, 1e-5, sampling);
}

LoadedData load_data(const ExperimentConfig& config) {
  const DatasetManifest m = DatasetManifest::load(config.manifest);
  LoadedData out;
  if (m.kind == "text") {
    TextDataset all = load_text_csv(m.path, m.num_classes);
    if (!m.name.empty()) all.name = m.name;
    TextSplit parts = split(all, m.split);
    const AlphabetCodec codec(config.resolved_length());
    out.train = std::make_unique<TextTask>(std::move(parts.train), codec);
    out.test = std::make_unique<TextTask>(std::move(parts.test), codec);
  } else {
    TabularSchema schema;
    schema.features = m.feature_columns;
    schema.label = m.label_column;
    schema.label_mode = m.label_mode;
    RawTable raw = read_tabular_csv(m.path, schema);
    if (!m.name.empty()) raw.name = m.name;
    if (m.num_classes && raw.num_classes != m.num_classes) {
      throw FormatError("manifest declares " + std::to_string(m.num_classes) + " classes, data has " +
                        std::to_string(raw.num_classes));
    }
    TabularSplit parts = split(raw, m.split);
    out.train = std::make_unique<TabularTask>(std::move(parts.train));
    out.test = std::make_unique<TabularTask>(std::move(parts.test));
  }
  return out;
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << content;
  if (!out) throw IoError("failed writing " + path);
}

void write_reports(const std::string& dir, const std::vector<EvalReport>& reports) {
  std::filesystem::create_directories(dir);
  write_text_file(dir + "/report.csv", render_report_csv(reports));
  write_text_file(dir + "/report.json", render_report_json(reports));
}

TrainedModel load_trained_model(const ExperimentConfig& config, const Task& task, const std::string& checkpoint) {
  TrainedModel tm = make_trained_model(task, config.profile, config.loss, 0);
  tm.restore(load_checkpoint(checkpoint));
  return tm;
}

ExperimentOutcome run_experiment(const ExperimentConfig& config) {
  config.validate();
  const LoadedData data = load_data(config);
  TrainedModel tm = make_trained_model(*data.train, config.profile, config.loss, derive_seed(config.seed, 11));

  TrainSettings settings;
  settings.epochs = config.resolved_epochs();
  settings.batch_size = config.resolved_batch_size();
  settings.optimizer = config.optimizer;
  settings.seed = derive_seed(config.seed, 12);
  settings.adversarial = config.training_attack;
  if (settings.adversarial && !settings.adversarial->seeded) settings.adversarial->set_seed(derive_seed(config.seed, 13));
  settings.adversarial_ratio = config.adversarial_ratio;
  settings.adaptive = config.adaptive_attacks;

  ExperimentOutcome outcome;
  outcome.training = train(tm, *data.train, data.test.get(), settings);

  const std::string& dir = config.output_dir;
  std::filesystem::create_directories(dir);
  ParameterMap saved = tm.checkpoint();
  // Seeds are 64-bit; two 32-bit halves keep them exact in doubles.
  saved.emplace(kSeedRecord, Tensor({2}, {static_cast<double>(config.seed >> 32),
                                          static_cast<double>(config.seed & 0xffffffffu)}));
  save_checkpoint(dir + "/model.ckpt", saved);
  write_text_file(dir + "/train.log", "seed=" + std::to_string(config.seed) + "\n" + format_log(outcome.training));
  if (outcome.training.diverged) throw NumericError(outcome.training.message);

  EvalOptions eval;
  eval.subsample = config.subsample;
  eval.seed = config.seed;
  eval.adaptive = config.adaptive_attacks;
  outcome.report = evaluate(tm, *data.test, config.attacks, eval);
  outcome.report.config = config.source;
  write_reports(dir, {outcome.report});
  return outcome;
}

}  // namespace robust1d
