#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "robust1d/experiment.hpp"
#include "robust1d/gradcheck.hpp"
#include "robust1d/training.hpp"

namespace robust1d {

struct ReportRow {
  std::string dataset;
  std::string loss;
  /// "clean" for the unattacked row, otherwise the attack id.
  std::string attack;
  /// Text attacks only.
  std::string scoring;
  std::string transform;
  double epsilon = 0.0;
  double clean_accuracy = 0.0;
  double adversarial_accuracy = 0.0;
  std::size_t samples = 0;
  std::uint64_t seed = 0;

  bool operator==(const ReportRow&) const = default;
};

struct EvalReport {
  std::vector<ReportRow> rows;
  /// Config text the report came from.
  std::string config;
};

struct EvalOptions {
  /// 0 evaluates every test row.
  std::size_t subsample = 0;
  std::uint64_t seed = 0;
  bool adaptive = true;
};

/// Evaluated rows: all of them, or a seeded sorted sample of `subsample`.
std::vector<std::size_t> evaluation_rows(std::size_t size, std::size_t subsample, std::uint64_t seed);

/// One clean row plus one row per attack, all over the same samples. Attacks
/// without their own seed use options.seed.
EvalReport evaluate(const TrainedModel& tm, const Task& test, const std::vector<AttackSpec>& attacks,
                    const EvalOptions& options);

/// ours - baseline, rounded to 1e-6 so decimal inputs give decimal output.
double improvement(double baseline, double ours);

/// Rows of every report in order. With two or more reports an improvement
/// column holds adversarial accuracy minus the first report's row for the same
/// dataset and attack; it is blank for the first report's own rows.
std::string render_report_csv(const std::vector<EvalReport>& reports);
std::vector<ReportRow> parse_report_csv(const std::string& content);
std::vector<ReportRow> read_report_csv(const std::string& path);
std::string render_report_json(const std::vector<EvalReport>& reports);

/// Central-difference check of a trained model's full objective, including the
/// class centers when the loss uses them.
GradCheckResult check_gradients(const TrainedModel& tm, const Tensor& batch, const std::vector<std::size_t>& labels,
                                GradCheckSampling sampling);

struct LoadedData {
  std::unique_ptr<Task> train;
  std::unique_ptr<Task> test;
};

/// Reads and splits the manifest's dataset for the config's profile.
LoadedData load_data(const ExperimentConfig& config);

struct ExperimentOutcome {
  TrainResult training;
  EvalReport report;
};

/// Trains (adversarially when config.training_attack is set), evaluates and
/// writes model.ckpt, train.log, report.csv and report.json under
/// config.output_dir.
ExperimentOutcome run_experiment(const ExperimentConfig& config);

/// Loads model.ckpt-style parameters into a freshly built model.
TrainedModel load_trained_model(const ExperimentConfig& config, const Task& task, const std::string& checkpoint);

void write_reports(const std::string& dir, const std::vector<EvalReport>& reports);
void write_text_file(const std::string& path, const std::string& content);

}  // namespace robust1d
