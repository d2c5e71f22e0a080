#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "corrpair/io.hpp"
#include "corrpair/model.hpp"

namespace corrpair {

enum class ExperimentKind { ThresholdSweep, OptimalityDemo, GftContinuity, MdeValidation, TraceCorrIdentity };

std::string to_string(ExperimentKind k);
ExperimentKind experiment_from_string(std::string_view name);

struct ExperimentConfig {
  int schema = 1;
  ExperimentKind experiment = ExperimentKind::TraceCorrIdentity;
  Json model;  // size-independent model document, may be null
  std::vector<int> n_list;
  std::vector<double> alpha_list;
  std::vector<double> gamma_list;  // alpha = N^{-gamma}; takes precedence
  int mc_samples = 100;
  std::uint64_t master_seed = 1;
  std::string output_dir = "runs/default";
  std::map<std::string, double> tolerances;
  Json params = Json::object();

  static ExperimentConfig from_json(const Json& doc);
  Json to_json() const;
  // Hash of the canonical JSON form.
  std::string hash() const;

  std::vector<double> alphas_for(int n) const;
  double param(const std::string& key, double fallback) const;
  double tolerance(const std::string& key, double fallback) const;
  PairModelSpec model_for(int n) const;
};

struct RunLimits {
  bool allow_large = false;
  int max_n = 1000;
  int max_samples = 100000;
};

// Checks the config fields and every model it references.
ValidationReport validate_config(const ExperimentConfig& config, const RunLimits& limits = {});

// One per-sample row; fields that do not apply are NaN.
struct SampleRow {
  std::uint64_t seed = 0;
  int n = 0;
  double alpha;
  double t;
  double e1;
  double e2;
  double x1;
  double x2;
  double r_value;
  double trace_sq1;
  double trace_sq2;

  SampleRow();
};

// Header of samples.csv.
extern const char* const kSampleCsvHeader;

struct ExperimentRecord {
  std::string config_hash;
  Json config;
  std::vector<SampleRow> rows;
  Json summary;  // deterministic: no timing
  double wall_clock_seconds = 0.0;
  std::string software_version;
  // Additional CSV outputs keyed by file name.
  std::map<std::string, std::string> extra_files;

  // Writes config.json, samples.csv, summary.json, timing.json and extra_files.
  void write(const std::string& dir) const;
  std::string samples_csv() const;
  Json summary_document() const;
};

std::string software_version();

ExperimentRecord run_experiment(const ExperimentConfig& config);
ExperimentRecord run_threshold_sweep(const ExperimentConfig& config);
ExperimentRecord run_optimality_demo(const ExperimentConfig& config);
ExperimentRecord run_gft_continuity(const ExperimentConfig& config);
ExperimentRecord run_mde_validation(const ExperimentConfig& config);
ExperimentRecord run_trace_corr_identity(const ExperimentConfig& config);

int cli_main(int argc, char** argv);

}  // namespace corrpair
