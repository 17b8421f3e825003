#pragma once

// Experiment driver: configuration, paired LDA/random runs on a shared patch
// stream and the multi-seed reproduction report.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "ldanet/data.hpp"
#include "ldanet/eval.hpp"
#include "ldanet/init.hpp"
#include "ldanet/network.hpp"

namespace ldanet {

struct ExperimentConfig {
  // Dataset: an existing manifest, or a synthetic set generated from these.
  std::filesystem::path manifest;
  std::uint64_t data_seed = 1;
  int pages = 8;
  int page_width = 192;
  int page_height = 256;

  std::vector<LayerSpec> architecture = document_architecture();
  std::size_t lda_samples = 16000;
  double ridge = kDefaultRidge;
  CovarianceMode covariance = CovarianceMode::per_class;
  bool balanced = true;

  // 10 epochs x 10k samples in batches of 40 is 2500 SGD steps.
  TrainConfig train{0.01, 40, 10, 10000, 1};
  int eval_stride = 1;
  Split eval_split = Split::test;

  std::filesystem::path output_dir = "repro_out";
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  int threads = 1;

  static ExperimentConfig from_json(const nlohmann::json& doc);
  nlohmann::json to_json() const;
  /// Checks every module precondition before any work starts.
  void validate() const;
};

/// Seeds of one paired run, all derived from the run seed.
struct RunSeeds {
  std::uint64_t lda_sampler;
  std::uint64_t random_init;
  std::uint64_t training;
};
RunSeeds derive_run_seeds(std::uint64_t run_seed);

struct EpochRecord {
  std::uint64_t run_seed = 0;
  std::string method;
  std::size_t epoch = 0;
  double mean_iu = 0.0;
  double accuracy = 0.0;
  double train_loss = 0.0;  // NaN for the untrained row
};

struct PairedRun {
  std::uint64_t seed = 0;
  InitReport lda_report;
  Network lda_final;
  Network random_final;
  std::vector<EpochRecord> lda;
  std::vector<EpochRecord> random;
};

/// Trains `net` on `stream`, evaluating on `eval_pages` before training and
/// after every epoch.
std::vector<EpochRecord> train_and_track(Network& net, PatchStream& stream, const TrainConfig& config,
                                         const PageSet& eval_pages, int stride,
                                         const std::string& method, std::uint64_t run_seed,
                                         std::size_t completed_epochs = 0);

/// One LDA-initialized and one random-initialized network, trained on the
/// identical patch stream.
PairedRun run_paired(const Dataset& dataset, const ExperimentConfig& config, std::uint64_t seed);

struct ReproSummary {
  std::vector<double> lda_untrained;
  std::vector<double> random_untrained;
  std::vector<double> lda_final;
  std::vector<double> random_final;
  std::vector<double> lda_final_accuracy;
  std::vector<double> random_final_accuracy;

  nlohmann::json to_json() const;
};

ReproSummary summarize(const std::vector<PairedRun>& runs);

/// Runs every seed of the configuration, optionally concurrently.
std::vector<PairedRun> run_experiment(const Dataset& dataset, const ExperimentConfig& config);

/// Full pipeline: dataset (generated when no manifest is given), paired runs,
/// metrics.csv, summary.json and per-run init reports under output_dir.
ReproSummary repro(const ExperimentConfig& config);

std::string metrics_csv_header();
std::string to_csv_row(const EpochRecord& r);

double mean(const std::vector<double>& v);
double stddev(const std::vector<double>& v);

}  // namespace ldanet
