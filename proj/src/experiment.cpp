#include "ldanet/experiment.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <future>
#include <limits>
#include <numeric>

#include "ldanet/errors.hpp"
#include "ldanet/model_io.hpp"

namespace ldanet {

namespace {

nlohmann::json spec_to_json(const LayerSpec& s) {
  return {{"patch", {s.patch_h, s.patch_w}}, {"offset", {s.offset_h, s.offset_w}}, {"neurons", s.neurons}};
}

LayerSpec spec_from_json(const nlohmann::json& j) {
  LayerSpec s;
  s.patch_h = j.at("patch").at(0).get<int>();
  s.patch_w = j.at("patch").at(1).get<int>();
  s.offset_h = j.at("offset").at(0).get<int>();
  s.offset_w = j.at("offset").at(1).get<int>();
  s.neurons = j.at("neurons").get<int>();
  return s;
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& doc) {
  ExperimentConfig c;
  try {
    if (doc.contains("manifest")) c.manifest = doc["manifest"].get<std::string>();
    if (doc.contains("data")) {
      const auto& d = doc["data"];
      c.data_seed = d.value("seed", c.data_seed);
      c.pages = d.value("pages", c.pages);
      c.page_width = d.value("width", c.page_width);
      c.page_height = d.value("height", c.page_height);
    }
    if (doc.contains("architecture")) {
      c.architecture.clear();
      for (const auto& j : doc["architecture"]) c.architecture.push_back(spec_from_json(j));
    }
    if (doc.contains("init")) {
      const auto& i = doc["init"];
      c.lda_samples = i.value("k", c.lda_samples);
      c.ridge = i.value("ridge", c.ridge);
      if (i.contains("covariance")) c.covariance = covariance_mode_from_string(i["covariance"].get<std::string>());
      c.balanced = i.value("balanced", c.balanced);
    }
    if (doc.contains("train")) {
      const auto& t = doc["train"];
      c.train.learning_rate = t.value("learning_rate", c.train.learning_rate);
      c.train.batch_size = t.value("batch_size", c.train.batch_size);
      c.train.epochs = t.value("epochs", c.train.epochs);
      c.train.samples_per_epoch = t.value("samples_per_epoch", c.train.samples_per_epoch);
      c.train.seed = t.value("seed", c.train.seed);
    }
    c.eval_stride = doc.value("eval_stride", c.eval_stride);
    if (doc.contains("eval_split")) c.eval_split = split_from_string(doc["eval_split"].get<std::string>());
    if (doc.contains("output_dir")) c.output_dir = doc["output_dir"].get<std::string>();
    if (doc.contains("seeds")) c.seeds = doc["seeds"].get<std::vector<std::uint64_t>>();
    c.threads = doc.value("threads", c.threads);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInputError(std::string("config: ") + e.what());
  }
  return c;
}

nlohmann::json ExperimentConfig::to_json() const {
  auto arch = nlohmann::json::array();
  for (const auto& s : architecture) arch.push_back(spec_to_json(s));
  nlohmann::json doc = {
      {"data", {{"seed", data_seed}, {"pages", pages}, {"width", page_width}, {"height", page_height}}},
      {"architecture", arch},
      {"init", {{"k", lda_samples}, {"ridge", ridge}, {"covariance", to_string(covariance)}, {"balanced", balanced}}},
      {"train",
       {{"learning_rate", train.learning_rate},
        {"batch_size", train.batch_size},
        {"epochs", train.epochs},
        {"samples_per_epoch", train.samples_per_epoch},
        {"seed", train.seed}}},
      {"eval_stride", eval_stride},
      {"eval_split", to_string(eval_split)},
      {"output_dir", output_dir.string()},
      {"seeds", seeds},
      {"threads", threads}};
  if (!manifest.empty()) doc["manifest"] = manifest.string();
  return doc;
}

void ExperimentConfig::validate() const {
  if (manifest.empty()) {
    if (pages < 2) throw InvalidInputError("config: need at least 2 pages to have a test split");
    if (page_width < 64 || page_height < 64) throw InvalidInputError("config: pages must be >= 64x64");
  }
  const Network probe(3, kDocumentClassCount, architecture);  // validates the architecture
  if (probe.receptive_field() > std::min(page_width, page_height) && manifest.empty()) {
    throw InvalidInputError("config: receptive field larger than the pages");
  }
  if (!(ridge >= 0.0)) throw InvalidInputError("config: ridge must be >= 0");
  train.validate();
  if (eval_stride < 1) throw InvalidInputError("config: eval_stride must be >= 1");
  if (seeds.empty()) throw InvalidInputError("config: no seeds");
  if (threads < 1) throw InvalidInputError("config: threads must be >= 1");
}

RunSeeds derive_run_seeds(std::uint64_t run_seed) {
  return {mix_seed(run_seed, 1), mix_seed(run_seed, 2), mix_seed(run_seed, 3)};
}

std::vector<EpochRecord> train_and_track(Network& net, PatchStream& stream, const TrainConfig& config,
                                         const PageSet& eval_pages, int stride,
                                         const std::string& method, std::uint64_t run_seed,
                                         std::size_t completed_epochs) {
  std::vector<EpochRecord> records;
  net = train(
      std::move(net), stream, config,
      [&](const Network& current, const EpochStats& stats) {
        const Metrics m = evaluate(current, eval_pages, stride);
        records.push_back({run_seed, method, stats.epoch, m.mean_iu, m.accuracy, stats.mean_loss});
      },
      completed_epochs);
  return records;
}

PairedRun run_paired(const Dataset& dataset, const ExperimentConfig& config, std::uint64_t seed) {
  const RunSeeds seeds = derive_run_seeds(seed);
  const Network blank(3, dataset.class_count, config.architecture);
  const PageSet& eval_pages = dataset.split(config.eval_split);

  PatchSampler sampler(dataset.train, blank.receptive_field(), config.balanced);
  InitOptions options;
  options.sample_count = config.lda_samples;
  options.fit = {config.ridge, config.covariance};

  PairedRun run;
  run.seed = seed;
  auto lda = init_lda(blank, sampler, seeds.lda_sampler, options);
  run.lda_report = lda.report;
  Network random = init_random(blank, seeds.random_init);

  TrainConfig tc = config.train;
  tc.seed = seeds.training;
  run.lda = train_and_track(lda.network, sampler, tc, eval_pages, config.eval_stride, "lda", seed);
  run.random = train_and_track(random, sampler, tc, eval_pages, config.eval_stride, "random", seed);
  run.lda_final = std::move(lda.network);
  run.random_final = std::move(random);
  return run;
}

std::vector<PairedRun> run_experiment(const Dataset& dataset, const ExperimentConfig& config) {
  config.validate();
  std::vector<PairedRun> runs(config.seeds.size());
  const auto threads = static_cast<std::size_t>(config.threads);
  for (std::size_t start = 0; start < runs.size(); start += threads) {
    const std::size_t end = std::min(runs.size(), start + threads);
    if (end - start == 1) {
      runs[start] = run_paired(dataset, config, config.seeds[start]);
      continue;
    }
    std::vector<std::future<PairedRun>> pending;
    for (std::size_t i = start; i < end; ++i) {
      pending.push_back(std::async(std::launch::async, [&dataset, &config, i] {
        return run_paired(dataset, config, config.seeds[i]);
      }));
    }
    for (std::size_t i = start; i < end; ++i) runs[i] = pending[i - start].get();
  }
  return runs;
}

double mean(const std::vector<double>& v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double stddev(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double sq = 0.0;
  for (double x : v) sq += (x - m) * (x - m);
  return std::sqrt(sq / static_cast<double>(v.size() - 1));
}

ReproSummary summarize(const std::vector<PairedRun>& runs) {
  ReproSummary s;
  for (const auto& r : runs) {
    s.lda_untrained.push_back(r.lda.front().mean_iu);
    s.random_untrained.push_back(r.random.front().mean_iu);
    s.lda_final.push_back(r.lda.back().mean_iu);
    s.random_final.push_back(r.random.back().mean_iu);
    s.lda_final_accuracy.push_back(r.lda.back().accuracy);
    s.random_final_accuracy.push_back(r.random.back().accuracy);
  }
  return s;
}

nlohmann::json ReproSummary::to_json() const {
  std::size_t wins = 0;
  for (std::size_t i = 0; i < lda_final.size(); ++i) wins += lda_final[i] >= random_final[i] ? 1 : 0;
  return {{"untrained",
           {{"lda", {{"mean_iu", lda_untrained}, {"mean", mean(lda_untrained)}, {"std", stddev(lda_untrained)}}},
            {"random",
             {{"mean_iu", random_untrained}, {"mean", mean(random_untrained)}, {"std", stddev(random_untrained)}}}}},
          {"trained",
           {{"lda",
             {{"mean_iu", lda_final}, {"mean", mean(lda_final)}, {"accuracy", mean(lda_final_accuracy)}}},
            {"random",
             {{"mean_iu", random_final},
              {"mean", mean(random_final)},
              {"accuracy", mean(random_final_accuracy)}}}}},
          {"lda_wins", wins},
          {"runs", lda_final.size()}};
}

std::string metrics_csv_header() { return "run_seed,method,epoch,mean_iu,accuracy,train_loss\n"; }

std::string to_csv_row(const EpochRecord& r) {
  char buf[256];
  if (std::isnan(r.train_loss)) {
    std::snprintf(buf, sizeof buf, "%llu,%s,%zu,%.17g,%.17g,\n",
                  static_cast<unsigned long long>(r.run_seed), r.method.c_str(), r.epoch, r.mean_iu,
                  r.accuracy);
  } else {
    std::snprintf(buf, sizeof buf, "%llu,%s,%zu,%.17g,%.17g,%.17g\n",
                  static_cast<unsigned long long>(r.run_seed), r.method.c_str(), r.epoch, r.mean_iu,
                  r.accuracy, r.train_loss);
  }
  return buf;
}

ReproSummary repro(const ExperimentConfig& config) {
  config.validate();
  std::filesystem::create_directories(config.output_dir);
  Dataset dataset;
  if (config.manifest.empty()) {
    dataset = generate_dataset(config.data_seed, config.pages, config.page_width, config.page_height);
    write_dataset(config.output_dir / "data", dataset);
  } else {
    dataset = load_dataset(config.manifest);
  }
  write_json(config.output_dir / "config.json", config.to_json());

  const auto runs = run_experiment(dataset, config);
  std::ofstream csv(config.output_dir / "metrics.csv");
  if (!csv) throw DataError("cannot write metrics.csv");
  csv << metrics_csv_header();
  for (const auto& run : runs) {
    for (const auto& r : run.lda) csv << to_csv_row(r);
    for (const auto& r : run.random) csv << to_csv_row(r);
    write_json(config.output_dir / ("init_report_" + std::to_string(run.seed) + ".json"),
               run.lda_report.to_json());
  }
  const ReproSummary summary = summarize(runs);
  write_json(config.output_dir / "summary.json", summary.to_json());
  return summary;
}

}  // namespace ldanet
