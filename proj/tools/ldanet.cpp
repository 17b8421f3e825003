// ldanet: command-line driver for LDA-initialized patch networks.
//
//   gen       synthetic pages + manifest
//   init      LDA or random initialization, untrained metrics
//   train     SGD with per-epoch metrics (single model or a paired run)
//   eval      metrics JSON/CSV and overlay PNGs
//   features  first-layer feature sheets
//   verify    sanity checks on a model file
//   repro     the full multi-seed paired experiment
//
// Exit codes: 0 success, 2 usage, 3 data error, 4 numerical error.

#include <CLI11.hpp>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "ldanet/data.hpp"
#include "ldanet/errors.hpp"
#include "ldanet/eval.hpp"
#include "ldanet/experiment.hpp"
#include "ldanet/init.hpp"
#include "ldanet/model_io.hpp"

namespace fs = std::filesystem;
using namespace ldanet;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumerical = 4;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

fs::path output_root(const std::string& flag, const char* fallback) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("LDANET_OUTPUT_DIR")) return env;
  return fallback;
}

int env_threads(int fallback) {
  if (const char* env = std::getenv("LDANET_THREADS")) {
    const int n = std::atoi(env);
    if (n < 1) throw UsageError("LDANET_THREADS must be a positive integer");
    return n;
  }
  return fallback;
}

ExperimentConfig load_config(const std::string& path) {
  if (path.empty()) return {};
  return ExperimentConfig::from_json(read_json(path));
}

void write_metrics_csv(const fs::path& path, const Metrics& m, const std::vector<std::string>& names) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << "class,iu\n";
  for (std::size_t c = 0; c < m.per_class_iu.size(); ++c) {
    const std::string name = c < names.size() ? names[c] : std::to_string(c);
    out << name << ',';
    if (!std::isnan(m.per_class_iu[c])) out << m.per_class_iu[c];
    out << '\n';
  }
  out << "mean_iu," << m.mean_iu << "\naccuracy," << m.accuracy << '\n';
}

void write_epoch_csv(const fs::path& path, const std::vector<EpochRecord>& rows) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << metrics_csv_header();
  for (const auto& r : rows) out << to_csv_row(r);
}

// ---------------------------------------------------------------------------

struct GenArgs {
  std::uint64_t seed = 1;
  int pages = 8;
  int width = 480;
  int height = 640;
  std::string out;
};

int cmd_gen(const GenArgs& a) {
  if (a.pages < 1) throw UsageError("--pages must be at least 1");
  if (a.width < 64 || a.height < 64) throw UsageError("--width/--height must be at least 64");
  const fs::path dir = output_root(a.out, "data");
  const auto ds = generate_dataset(a.seed, a.pages, a.width, a.height);
  const auto manifest = write_dataset(dir, ds);
  std::cout << manifest.string() << '\n';
  return 0;
}

struct InitArgs {
  std::string config;
  std::string manifest;
  std::string method = "lda";
  std::optional<std::size_t> k;
  std::optional<double> ridge;
  std::string covariance;
  std::uint64_t seed = 1;
  std::string out = "model.json";
  std::string report;
  std::string metrics;
  std::optional<int> stride;
  bool no_balance = false;
};

int cmd_init(const InitArgs& a) {
  ExperimentConfig cfg = load_config(a.config);
  if (!a.manifest.empty()) cfg.manifest = a.manifest;
  if (cfg.manifest.empty()) throw UsageError("init needs --manifest (or a config with one)");
  if (a.k) cfg.lda_samples = *a.k;
  if (a.ridge) cfg.ridge = *a.ridge;
  if (!a.covariance.empty()) cfg.covariance = covariance_mode_from_string(a.covariance);
  if (a.stride) cfg.eval_stride = *a.stride;
  if (a.no_balance) cfg.balanced = false;
  if (a.method != "lda" && a.method != "random") throw UsageError("--method must be lda or random");
  if (cfg.eval_stride < 1) throw UsageError("--stride must be >= 1");

  const Dataset ds = load_dataset(cfg.manifest);
  const Network blank(3, ds.class_count, cfg.architecture);
  Provenance prov;
  prov.init_method = a.method;
  prov.seed = a.seed;
  Network net;
  InitReport report;
  if (a.method == "lda") {
    PatchSampler sampler(ds.train, blank.receptive_field(), cfg.balanced);
    InitOptions options;
    options.sample_count = cfg.lda_samples;
    options.fit = {cfg.ridge, cfg.covariance};
    auto result = init_lda(blank, sampler, a.seed, options);
    net = std::move(result.network);
    report = std::move(result.report);
    prov.lda_sample_count = cfg.lda_samples;
  } else {
    net = init_random(blank, a.seed);
    report.method = "random";
    report.seed = a.seed;
  }
  const fs::path out = a.out;
  save_model(out, net, prov);
  const fs::path report_path = a.report.empty() ? fs::path(out).replace_extension(".report.json") : fs::path(a.report);
  write_json(report_path, report.to_json());
  if (!ds.test.pages.empty()) {
    const Metrics m = evaluate(net, ds.test, cfg.eval_stride);
    const fs::path metrics_path =
        a.metrics.empty() ? fs::path(out).replace_extension(".metrics.json") : fs::path(a.metrics);
    write_json(metrics_path, m.to_json());
    std::cout << "untrained mean_iu " << m.mean_iu << " accuracy " << m.accuracy << '\n';
  }
  std::cout << out.string() << '\n';
  return 0;
}

struct TrainArgs {
  std::string config;
  std::string manifest;
  std::string model;
  std::vector<std::string> paired;
  std::optional<std::size_t> epochs;
  std::optional<std::size_t> samples;
  std::optional<std::size_t> batch;
  std::optional<double> lr;
  std::uint64_t seed = 1;
  std::optional<int> stride;
  std::string out;
  std::string csv;
  bool no_balance = false;
};

int cmd_train(const TrainArgs& a) {
  ExperimentConfig cfg = load_config(a.config);
  if (!a.manifest.empty()) cfg.manifest = a.manifest;
  if (cfg.manifest.empty()) throw UsageError("train needs --manifest (or a config with one)");
  if (a.epochs) cfg.train.epochs = *a.epochs;
  if (a.samples) cfg.train.samples_per_epoch = *a.samples;
  if (a.batch) cfg.train.batch_size = *a.batch;
  if (a.lr) cfg.train.learning_rate = *a.lr;
  if (a.stride) cfg.eval_stride = *a.stride;
  if (a.no_balance) cfg.balanced = false;
  cfg.train.seed = a.seed;
  try {
    cfg.train.validate();
  } catch (const InvalidInputError& e) {
    throw UsageError(e.what());
  }
  if (cfg.eval_stride < 1) throw UsageError("--stride must be >= 1");
  if (a.model.empty() == a.paired.empty()) throw UsageError("give exactly one of --model or --paired");

  const Dataset ds = load_dataset(cfg.manifest);
  std::vector<std::string> inputs = a.paired.empty() ? std::vector<std::string>{a.model} : a.paired;
  const bool paired = !a.paired.empty();
  const fs::path out_dir = output_root(a.out, "train_out");

  std::vector<EpochRecord> rows;
  for (const auto& input : inputs) {
    ModelFile mf = load_model(input);
    if (mf.network.class_count() != ds.class_count) throw DataError(input + ": class count differs from dataset");
    PatchSampler sampler(ds.train, mf.network.receptive_field(), cfg.balanced);
    const std::string method = mf.provenance.init_method;
    auto records = train_and_track(mf.network, sampler, cfg.train, ds.test, cfg.eval_stride, method, a.seed,
                                   mf.provenance.epochs_trained);
    rows.insert(rows.end(), records.begin(), records.end());
    mf.provenance.epochs_trained += cfg.train.epochs;
    fs::path model_out;
    if (paired) {
      model_out = out_dir / (fs::path(input).stem().string() + "_trained.json");
    } else {
      model_out = a.out.empty() ? fs::path(input).replace_extension(".trained.json") : fs::path(a.out);
    }
    save_model(model_out, mf.network, mf.provenance);
    std::cout << model_out.string() << " final mean_iu " << records.back().mean_iu << '\n';
  }
  fs::path csv = a.csv;
  if (csv.empty()) {
    csv = paired ? out_dir / "metrics.csv" : fs::path(a.out.empty() ? a.model : a.out).replace_extension(".csv");
  }
  write_epoch_csv(csv, rows);
  std::cout << csv.string() << '\n';
  return 0;
}

struct EvalArgs {
  std::string model;
  std::string manifest;
  std::string split = "test";
  int stride = 1;
  std::string out;
  bool no_overlays = false;
};

int cmd_eval(const EvalArgs& a) {
  if (a.stride < 1) throw UsageError("--stride must be >= 1");
  Split split;
  try {
    split = split_from_string(a.split);
  } catch (const InvalidInputError& e) {
    throw UsageError(e.what());
  }
  const ModelFile mf = load_model(a.model);
  const Dataset ds = load_dataset(a.manifest);
  const PageSet& pages = ds.split(split);
  if (pages.pages.empty()) throw DataError("split '" + a.split + "' has no pages");
  const fs::path dir = output_root(a.out, "eval_out");
  fs::create_directories(dir);
  const Metrics m = evaluate(mf.network, pages, a.stride);
  write_json(dir / "metrics.json", m.to_json());
  write_metrics_csv(dir / "metrics.csv", m, ds.class_names);
  if (!a.no_overlays) {
    for (const Page& page : pages.pages) {
      const LabelMap pred = predict_page(mf.network, page, a.stride);
      write_png(dir / (page.name + "_overlay.png"), render_overlay(page.truth, pred, kBackground));
      write_png(dir / (page.name + "_pred.png"), pred.to_color());
    }
  }
  std::cout << "mean_iu " << m.mean_iu << " accuracy " << m.accuracy << '\n';
  return 0;
}

struct FeaturesArgs {
  std::string model;
  std::string out;
  int scale = 8;
};

int cmd_features(const FeaturesArgs& a) {
  if (a.scale < 1) throw UsageError("--scale must be >= 1");
  const ModelFile mf = load_model(a.model);
  const fs::path dir = output_root(a.out, "features_out");
  fs::create_directories(dir);
  int written = 0;
  for (std::size_t l = 0; l < mf.network.hidden_count(); ++l) {
    const Layer& layer = mf.network.layer(l);
    if (layer.input_channels != 3) continue;
    const auto tiles = render_features(layer, 3);
    const fs::path path = dir / ("layer_" + std::to_string(l + 1) + ".png");
    write_png(path, feature_sheet(tiles, a.scale));
    std::cout << path.string() << '\n';
    ++written;
  }
  if (written == 0) throw DataError("model has no RGB-input layer to render");
  return 0;
}

struct VerifyArgs {
  std::string model;
};

int cmd_verify(const VerifyArgs& a) {
  const ModelFile mf = load_model(a.model);  // shapes and finiteness
  const Network& net = mf.network;
  int problems = 0;
  auto fail = [&](const std::string& what) {
    std::cout << "FAIL " << what << '\n';
    ++problems;
  };
  if (mf.provenance.epochs_trained == 0) {
    if (mf.provenance.init_method == "random") {
      for (std::size_t l = 0; l < net.layer_count(); ++l) {
        const Layer& layer = net.layer(l);
        const double bound = 1.0 / std::sqrt(static_cast<double>(layer.fan_in()));
        if (layer.weights.cwiseAbs().maxCoeff() > bound) {
          fail("layer " + std::to_string(l + 1) + " weight outside +-1/sqrt(fan_in)");
        }
        if (!layer.bias.isZero(0.0)) fail("layer " + std::to_string(l + 1) + " bias not zero");
      }
    } else if (mf.provenance.init_method == "lda") {
      for (std::size_t l = 0; l < net.hidden_count(); ++l) {
        const Layer& layer = net.layer(l);
        if (!layer.bias.isZero(0.0)) fail("layer " + std::to_string(l + 1) + " bias not zero");
        for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
          if (std::abs(layer.weights.row(r).norm() - 1.0) > 1e-9) {
            fail("layer " + std::to_string(l + 1) + " row " + std::to_string(r) + " not unit norm");
          }
        }
      }
    }
  }
  std::cout << (problems == 0 ? "OK " : "INVALID ") << a.model << " (" << mf.provenance.init_method
            << ", " << net.parameter_count() << " parameters)\n";
  return problems == 0 ? 0 : kExitNumerical;
}

struct ReproArgs {
  std::string config;
  std::string out;
  std::string manifest;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> runs;
  std::optional<std::size_t> epochs;
  std::optional<std::size_t> samples;
  std::optional<std::size_t> batch;
  std::optional<std::size_t> k;
  std::optional<int> pages;
  std::optional<int> width;
  std::optional<int> height;
  std::optional<int> stride;
  std::optional<int> threads;
};

int cmd_repro(const ReproArgs& a) {
  ExperimentConfig cfg = load_config(a.config);
  if (!a.manifest.empty()) cfg.manifest = a.manifest;
  cfg.output_dir = output_root(a.out, cfg.output_dir.string().c_str());
  if (a.seed) {
    cfg.data_seed = *a.seed;
    const std::size_t n = a.runs.value_or(cfg.seeds.size());
    cfg.seeds.clear();
    for (std::size_t i = 0; i < n; ++i) cfg.seeds.push_back(mix_seed(*a.seed, 100 + i));
  } else if (a.runs) {
    cfg.seeds.resize(*a.runs);
    for (std::size_t i = 0; i < *a.runs; ++i) cfg.seeds[i] = i + 1;
  }
  if (a.epochs) cfg.train.epochs = *a.epochs;
  if (a.samples) cfg.train.samples_per_epoch = *a.samples;
  if (a.batch) cfg.train.batch_size = *a.batch;
  if (a.k) cfg.lda_samples = *a.k;
  if (a.pages) cfg.pages = *a.pages;
  if (a.width) cfg.page_width = *a.width;
  if (a.height) cfg.page_height = *a.height;
  if (a.stride) cfg.eval_stride = *a.stride;
  cfg.threads = a.threads ? *a.threads : env_threads(cfg.threads);
  try {
    cfg.validate();
  } catch (const InvalidInputError& e) {
    throw UsageError(e.what());
  }
  const ReproSummary s = repro(cfg);
  const auto j = s.to_json();
  std::cout << "untrained mean IU  lda " << j["untrained"]["lda"]["mean"] << " (sd " << j["untrained"]["lda"]["std"]
            << ")  random " << j["untrained"]["random"]["mean"] << " (sd " << j["untrained"]["random"]["std"] << ")\n"
            << "trained mean IU    lda " << j["trained"]["lda"]["mean"] << "  random " << j["trained"]["random"]["mean"]
            << "  lda wins " << j["lda_wins"] << "/" << j["runs"] << '\n'
            << (cfg.output_dir / "metrics.csv").string() << '\n';
  return 0;
}

template <typename F>
int guarded(F&& f) {
  try {
    return f();
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const ShapeError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const InvalidInputError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LDA-initialized patch networks for document layout analysis"};
  app.require_subcommand(1);
  int code = 0;

  GenArgs gen;
  auto* g = app.add_subcommand("gen", "Generate synthetic pages and a manifest");
  g->add_option("--seed", gen.seed, "Master seed");
  g->add_option("--pages", gen.pages, "Number of pages");
  g->add_option("--width", gen.width, "Page width");
  g->add_option("--height", gen.height, "Page height");
  g->add_option("--size", [&gen](const CLI::results_t& r) {
    if (r.size() != 2) return false;
    gen.width = std::stoi(r[0]);
    gen.height = std::stoi(r[1]);
    return true;
  }, "Page size as WIDTH HEIGHT")->expected(2);
  g->add_option("--out", gen.out, "Output directory");
  g->callback([&] { code = guarded([&] { return cmd_gen(gen); }); });

  InitArgs init;
  auto* i = app.add_subcommand("init", "Initialize a network");
  i->add_option("--config", init.config, "Experiment config JSON");
  i->add_option("--manifest", init.manifest, "Dataset manifest");
  i->add_option("--method", init.method, "lda or random");
  i->add_option("--k", init.k, "Patches used for LDA");
  i->add_option("--ridge", init.ridge, "Relative ridge");
  i->add_option("--covariance", init.covariance, "per_class or shared");
  i->add_option("--seed", init.seed, "Sampler seed (lda) or weight seed (random)");
  i->add_option("--out", init.out, "Model file");
  i->add_option("--report", init.report, "Init report JSON");
  i->add_option("--metrics", init.metrics, "Untrained metrics JSON");
  i->add_option("--stride", init.stride, "Evaluation stride");
  i->add_flag("--no-balance", init.no_balance, "Sample patches uniformly instead of per class");
  i->callback([&] { code = guarded([&] { return cmd_init(init); }); });

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train with SGD, evaluating after every epoch");
  t->add_option("--config", tr.config, "Experiment config JSON");
  t->add_option("--manifest", tr.manifest, "Dataset manifest");
  t->add_option("--model", tr.model, "Model to train");
  t->add_option("--paired", tr.paired, "Two models trained on the same patch stream")->expected(2);
  t->add_option("--epochs", tr.epochs, "Epochs");
  t->add_option("--samples-per-epoch", tr.samples, "Samples per epoch");
  t->add_option("--batch-size", tr.batch, "Mini-batch size");
  t->add_option("--lr", tr.lr, "Learning rate");
  t->add_option("--seed", tr.seed, "Patch stream seed");
  t->add_option("--stride", tr.stride, "Evaluation stride");
  t->add_option("--out", tr.out, "Output model (single) or directory (paired)");
  t->add_option("--csv", tr.csv, "Per-epoch metrics CSV");
  t->add_flag("--no-balance", tr.no_balance, "Sample patches uniformly instead of per class");
  t->callback([&] { code = guarded([&] { return cmd_train(tr); }); });

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Evaluate a model on a split");
  e->add_option("--model", ev.model, "Model file")->required();
  e->add_option("--manifest", ev.manifest, "Dataset manifest")->required();
  e->add_option("--split", ev.split, "train, validation or test");
  e->add_option("--stride", ev.stride, "Evaluation stride");
  e->add_option("--out", ev.out, "Output directory");
  e->add_flag("--no-overlays", ev.no_overlays, "Skip overlay PNGs");
  e->callback([&] { code = guarded([&] { return cmd_eval(ev); }); });

  FeaturesArgs fe;
  auto* f = app.add_subcommand("features", "Render first-layer features");
  f->add_option("--model", fe.model, "Model file")->required();
  f->add_option("--out", fe.out, "Output directory");
  f->add_option("--scale", fe.scale, "Pixel magnification");
  f->callback([&] { code = guarded([&] { return cmd_features(fe); }); });

  VerifyArgs ve;
  auto* v = app.add_subcommand("verify", "Check a model file");
  v->add_option("--model", ve.model, "Model file")->required();
  v->callback([&] { code = guarded([&] { return cmd_verify(ve); }); });

  ReproArgs re;
  auto* r = app.add_subcommand("repro", "Run the paired multi-seed experiment");
  r->add_option("--config", re.config, "Experiment config JSON");
  r->add_option("--out", re.out, "Output directory");
  r->add_option("--manifest", re.manifest, "Use an existing dataset");
  r->add_option("--seed", re.seed, "Master seed (dataset and run seeds)");
  r->add_option("--runs", re.runs, "Number of paired runs");
  r->add_option("--epochs", re.epochs, "Epochs");
  r->add_option("--samples-per-epoch", re.samples, "Samples per epoch");
  r->add_option("--batch-size", re.batch, "Mini-batch size");
  r->add_option("--k", re.k, "Patches used for LDA");
  r->add_option("--pages", re.pages, "Synthetic pages");
  r->add_option("--width", re.width, "Page width");
  r->add_option("--height", re.height, "Page height");
  r->add_option("--stride", re.stride, "Evaluation stride");
  r->add_option("--threads", re.threads, "Concurrent runs");
  r->callback([&] { code = guarded([&] { return cmd_repro(re); }); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int rc = app.exit(err);
    return rc == 0 ? 0 : kExitUsage;
  }
  return code;
}
