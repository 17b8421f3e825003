#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "ldanet/errors.hpp"
#include "ldanet/experiment.hpp"
#include "ldanet/init.hpp"
#include "ldanet/model_io.hpp"

using namespace ldanet;
namespace fs = std::filesystem;

TEST_CASE("model file round trip is exact") {
  const fs::path dir = fs::temp_directory_path() / "ldanet_test_model_io";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const Network net = init_random(Network(3, 4, document_architecture()), 17);
  Provenance prov;
  prov.init_method = "random";
  prov.seed = 17;
  prov.epochs_trained = 3;
  save_model(dir / "m.json", net, prov);
  const ModelFile back = load_model(dir / "m.json");
  REQUIRE(back.network.layer_count() == net.layer_count());
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    CHECK(back.network.layer(l).weights == net.layer(l).weights);
    CHECK(back.network.layer(l).bias == net.layer(l).bias);
    CHECK(back.network.layer(l).activation == net.layer(l).activation);
  }
  CHECK(back.provenance.init_method == "random");
  CHECK(back.provenance.seed == 17);
  CHECK(back.provenance.epochs_trained == 3);

  const auto doc = model_to_json(net, prov);
  CHECK(doc["format_version"] == kModelFormatVersion);
  CHECK(doc["input_channels"] == 3);
  CHECK(doc["class_count"] == 4);
  CHECK(doc["layers"].size() == 4);
  CHECK(doc["layers"][0]["weights"].size() == 24);
  CHECK(doc["layers"][0]["weights"][0].size() == 75);
  CHECK(doc["layers"][3]["activation"] == "linear");
  CHECK(doc["provenance"]["init_method"] == "random");
}

TEST_CASE("model file errors") {
  const Network net(3, 4, document_architecture());
  auto doc = model_to_json(net, {});
  doc["format_version"] = 99;
  CHECK_THROWS_AS(model_from_json(doc), DataError);

  doc = model_to_json(net, {});
  doc["layers"][1]["weights"][0].erase(0);
  CHECK_THROWS_AS(model_from_json(doc), DataError);

  doc = model_to_json(net, {});
  doc["layers"][0]["bias"][0] = nullptr;
  CHECK_THROWS_AS(model_from_json(doc), DataError);

  CHECK_THROWS_AS(load_model("/nonexistent/model.json"), DataError);
}

TEST_CASE("experiment config json round trip and validation") {
  ExperimentConfig c;
  c.seeds = {4, 5};
  c.train.epochs = 2;
  c.covariance = CovarianceMode::shared;
  const auto back = ExperimentConfig::from_json(c.to_json());
  CHECK(back.to_json() == c.to_json());
  CHECK_NOTHROW(back.validate());

  ExperimentConfig bad = c;
  bad.seeds.clear();
  CHECK_THROWS_AS(bad.validate(), InvalidInputError);
  bad = c;
  bad.pages = 1;
  CHECK_THROWS_AS(bad.validate(), InvalidInputError);
  bad = c;
  bad.architecture = {{5, 5, 3, 3, 100}};
  CHECK_THROWS_AS(bad.validate(), InvalidInputError);
  CHECK_THROWS_AS(ExperimentConfig::from_json({{"train", {{"epochs", "many"}}}}), InvalidInputError);
}

TEST_CASE("run seeds and csv rows") {
  const RunSeeds a = derive_run_seeds(1);
  CHECK(a.lda_sampler != a.random_init);
  CHECK(a.random_init != a.training);
  EpochRecord r{3, "lda", 0, 0.5, 0.75, std::nan("")};
  CHECK(to_csv_row(r) == "3,lda,0,0.5,0.75,\n");
  r.train_loss = 0.25;
  r.epoch = 2;
  CHECK(to_csv_row(r) == "3,lda,2,0.5,0.75,0.25\n");
  CHECK(stddev({1.0, 3.0}) == doctest::Approx(std::sqrt(2.0)));
  CHECK(mean({1.0, 2.0, 6.0}) == 3.0);
}
