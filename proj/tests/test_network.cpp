#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "ldanet/data.hpp"
#include "ldanet/errors.hpp"
#include "ldanet/init.hpp"
#include "ldanet/network.hpp"
#include "support.hpp"

using namespace ldanet;

namespace {

// Two hidden layers on a 5x5x2 input: 3x3/1 -> 3x3x4, 3x3/1 -> 1x1x3, head 4.
Network tiny_network(std::uint64_t seed) {
  Network net(2, 4, {{3, 3, 1, 1, 4}, {3, 3, 1, 1, 3}});
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-0.8, 0.8);
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    for (auto& w : net.layer(l).weights.reshaped()) w = u(rng);
    for (auto& b : net.layer(l).bias) b = u(rng);
  }
  return net;
}

double& parameter(Network& net, std::size_t layer, Eigen::Index index, bool bias) {
  Layer& l = net.layer(layer);
  return bias ? l.bias(index) : l.weights.reshaped()(index);
}

PatchBatch xor_patches() {
  PatchBatch b;
  b.height = b.width = 2;
  b.channels = 1;
  b.values = MatrixXd::Zero(1, 16);
  int i = 0;
  for (double a : {-1.0, 1.0})
    for (double c : {-1.0, 1.0}) {
      b.values(0, i * 4 + 0) = a;
      b.values(0, i * 4 + 1) = c;
      b.labels.push_back((a > 0) != (c > 0) ? 1 : 0);
      ++i;
    }
  return b;
}

}  // namespace

TEST_CASE("softsign values and shape") {
  CHECK(softsign(0.0) == 0.0);
  CHECK(softsign(1.0) == 0.5);
  CHECK(softsign(-3.0) == -0.75);
  for (double x = -50; x <= 50; x += 0.37) {
    CHECK(std::abs(softsign(x)) < 1.0);
    CHECK(softsign(-x) == -softsign(x));
    CHECK(softsign(x + 0.37) > softsign(x));
  }
  CHECK(scale_pixel(0) == -1.0);
  CHECK(scale_pixel(255) == 1.0);
}

TEST_CASE("document architecture arithmetic") {
  const Network net(3, 4, document_architecture());
  CHECK(net.receptive_field() == 23);
  CHECK(receptive_field(document_architecture(), false) == 23);
  const auto& g = net.grids();
  REQUIRE(g.size() >= 4);
  CHECK(g[1].height == 7);
  CHECK(g[1].width == 7);
  CHECK(g[1].channels == 24);
  CHECK(g[2].height == 3);
  CHECK(g[2].channels == 48);
  CHECK(g[3].height == 1);
  CHECK(g[3].width == 1);
  CHECK(g[3].channels == 72);
  CHECK(net.head().weights.rows() == 4);
  CHECK(net.head().weights.cols() == 72);

  std::mt19937_64 rng(1);
  const Network random = init_random(net, 3);
  const auto batch = testing::random_batch(rng, 23, 3, 5, 4);
  const auto f = forward(random, batch);
  CHECK(f.hidden[0].values.cols() == 5 * 49);
  CHECK(f.hidden[0].values.rows() == 24);
  CHECK(f.hidden[1].values.cols() == 5 * 9);
  CHECK(f.hidden[2].values.cols() == 5);
  CHECK(f.scores.rows() == 4);
  CHECK(f.scores.cols() == 5);
}

TEST_CASE("architecture validation") {
  CHECK_THROWS_AS(Network(3, 4, {{5, 5, 3, 3, 76}}), InvalidInputError);
  CHECK_THROWS_AS(Network(3, 4, {{0, 5, 3, 3, 4}}), InvalidInputError);
  CHECK_THROWS_AS(Network(3, 4, {{5, 5, 0, 3, 4}}), InvalidInputError);
  CHECK_THROWS_AS(Network(3, 0, {{5, 5, 3, 3, 4}}), InvalidInputError);
}

TEST_CASE("forward: zero network and scalar network") {
  const Network zero(3, 4, document_architecture());
  std::mt19937_64 rng(2);
  const auto batch = testing::random_batch(rng, 23, 3, 3, 4);
  const auto f = forward(zero, batch);
  CHECK(f.scores.isZero(0.0));
  for (const auto& h : f.hidden) CHECK(h.values.isZero(0.0));

  Network scalar(1, 2, {{1, 1, 1, 1, 1}});
  scalar.layer(0).weights(0, 0) = 2.0;
  PatchBatch one;
  one.height = one.width = one.channels = 1;
  one.values = MatrixXd::Ones(1, 1);
  one.labels = {0};
  CHECK(forward(scalar, one).hidden[0].values(0, 0) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("forward rejects the wrong patch size") {
  const Network net(3, 4, document_architecture());
  std::mt19937_64 rng(3);
  CHECK_THROWS_AS(forward(net, testing::random_batch(rng, 21, 3, 2, 4)), ShapeError);
  CHECK_THROWS_AS(forward(net, testing::random_batch(rng, 23, 1, 2, 4)), ShapeError);
}

TEST_CASE("unfold and fold are adjoint") {
  std::mt19937_64 rng(4);
  const GridShape in{7, 7, 3};
  const LayerSpec spec{3, 3, 2, 2, 5};
  const GridShape out{3, 3, 5};
  const MatrixXd x = testing::random_matrix(rng, 3, 2 * 49);
  const MatrixXd cols = unfold(x, in, 2, spec, out);
  const MatrixXd y = testing::random_matrix(rng, cols.rows(), cols.cols());
  const double lhs = (cols.array() * y.array()).sum();
  const double rhs = (x.array() * fold(y, in, 2, spec, out).array()).sum();
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
}

TEST_CASE("loss of a zero network is ln |C|") {
  const Network zero(3, 4, document_architecture());
  std::mt19937_64 rng(5);
  CHECK(loss(zero, testing::random_batch(rng, 23, 3, 8, 4)) == doctest::Approx(std::log(4.0)).epsilon(1e-15));
}

TEST_CASE("saturated correct scores: tiny loss and gradients") {
  Network net(3, 4, document_architecture());
  net.head().bias << 0, 0, 25, 0;
  std::mt19937_64 rng(6);
  auto batch = testing::random_batch(rng, 23, 3, 16, 4);
  for (auto& l : batch.labels) l = 2;
  const auto lg = loss_and_gradients(net, batch);
  CHECK(lg.loss < 0.01);
  // Gradients are means over the batch, so "batch scale" is 1 here.
  for (const auto& g : lg.gradients.weights) CHECK(g.norm() < 0.05);
  for (const auto& g : lg.gradients.biases) CHECK(g.norm() < 0.05);
}

TEST_CASE("analytic gradients match central differences") {
  Network net = tiny_network(7);
  std::mt19937_64 rng(8);
  const auto batch = testing::random_batch(rng, 5, 2, 6, 4);
  const auto analytic = loss_and_gradients(net, batch).gradients;
  const double h = 1e-4;
  double worst = 0.0;
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    for (const bool bias : {false, true}) {
      const Eigen::Index n = bias ? net.layer(l).bias.size() : net.layer(l).weights.size();
      for (Eigen::Index i = 0; i < n; ++i) {
        double& p = parameter(net, l, i, bias);
        const double saved = p;
        p = saved + h;
        const double up = loss(net, batch);
        p = saved - h;
        const double down = loss(net, batch);
        p = saved;
        const double numeric = (up - down) / (2 * h);
        const double a = bias ? analytic.biases[l](i) : analytic.weights[l].reshaped()(i);
        const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-8});
        worst = std::max(worst, rel);
      }
    }
  }
  CHECK(worst <= 1e-5);
}

TEST_CASE("loss_and_gradients rejects bad labels and empty batches") {
  const Network net = tiny_network(9);
  std::mt19937_64 rng(10);
  auto batch = testing::random_batch(rng, 5, 2, 3, 4);
  batch.labels[1] = 4;
  CHECK_THROWS_AS(loss_and_gradients(net, batch), InvalidInputError);
  auto empty = testing::random_batch(rng, 5, 2, 0, 4);
  CHECK_THROWS_AS(loss_and_gradients(net, empty), InvalidInputError);
}

TEST_CASE("sgd_step arithmetic") {
  Network net = tiny_network(11);
  std::mt19937_64 rng(12);
  const auto batch = testing::random_batch(rng, 5, 2, 6, 4);
  const auto g = loss_and_gradients(net, batch).gradients;

  const Network same = sgd_step(net, g, 0.0);
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    CHECK(same.layer(l).weights == net.layer(l).weights);
    CHECK(same.layer(l).bias == net.layer(l).bias);
  }

  const Network twice = sgd_step(sgd_step(net, g, 0.01), g, 0.01);
  const Network once = sgd_step(net, g, 0.02);
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    CHECK((twice.layer(l).weights - once.layer(l).weights).cwiseAbs().maxCoeff() <= 1e-15);
    CHECK((twice.layer(l).bias - once.layer(l).bias).cwiseAbs().maxCoeff() <= 1e-15);
  }

  Network unit(1, 2, {{1, 1, 1, 1, 1}});
  unit.layer(0).weights(0, 0) = 1.0;
  Gradients one{{}, {}};
  for (std::size_t l = 0; l < unit.layer_count(); ++l) {
    one.weights.push_back(MatrixXd::Zero(unit.layer(l).weights.rows(), unit.layer(l).weights.cols()));
    one.biases.push_back(VectorXd::Zero(unit.layer(l).bias.size()));
  }
  one.weights[0](0, 0) = 0.5;
  CHECK(sgd_step(unit, one, 0.01).layer(0).weights(0, 0) == doctest::Approx(0.995).epsilon(1e-15));

  one.weights.pop_back();
  CHECK_THROWS_AS(sgd_step(unit, one, 0.01), ShapeError);
}

TEST_CASE("train: zero epochs calls back once and changes nothing") {
  const Network net = tiny_network(13);
  std::mt19937_64 rng(14);
  testing::FixedStream stream(testing::random_batch(rng, 5, 2, 40, 4));
  int calls = 0;
  TrainConfig cfg{0.1, 4, 0, 40, 1};
  const Network out = train(net, stream, cfg, [&](const Network&, const EpochStats& s) {
    ++calls;
    CHECK(s.epoch == 0);
    CHECK(std::isnan(s.mean_loss));
  });
  CHECK(calls == 1);
  for (std::size_t l = 0; l < net.layer_count(); ++l) CHECK(out.layer(l).weights == net.layer(l).weights);
}

TEST_CASE("train: determinism and resume") {
  const Network net = tiny_network(15);
  std::mt19937_64 rng(16);
  testing::FixedStream stream(testing::random_batch(rng, 5, 2, 64, 4));
  TrainConfig cfg{0.05, 8, 3, 64, 99};
  std::vector<std::size_t> epochs;
  const Network a = train(net, stream, cfg, [&](const Network&, const EpochStats& s) { epochs.push_back(s.epoch); });
  const Network b = train(net, stream, cfg);
  CHECK(epochs == std::vector<std::size_t>{0, 1, 2, 3});
  for (std::size_t l = 0; l < net.layer_count(); ++l) CHECK(a.layer(l).weights == b.layer(l).weights);

  TrainConfig first = cfg, rest = cfg;
  first.epochs = 2;
  rest.epochs = 1;
  const Network resumed = train(train(net, stream, first), stream, rest, {}, 2);
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    CHECK(resumed.layer(l).weights == a.layer(l).weights);
    CHECK(resumed.layer(l).bias == a.layer(l).bias);
  }
}

TEST_CASE("train config validation") {
  CHECK_THROWS_AS((TrainConfig{0.0, 4, 1, 4, 1}.validate()), InvalidInputError);
  CHECK_THROWS_AS((TrainConfig{0.1, 0, 1, 4, 1}.validate()), InvalidInputError);
  CHECK_THROWS_AS((TrainConfig{0.1, 4, 1, 0, 1}.validate()), InvalidInputError);
  CHECK_NOTHROW((TrainConfig{0.1, 4, 0, 4, 1}.validate()));
}

TEST_CASE("XOR toy reaches 100% training accuracy") {
  const PatchBatch patches = xor_patches();
  Network net = init_random(Network(1, 2, {{2, 2, 1, 1, 4}}), 21);
  testing::FixedStream stream(patches);
  net = train(net, stream, TrainConfig{0.5, 4, 20, 100, 5});
  const auto predicted = predict(net, patches);
  CHECK(predicted == patches.labels);
}

TEST_CASE("training loss is mostly non-increasing on the synthetic task") {
  const auto& ds = testing::small_dataset();
  const Network blank(3, 4, document_architecture());
  PatchSampler held(ds.test, 23, true, 777);
  const PatchBatch eval_batch = held.next(1000);
  double transitions = 0.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    PatchSampler sampler(ds.train, 23);
    std::vector<double> losses;
    train(init_random(blank, seed), sampler, TrainConfig{0.01, 40, 5, 2000, seed},
          [&](const Network& n, const EpochStats&) { losses.push_back(loss(n, eval_batch)); });
    for (std::size_t e = 1; e < losses.size(); ++e) transitions += losses[e] <= losses[e - 1];
  }
  CHECK(transitions / 5.0 >= 4.0);
}

TEST_CASE("mix_seed spreads nearby seeds") {
  CHECK(mix_seed(1, 1) != mix_seed(1, 2));
  CHECK(mix_seed(1, 1) != mix_seed(2, 1));
  CHECK(mix_seed(5, 9) == mix_seed(5, 9));
  CHECK(epoch_stream_seed(3, 1) != epoch_stream_seed(3, 2));
}
