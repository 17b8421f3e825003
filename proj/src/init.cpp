#include "ldanet/init.hpp"

#include <chrono>
#include <cmath>
#include <random>

namespace ldanet {

nlohmann::json InitReport::to_json() const {
  return {{"method", method},
          {"seed", seed},
          {"sample_count", sample_count},
          {"spectra", spectra},
          {"duration_seconds", duration_seconds}};
}

namespace {

std::vector<int> repeat_labels(const std::vector<int>& labels, int positions) {
  std::vector<int> out;
  out.reserve(labels.size() * static_cast<std::size_t>(positions));
  for (int label : labels) out.insert(out.end(), static_cast<std::size_t>(positions), label);
  return out;
}

// Feeds the windows seen by layer `target` (head when target == hidden_count)
// for all k stream patches into a fresh accumulator.
ScatterAccumulator<double> accumulate_layer(const Network& net, PatchStream& stream,
                                            std::uint64_t seed, std::size_t target,
                                            const InitOptions& options) {
  const auto& grids = net.grids();
  const Layer& layer = net.layer(target);
  const bool is_head = target == net.hidden_count();
  const GridShape out_grid = is_head ? GridShape{1, 1, layer.neurons()} : grids[target + 1];

  ScatterAccumulator<double> acc(layer.fan_in(), net.class_count());
  stream.restart(seed);
  std::size_t drawn = 0;
  while (drawn < options.sample_count) {
    const std::size_t take = std::min(options.chunk, options.sample_count - drawn);
    const PatchBatch batch = stream.next(take);
    const Activations act = forward_hidden(net, batch, target);
    const MatrixXd cols = unfold(act.values, grids[target], batch.size(), layer.spec, out_grid);
    const auto labels = repeat_labels(batch.labels, out_grid.positions());
    acc.add(cols, labels);
    drawn += batch.size();
  }
  return acc;
}

}  // namespace

InitResult init_lda(Network net, PatchStream& stream, std::uint64_t seed,
                    const InitOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  if (options.chunk == 0) throw InvalidInputError("init_lda: chunk must be positive");
  const auto k = options.sample_count;
  const auto classes = static_cast<std::size_t>(net.class_count());
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    const bool is_head = l == net.hidden_count();
    const auto positions = is_head ? 1u : static_cast<std::size_t>(net.grids()[l + 1].positions());
    const auto needed = static_cast<std::size_t>(net.layer(l).fan_in()) + classes;
    if (k * positions < needed) {
      throw InvalidInputError("init_lda: " + std::to_string(k) + " patches give " +
                              std::to_string(k * positions) + " observations for layer " +
                              std::to_string(l + 1) + ", which needs at least " +
                              std::to_string(needed));
    }
  }

  InitReport report;
  report.method = "lda";
  report.seed = seed;
  report.sample_count = k;

  for (std::size_t l = 0; l < net.hidden_count(); ++l) {
    const auto acc = accumulate_layer(net, stream, seed, l, options);
    const auto model = fit(acc, options.fit);
    Layer& layer = net.layer(l);
    layer.weights = model.transform.topRows(layer.neurons());
    layer.bias.setZero();
    const VectorXd top = model.eigenvalues.head(layer.neurons());
    report.spectra.emplace_back(top.data(), top.data() + top.size());
  }

  const auto acc = accumulate_layer(net, stream, seed, net.hidden_count(), options);
  const auto model = fit(acc, options.fit);
  net.head().weights = model.classifier_weights;
  net.head().bias = model.classifier_bias;

  report.duration_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {std::move(net), std::move(report)};
}

Network init_random(Network net, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    Layer& layer = net.layer(l);
    const double bound = 1.0 / std::sqrt(static_cast<double>(layer.fan_in()));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) layer.weights(r, c) = dist(rng);
    }
    layer.bias.setZero();
  }
  return net;
}

}  // namespace ldanet
