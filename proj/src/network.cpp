#include "ldanet/network.hpp"

#include <cmath>
#include <limits>

namespace ldanet {

const char* to_string(Activation a) { return a == Activation::softsign ? "softsign" : "linear"; }

Activation activation_from_string(const std::string& s) {
  if (s == "softsign") return Activation::softsign;
  if (s == "linear") return Activation::linear;
  throw InvalidInputError("unknown activation '" + s + "'");
}

std::vector<LayerSpec> document_architecture() {
  // The last layer sees the full remaining 3x3 grid, so its offset never matters.
  return {{5, 5, 3, 3, 24}, {3, 3, 2, 2, 48}, {3, 3, 1, 1, 72}};
}

int receptive_field(const std::vector<LayerSpec>& specs, bool vertical) {
  int rf = 0;
  int stride = 1;
  for (std::size_t k = 0; k < specs.size(); ++k) {
    const int patch = vertical ? specs[k].patch_h : specs[k].patch_w;
    const int offset = vertical ? specs[k].offset_h : specs[k].offset_w;
    rf = (k == 0) ? patch : rf + (patch - 1) * stride;
    stride *= offset;
  }
  return rf;
}

Network::Network(int input_channels, int class_count, const std::vector<LayerSpec>& hidden)
    : input_channels_(input_channels), class_count_(class_count) {
  if (input_channels < 1) throw InvalidInputError("network: input_channels must be >= 1");
  if (class_count < 1) throw InvalidInputError("network: class_count must be >= 1");
  if (hidden.empty()) throw InvalidInputError("network: at least one hidden layer is required");
  for (const auto& s : hidden) {
    if (s.patch_h < 1 || s.patch_w < 1 || s.offset_h < 1 || s.offset_w < 1 || s.neurons < 1) {
      throw InvalidInputError("network: patch sizes, offsets and neuron counts must be >= 1");
    }
  }
  rf_h_ = ldanet::receptive_field(hidden, true);
  rf_w_ = ldanet::receptive_field(hidden, false);

  grids_.push_back({rf_h_, rf_w_, input_channels});
  int channels = input_channels;
  for (std::size_t k = 0; k < hidden.size(); ++k) {
    const auto& s = hidden[k];
    const GridShape& in = grids_.back();
    if (in.height < s.patch_h || in.width < s.patch_w) {
      throw InvalidInputError("network: layer " + std::to_string(k + 1) +
                              " patch exceeds its input grid");
    }
    const int fan_in = s.patch_h * s.patch_w * channels;
    if (s.neurons > fan_in) {
      throw InvalidInputError("network: layer " + std::to_string(k + 1) + " has " +
                              std::to_string(s.neurons) + " neurons but only " +
                              std::to_string(fan_in) + " inputs");
    }
    GridShape out{(in.height - s.patch_h) / s.offset_h + 1, (in.width - s.patch_w) / s.offset_w + 1,
                  s.neurons};
    grids_.push_back(out);

    Layer layer;
    layer.spec = s;
    layer.input_channels = channels;
    layer.weights = MatrixXd::Zero(s.neurons, fan_in);
    layer.bias = VectorXd::Zero(s.neurons);
    layer.activation = Activation::softsign;
    layers_.push_back(std::move(layer));
    channels = s.neurons;
  }

  const GridShape& last = grids_.back();
  Layer head;
  head.spec = {last.height, last.width, 1, 1, class_count};
  head.input_channels = last.channels;
  head.weights = MatrixXd::Zero(class_count, head.fan_in());
  head.bias = VectorXd::Zero(class_count);
  head.activation = Activation::linear;
  layers_.push_back(std::move(head));
}

std::vector<LayerSpec> Network::hidden_specs() const {
  std::vector<LayerSpec> out;
  for (std::size_t i = 0; i < hidden_count(); ++i) out.push_back(layers_[i].spec);
  return out;
}

std::size_t Network::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += static_cast<std::size_t>(l.weights.size() + l.bias.size());
  return n;
}

bool Network::all_finite() const {
  for (const auto& l : layers_) {
    if (!l.weights.allFinite() || !l.bias.allFinite()) return false;
  }
  return true;
}

MatrixXd unfold(const MatrixXd& input, const GridShape& in, std::size_t count,
                const LayerSpec& spec, const GridShape& out) {
  const int ch = in.channels;
  const auto in_pos = static_cast<Eigen::Index>(in.positions());
  const auto out_pos = static_cast<Eigen::Index>(out.positions());
  if (input.rows() != ch || input.cols() != in_pos * static_cast<Eigen::Index>(count)) {
    throw ShapeError("unfold: input does not match its grid shape");
  }
  MatrixXd cols(static_cast<Eigen::Index>(spec.patch_h) * spec.patch_w * ch,
                out_pos * static_cast<Eigen::Index>(count));
  for (std::size_t b = 0; b < count; ++b) {
    const Eigen::Index in_base = static_cast<Eigen::Index>(b) * in_pos;
    for (int gy = 0; gy < out.height; ++gy) {
      for (int gx = 0; gx < out.width; ++gx) {
        const Eigen::Index dst = static_cast<Eigen::Index>(b) * out_pos + gy * out.width + gx;
        for (int r = 0; r < spec.patch_h; ++r) {
          const int y = gy * spec.offset_h + r;
          for (int c = 0; c < spec.patch_w; ++c) {
            const int x = gx * spec.offset_w + c;
            cols.col(dst).segment((r * spec.patch_w + c) * ch, ch) =
                input.col(in_base + y * in.width + x);
          }
        }
      }
    }
  }
  return cols;
}

MatrixXd fold(const MatrixXd& columns, const GridShape& in, std::size_t count,
              const LayerSpec& spec, const GridShape& out) {
  const int ch = in.channels;
  const auto in_pos = static_cast<Eigen::Index>(in.positions());
  const auto out_pos = static_cast<Eigen::Index>(out.positions());
  MatrixXd grid = MatrixXd::Zero(ch, in_pos * static_cast<Eigen::Index>(count));
  for (std::size_t b = 0; b < count; ++b) {
    const Eigen::Index in_base = static_cast<Eigen::Index>(b) * in_pos;
    for (int gy = 0; gy < out.height; ++gy) {
      for (int gx = 0; gx < out.width; ++gx) {
        const Eigen::Index src = static_cast<Eigen::Index>(b) * out_pos + gy * out.width + gx;
        for (int r = 0; r < spec.patch_h; ++r) {
          const int y = gy * spec.offset_h + r;
          for (int c = 0; c < spec.patch_w; ++c) {
            const int x = gx * spec.offset_w + c;
            grid.col(in_base + y * in.width + x) +=
                columns.col(src).segment((r * spec.patch_w + c) * ch, ch);
          }
        }
      }
    }
  }
  return grid;
}

namespace {

void check_batch(const Network& net, const PatchBatch& batch) {
  const GridShape& in = net.grids().front();
  if (batch.height != in.height || batch.width != in.width || batch.channels != in.channels) {
    throw ShapeError("forward: patch is " + std::to_string(batch.height) + "x" +
                     std::to_string(batch.width) + "x" + std::to_string(batch.channels) +
                     ", network expects " + std::to_string(in.height) + "x" +
                     std::to_string(in.width) + "x" + std::to_string(in.channels));
  }
  if (batch.size() == 0) throw InvalidInputError("forward: empty batch");
  if (batch.values.rows() != in.channels ||
      batch.values.cols() != static_cast<Eigen::Index>(batch.size()) * in.positions()) {
    throw ShapeError("forward: batch values do not match the batch size");
  }
}

MatrixXd affine(const Layer& layer, const MatrixXd& cols) {
  MatrixXd z = layer.weights * cols;
  z.colwise() += layer.bias;
  return z;
}

MatrixXd activate(const Layer& layer, const MatrixXd& z) {
  if (layer.activation == Activation::linear) return z;
  return z.array() / (1.0 + z.array().abs());
}

}  // namespace

ForwardResult forward(const Network& net, const PatchBatch& batch, bool keep_cache) {
  check_batch(net, batch);
  const std::size_t count = batch.size();
  const auto& grids = net.grids();
  ForwardResult result;
  const MatrixXd* current = &batch.values;
  for (std::size_t l = 0; l < net.hidden_count(); ++l) {
    const Layer& layer = net.layer(l);
    MatrixXd cols = unfold(*current, grids[l], count, layer.spec, grids[l + 1]);
    MatrixXd z = affine(layer, cols);
    Activations act{grids[l + 1], activate(layer, z)};
    if (keep_cache) {
      result.columns.push_back(std::move(cols));
      result.pre.push_back(std::move(z));
    }
    result.hidden.push_back(std::move(act));
    current = &result.hidden.back().values;
  }
  const Layer& head = net.head();
  const GridShape& last = grids.back();
  MatrixXd cols = unfold(*current, last, count, head.spec, {1, 1, head.neurons()});
  result.scores = affine(head, cols);
  if (keep_cache) result.columns.push_back(std::move(cols));
  return result;
}

Activations forward_hidden(const Network& net, const PatchBatch& batch, std::size_t upto) {
  check_batch(net, batch);
  if (upto > net.hidden_count()) throw InvalidInputError("forward_hidden: layer index too large");
  const auto& grids = net.grids();
  Activations act{grids[0], batch.values};
  for (std::size_t l = 0; l < upto; ++l) {
    const Layer& layer = net.layer(l);
    MatrixXd cols = unfold(act.values, grids[l], batch.size(), layer.spec, grids[l + 1]);
    act = Activations{grids[l + 1], activate(layer, affine(layer, cols))};
  }
  return act;
}

std::vector<int> predict(const Network& net, const PatchBatch& batch) {
  const MatrixXd scores = forward(net, batch, false).scores;
  std::vector<int> out(static_cast<std::size_t>(scores.cols()));
  for (Eigen::Index j = 0; j < scores.cols(); ++j) {
    int best = 0;
    for (Eigen::Index c = 1; c < scores.rows(); ++c) {
      if (scores(c, j) > scores(best, j)) best = static_cast<int>(c);
    }
    out[static_cast<std::size_t>(j)] = best;
  }
  return out;
}

namespace {

void check_labels(const Network& net, const PatchBatch& batch) {
  for (int label : batch.labels) {
    if (label < 0 || label >= net.class_count()) {
      throw InvalidInputError("label " + std::to_string(label) + " outside [0, " +
                              std::to_string(net.class_count()) + ")");
    }
  }
}

// Softmax probabilities in place; returns the summed cross-entropy.
double softmax_cross_entropy(MatrixXd& scores, const std::vector<int>& labels) {
  double total = 0.0;
  for (Eigen::Index j = 0; j < scores.cols(); ++j) {
    auto col = scores.col(j);
    const double peak = col.maxCoeff();
    col.array() = (col.array() - peak).exp();
    const double z = col.sum();
    col /= z;
    total -= std::log(col(labels[static_cast<std::size_t>(j)]));
  }
  return total;
}

}  // namespace

LossAndGradients loss_and_gradients(const Network& net, const PatchBatch& batch) {
  check_labels(net, batch);
  ForwardResult fwd = forward(net, batch, true);
  const std::size_t count = batch.size();
  const auto n = static_cast<double>(count);

  MatrixXd delta = std::move(fwd.scores);
  LossAndGradients out;
  out.loss = softmax_cross_entropy(delta, batch.labels) / n;
  for (std::size_t j = 0; j < count; ++j) delta(batch.labels[j], static_cast<Eigen::Index>(j)) -= 1.0;
  delta /= n;

  const std::size_t layers = net.layer_count();
  out.gradients.weights.resize(layers);
  out.gradients.biases.resize(layers);
  const auto& grids = net.grids();

  // Head.
  const Layer& head = net.head();
  out.gradients.weights[layers - 1] = delta * fwd.columns[layers - 1].transpose();
  out.gradients.biases[layers - 1] = delta.rowwise().sum();
  MatrixXd grad_out = fold(head.weights.transpose() * delta, grids.back(), count, head.spec,
                           {1, 1, head.neurons()});

  for (std::size_t l = net.hidden_count(); l-- > 0;) {
    const Layer& layer = net.layer(l);
    if (layer.activation == Activation::softsign) {
      const auto denom = 1.0 + fwd.pre[l].array().abs();
      grad_out.array() /= denom * denom;
    }
    out.gradients.weights[l] = grad_out * fwd.columns[l].transpose();
    out.gradients.biases[l] = grad_out.rowwise().sum();
    if (l > 0) {
      grad_out = fold(layer.weights.transpose() * grad_out, grids[l], count, layer.spec,
                      grids[l + 1]);
    }
  }
  return out;
}

double loss(const Network& net, const PatchBatch& batch) {
  check_labels(net, batch);
  MatrixXd scores = forward(net, batch, false).scores;
  return softmax_cross_entropy(scores, batch.labels) / static_cast<double>(batch.size());
}

Network sgd_step(Network net, const Gradients& gradients, double learning_rate) {
  if (gradients.weights.size() != net.layer_count() ||
      gradients.biases.size() != net.layer_count()) {
    throw ShapeError("sgd_step: gradient layer count mismatch");
  }
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    Layer& layer = net.layer(l);
    const auto& gw = gradients.weights[l];
    const auto& gb = gradients.biases[l];
    if (gw.rows() != layer.weights.rows() || gw.cols() != layer.weights.cols() ||
        gb.size() != layer.bias.size()) {
      throw ShapeError("sgd_step: gradient shape mismatch at layer " + std::to_string(l));
    }
  }
  if (learning_rate == 0.0) return net;
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    Layer& layer = net.layer(l);
    layer.weights -= learning_rate * gradients.weights[l];
    layer.bias -= learning_rate * gradients.biases[l];
  }
  return net;
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw InvalidInputError("train: learning_rate must be positive");
  }
  if (batch_size == 0) throw InvalidInputError("train: batch_size must be positive");
  if (samples_per_epoch == 0) throw InvalidInputError("train: samples_per_epoch must be positive");
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t epoch_stream_seed(std::uint64_t seed, std::size_t epoch) {
  return mix_seed(seed, 0x1000 + epoch);
}

Network train(Network net, PatchStream& stream, const TrainConfig& config,
              const EpochCallback& on_epoch, std::size_t completed_epochs) {
  config.validate();
  if (on_epoch) {
    on_epoch(net, {completed_epochs, std::numeric_limits<double>::quiet_NaN(), 0});
  }
  for (std::size_t e = 1; e <= config.epochs; ++e) {
    const std::size_t epoch = completed_epochs + e;
    stream.restart(epoch_stream_seed(config.seed, epoch));
    double loss_sum = 0.0;
    std::size_t seen = 0;
    while (seen < config.samples_per_epoch) {
      const std::size_t take = std::min(config.batch_size, config.samples_per_epoch - seen);
      const PatchBatch batch = stream.next(take);
      auto step = loss_and_gradients(net, batch);
      loss_sum += step.loss * static_cast<double>(batch.size());
      net = sgd_step(std::move(net), step.gradients, config.learning_rate);
      seen += batch.size();
    }
    if (!net.all_finite()) throw NumericalError("train: weights diverged");
    if (on_epoch) on_epoch(net, {epoch, loss_sum / static_cast<double>(seen), seen});
  }
  return net;
}

}  // namespace ldanet
