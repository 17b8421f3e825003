#pragma once

// Patch network: a stack of locally connected layers whose weights are
// shared across grid positions (a strided convolution without padding),
// SoftSign activations, and a linear classification head over the final
// grid.  Activations of a batch are stored as channels x (count*h*w)
// matrices, column (b*h + y)*w + x.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "ldanet/linalg.hpp"

namespace ldanet {

/// Maps an 8-bit pixel value to [-1, 1].  LDA fitting, training and
/// evaluation all go through this.
inline constexpr double scale_pixel(std::uint8_t v) { return static_cast<double>(v) / 127.5 - 1.0; }

inline constexpr double softsign(double x) { return x / (1.0 + (x < 0 ? -x : x)); }

enum class Activation { softsign, linear };

const char* to_string(Activation a);
Activation activation_from_string(const std::string& s);

struct LayerSpec {
  int patch_h = 1;
  int patch_w = 1;
  int offset_h = 1;
  int offset_w = 1;
  int neurons = 1;

  bool operator==(const LayerSpec&) const = default;
};

struct GridShape {
  int height = 0;
  int width = 0;
  int channels = 0;

  int positions() const { return height * width; }
  bool operator==(const GridShape&) const = default;
};

struct Layer {
  LayerSpec spec;
  int input_channels = 0;
  MatrixXd weights;  // neurons x fan_in, column index (r*patch_w + c)*input_channels + ch
  VectorXd bias;
  Activation activation = Activation::softsign;

  int fan_in() const { return spec.patch_h * spec.patch_w * input_channels; }
  int neurons() const { return spec.neurons; }
};

/// The three-layer architecture used for the document experiments:
/// 5x5/3, 3x3/2, 3x3 with 24, 48 and 72 neurons.
std::vector<LayerSpec> document_architecture();

class Network {
 public:
  Network() = default;

  /// Builds a zero-initialized network.  The input patch size is the
  /// receptive field of the hidden stack, so the last hidden grid covers the
  /// input exactly once and the head sees that whole grid.
  Network(int input_channels, int class_count, const std::vector<LayerSpec>& hidden);

  int input_channels() const { return input_channels_; }
  int class_count() const { return class_count_; }
  int receptive_field_h() const { return rf_h_; }
  int receptive_field_w() const { return rf_w_; }
  int receptive_field() const { return rf_h_; }

  /// Input grid followed by the output grid of every hidden layer.
  const std::vector<GridShape>& grids() const { return grids_; }

  std::size_t hidden_count() const { return layers_.size() - 1; }
  std::size_t layer_count() const { return layers_.size(); }
  Layer& layer(std::size_t i) { return layers_.at(i); }
  const Layer& layer(std::size_t i) const { return layers_.at(i); }
  Layer& head() { return layers_.back(); }
  const Layer& head() const { return layers_.back(); }
  std::vector<LayerSpec> hidden_specs() const;

  std::size_t parameter_count() const;
  bool all_finite() const;

 private:
  int input_channels_ = 0;
  int class_count_ = 0;
  int rf_h_ = 0;
  int rf_w_ = 0;
  std::vector<GridShape> grids_;
  std::vector<Layer> layers_;  // hidden layers, then the head
};

/// rf_1 = p_1, rf_k = rf_{k-1} + (p_k - 1) * prod_{j<k} offset_j
int receptive_field(const std::vector<LayerSpec>& specs, bool vertical = true);

struct PatchBatch {
  int height = 0;
  int width = 0;
  int channels = 0;
  MatrixXd values;  // channels x (count*height*width)
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
};

/// Source of labeled patches.  `restart` rewinds to a fresh stream; a given
/// seed must always produce the same sequence regardless of how `next` calls
/// are chunked.
class PatchStream {
 public:
  virtual ~PatchStream() = default;
  virtual void restart(std::uint64_t seed) = 0;
  virtual PatchBatch next(std::size_t count) = 0;
};

struct Activations {
  GridShape shape;
  MatrixXd values;  // shape.channels x (count*positions)
};

struct ForwardResult {
  MatrixXd scores;                  // class_count x count
  std::vector<Activations> hidden;  // output of every hidden layer
  std::vector<MatrixXd> columns;    // unfolded input windows per layer (incl. head)
  std::vector<MatrixXd> pre;        // pre-activations per hidden layer
};

/// Unfolds a grid into one column per (sample, window) pair:
/// rows (r*patch_w + c)*channels + ch, columns b*out.positions() + gy*out.width + gx.
MatrixXd unfold(const MatrixXd& input, const GridShape& in, std::size_t count,
                const LayerSpec& spec, const GridShape& out);

/// Adjoint of unfold: scatter-adds window columns back onto the grid.
MatrixXd fold(const MatrixXd& columns, const GridShape& in, std::size_t count,
              const LayerSpec& spec, const GridShape& out);

/// Runs the network on a batch.  With `keep_cache` the unfolded inputs and
/// pre-activations needed for backpropagation are kept.
ForwardResult forward(const Network& net, const PatchBatch& batch, bool keep_cache = true);

/// Output of hidden layers [0, upto) only; upto = 0 returns the input grid.
Activations forward_hidden(const Network& net, const PatchBatch& batch, std::size_t upto);

std::vector<int> predict(const Network& net, const PatchBatch& batch);

struct Gradients {
  std::vector<MatrixXd> weights;  // same order as Network::layer(i)
  std::vector<VectorXd> biases;
};

struct LossAndGradients {
  double loss = 0.0;
  Gradients gradients;
};

/// Mean softmax cross-entropy of the head scores and its gradient for every
/// weight and bias.
LossAndGradients loss_and_gradients(const Network& net, const PatchBatch& batch);

double loss(const Network& net, const PatchBatch& batch);

/// w <- w - learning_rate * g for every parameter.
Network sgd_step(Network net, const Gradients& gradients, double learning_rate);

struct TrainConfig {
  double learning_rate = 0.01;
  std::size_t batch_size = 4096;
  std::size_t epochs = 100;
  std::size_t samples_per_epoch = 100000;
  std::uint64_t seed = 1;

  void validate() const;
};

struct EpochStats {
  std::size_t epoch = 0;
  double mean_loss = 0.0;  // mean mini-batch loss during the epoch; NaN before training
  std::size_t samples = 0;
};

using EpochCallback = std::function<void(const Network&, const EpochStats&)>;

/// Seed of the patch stream used for a given (1-based) epoch.  Each epoch
/// has its own stream so a run can resume from a saved model.
std::uint64_t epoch_stream_seed(std::uint64_t seed, std::size_t epoch);

/// Runs `config.epochs` epochs starting after `completed_epochs`.  The
/// callback fires once before any update and after every epoch.
Network train(Network net, PatchStream& stream, const TrainConfig& config,
              const EpochCallback& on_epoch = {}, std::size_t completed_epochs = 0);

/// splitmix64, used to derive independent seeds from a master seed.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt);

}  // namespace ldanet
