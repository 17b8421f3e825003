#pragma once

// Weight initialization: layer-wise LDA (transform matrices for hidden
// layers, discriminant functions for the head) and the uniform random
// baseline.

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "ldanet/lda.hpp"
#include "ldanet/network.hpp"

namespace ldanet {

struct InitOptions {
  std::size_t sample_count = 16000;  // k patches drawn from the stream
  FitOptions fit;
  std::size_t chunk = 1000;  // patches forwarded per step while accumulating scatter
};

struct InitReport {
  std::string method;  // "lda" | "random"
  std::uint64_t seed = 0;
  std::size_t sample_count = 0;
  std::vector<std::vector<double>> spectra;  // hidden layer l: top neurons(l) eigenvalues
  double duration_seconds = 0.0;

  nlohmann::json to_json() const;
};

struct InitResult {
  Network network;
  InitReport report;
};

/// Layer-wise LDA initialization.  Layer L is fitted on every window feeding
/// it, over the k patches of the stream restarted at `seed`, after pushing
/// them through the already-initialized layers; each window takes the label
/// of its patch.  Hidden weights are the top eigenvector rows and biases are
/// zero; the head gets the discriminant weights and biases fitted on the
/// final hidden representation.
InitResult init_lda(Network net, PatchStream& stream, std::uint64_t seed,
                    const InitOptions& options = {});

/// Uniform weights in [-1/sqrt(fan_in), 1/sqrt(fan_in)], zero biases.
Network init_random(Network net, std::uint64_t seed);

}  // namespace ldanet
