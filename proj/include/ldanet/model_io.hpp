#pragma once

// Versioned JSON model file:
//   {format_version, input_channels, class_count,
//    layers: [{patch, offset, neurons, activation, weights, bias}],
//    provenance: {init_method, seed, lda_sample_count, epochs_trained}}
// The head is the last entry of `layers`.  Numbers are written in their
// shortest round-trip decimal form, so load(save(net)) is bit-exact.

#include <cstdint>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "ldanet/network.hpp"

namespace ldanet {

inline constexpr int kModelFormatVersion = 1;

struct Provenance {
  std::string init_method = "none";  // "lda" | "random" | "none"
  std::uint64_t seed = 0;
  std::size_t lda_sample_count = 0;
  std::size_t epochs_trained = 0;
};

struct ModelFile {
  Network network;
  Provenance provenance;
};

nlohmann::json model_to_json(const Network& net, const Provenance& provenance);
ModelFile model_from_json(const nlohmann::json& doc);

void save_model(const std::filesystem::path& path, const Network& net,
                const Provenance& provenance);
ModelFile load_model(const std::filesystem::path& path);

/// Reads a JSON document, raising DataError on missing files or bad syntax.
nlohmann::json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const nlohmann::json& doc);

}  // namespace ldanet
