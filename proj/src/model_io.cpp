#include "ldanet/model_io.hpp"

#include <fstream>

namespace ldanet {

namespace {

nlohmann::json matrix_to_json(const MatrixXd& m) {
  auto rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    auto row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

MatrixXd matrix_from_json(const nlohmann::json& j, Eigen::Index rows, Eigen::Index cols) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != rows) {
    throw DataError("model: weight matrix has the wrong number of rows");
  }
  MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      throw DataError("model: weight matrix has the wrong number of columns");
    }
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = row[static_cast<std::size_t>(c)].get<double>();
  }
  return m;
}

}  // namespace

nlohmann::json model_to_json(const Network& net, const Provenance& provenance) {
  nlohmann::json doc;
  doc["format_version"] = kModelFormatVersion;
  doc["input_channels"] = net.input_channels();
  doc["class_count"] = net.class_count();
  auto layers = nlohmann::json::array();
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    const Layer& layer = net.layer(l);
    nlohmann::json jl;
    jl["patch"] = {layer.spec.patch_h, layer.spec.patch_w};
    jl["offset"] = {layer.spec.offset_h, layer.spec.offset_w};
    jl["neurons"] = layer.spec.neurons;
    jl["activation"] = to_string(layer.activation);
    jl["weights"] = matrix_to_json(layer.weights);
    jl["bias"] = std::vector<double>(layer.bias.data(), layer.bias.data() + layer.bias.size());
    layers.push_back(std::move(jl));
  }
  doc["layers"] = std::move(layers);
  doc["provenance"] = {{"init_method", provenance.init_method},
                       {"seed", provenance.seed},
                       {"lda_sample_count", provenance.lda_sample_count},
                       {"epochs_trained", provenance.epochs_trained}};
  return doc;
}

ModelFile model_from_json(const nlohmann::json& doc) {
  try {
    if (doc.at("format_version").get<int>() != kModelFormatVersion) {
      throw DataError("model: unsupported format_version");
    }
    const int channels = doc.at("input_channels").get<int>();
    const int classes = doc.at("class_count").get<int>();
    const auto& layers = doc.at("layers");
    if (!layers.is_array() || layers.size() < 2) {
      throw DataError("model: need at least one hidden layer and a head");
    }
    std::vector<LayerSpec> specs;
    for (std::size_t l = 0; l + 1 < layers.size(); ++l) {
      const auto& jl = layers[l];
      LayerSpec s;
      s.patch_h = jl.at("patch").at(0).get<int>();
      s.patch_w = jl.at("patch").at(1).get<int>();
      s.offset_h = jl.at("offset").at(0).get<int>();
      s.offset_w = jl.at("offset").at(1).get<int>();
      s.neurons = jl.at("neurons").get<int>();
      specs.push_back(s);
    }
    ModelFile out{Network(channels, classes, specs), {}};
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const auto& jl = layers[l];
      Layer& layer = out.network.layer(l);
      if (jl.at("neurons").get<int>() != layer.neurons()) {
        throw DataError("model: head neuron count does not match class_count");
      }
      layer.activation = activation_from_string(jl.at("activation").get<std::string>());
      layer.weights = matrix_from_json(jl.at("weights"), layer.neurons(), layer.fan_in());
      const auto bias = jl.at("bias").get<std::vector<double>>();
      if (static_cast<int>(bias.size()) != layer.neurons()) throw DataError("model: bias length");
      layer.bias = Eigen::Map<const VectorXd>(bias.data(), static_cast<Eigen::Index>(bias.size()));
    }
    if (doc.contains("provenance")) {
      const auto& p = doc["provenance"];
      out.provenance.init_method = p.value("init_method", std::string("none"));
      out.provenance.seed = p.value("seed", std::uint64_t{0});
      out.provenance.lda_sample_count = p.value("lda_sample_count", std::size_t{0});
      out.provenance.epochs_trained = p.value("epochs_trained", std::size_t{0});
    }
    if (!out.network.all_finite()) throw NumericalError("model: non-finite weights");
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("model: malformed document: ") + e.what());
  } catch (const InvalidInputError& e) {
    throw DataError(std::string("model: invalid architecture: ") + e.what());
  }
}

nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void write_json(const std::filesystem::path& path, const nlohmann::json& doc) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << doc.dump(1) << '\n';
}

void save_model(const std::filesystem::path& path, const Network& net,
                const Provenance& provenance) {
  write_json(path, model_to_json(net, provenance));
}

ModelFile load_model(const std::filesystem::path& path) { return model_from_json(read_json(path)); }

}  // namespace ldanet
