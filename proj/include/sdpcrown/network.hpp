#pragma once

#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sdpcrown/linalg.hpp"

namespace sdpcrown {

struct DenseLayer {
  Matrix weight;               // out x in
  std::optional<Vector> bias;  // length out; absent means zero

  Vector bias_or_zero() const {
    return bias ? *bias : Vector::Zero(weight.rows());
  }
};

/// Feedforward ReLU network f(x) = z^(N). ReLU is applied between
/// consecutive layers and not after the last one.
class Network {
 public:
  explicit Network(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
    if (layers_.empty()) throw std::invalid_argument("Network: needs at least one layer");
    for (std::size_t k = 0; k < layers_.size(); ++k) {
      const auto& l = layers_[k];
      require_finite(l.weight, "Network weight");
      if (l.bias) {
        if (!l.bias->allFinite())
          throw std::invalid_argument("Network: non-finite bias in layer " + std::to_string(k + 1));
        if (l.bias->size() != l.weight.rows())
          throw std::invalid_argument("Network: bias length mismatch in layer " + std::to_string(k + 1));
      }
      if (k > 0 && l.weight.cols() != layers_[k - 1].weight.rows())
        throw std::invalid_argument("Network: dimension chain broken at layer " + std::to_string(k + 1));
    }
  }

  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::size_t depth() const { return layers_.size(); }
  Index input_dim() const { return layers_.front().weight.cols(); }
  Index output_dim() const { return layers_.back().weight.rows(); }

 private:
  std::vector<DenseLayer> layers_;
};

inline Vector forward(const Network& net, const Vector& x) {
  if (x.size() != net.input_dim())
    throw std::invalid_argument("forward: input dimension mismatch");
  Vector z = x;
  for (std::size_t k = 0; k < net.depth(); ++k) {
    if (k > 0) z = z.cwiseMax(0.0);
    z = net.layers()[k].weight * z + net.layers()[k].bias_or_zero();
  }
  return z;
}

/// All preactivations z^(1), ..., z^(N).
inline std::vector<Vector> forward_trace(const Network& net, const Vector& x) {
  if (x.size() != net.input_dim())
    throw std::invalid_argument("forward_trace: input dimension mismatch");
  std::vector<Vector> zs;
  zs.reserve(net.depth());
  Vector cur = x;
  for (std::size_t k = 0; k < net.depth(); ++k) {
    if (k > 0) cur = cur.cwiseMax(0.0);
    cur = net.layers()[k].weight * cur + net.layers()[k].bias_or_zero();
    zs.push_back(cur);
  }
  return zs;
}

// -- on-disk format: {"layers":[{"weight":[[...]], "bias":[...]?}]} --

inline Network load_network(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_network: cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("load_network: malformed JSON in " + path + ": " + e.what());
  }
  if (!j.contains("layers") || !j["layers"].is_array() || j["layers"].empty())
    throw std::runtime_error("load_network: missing or empty \"layers\" array");

  std::vector<DenseLayer> layers;
  int idx = 0;
  for (const auto& jl : j["layers"]) {
    ++idx;
    if (!jl.contains("weight") || !jl["weight"].is_array() || jl["weight"].empty())
      throw std::runtime_error("load_network: layer " + std::to_string(idx) + " has no weight");
    const auto& rows = jl["weight"];
    const std::size_t ncols = rows[0].size();
    Matrix W(static_cast<Index>(rows.size()), static_cast<Index>(ncols));
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (rows[r].size() != ncols)
        throw std::runtime_error("load_network: ragged weight rows in layer " + std::to_string(idx));
      for (std::size_t c = 0; c < ncols; ++c)
        W(static_cast<Index>(r), static_cast<Index>(c)) = rows[r][c].get<double>();
    }
    DenseLayer layer{W, std::nullopt};
    if (jl.contains("bias")) {
      Vector b(static_cast<Index>(jl["bias"].size()));
      for (std::size_t i = 0; i < jl["bias"].size(); ++i)
        b[static_cast<Index>(i)] = jl["bias"][i].get<double>();
      layer.bias = b;
    }
    layers.push_back(std::move(layer));
  }
  try {
    return Network(std::move(layers));
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(std::string("load_network: ") + e.what());
  }
}

inline void save_network(const Network& net, const std::string& path) {
  nlohmann::json j;
  j["layers"] = nlohmann::json::array();
  for (const auto& l : net.layers()) {
    nlohmann::json jl;
    auto rows = nlohmann::json::array();
    for (Index r = 0; r < l.weight.rows(); ++r) {
      auto row = nlohmann::json::array();
      for (Index c = 0; c < l.weight.cols(); ++c) row.push_back(l.weight(r, c));
      rows.push_back(std::move(row));
    }
    jl["weight"] = std::move(rows);
    if (l.bias) {
      auto b = nlohmann::json::array();
      for (Index i = 0; i < l.bias->size(); ++i) b.push_back((*l.bias)[i]);
      jl["bias"] = std::move(b);
    }
    j["layers"].push_back(std::move(jl));
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_network: cannot write " + path);
  out << j.dump(1) << "\n";
}

/// Dataset row: "label,v0,v1,...,v_{d-1}".
struct Sample {
  int label;
  Vector input;
};

inline std::vector<Sample> load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_dataset: cannot open " + path);
  std::vector<Sample> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<double> vals;
    std::size_t pos = 0;
    while (pos <= line.size()) {
      std::size_t comma = line.find(',', pos);
      std::string tok = line.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
      try {
        vals.push_back(std::stod(tok));
      } catch (...) {
        throw std::runtime_error("load_dataset: bad number at line " + std::to_string(lineno));
      }
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
    if (vals.size() < 2)
      throw std::runtime_error("load_dataset: line " + std::to_string(lineno) + " too short");
    Sample s;
    s.label = static_cast<int>(vals[0]);
    s.input = Vector(static_cast<Index>(vals.size()) - 1);
    for (std::size_t i = 1; i < vals.size(); ++i) s.input[static_cast<Index>(i) - 1] = vals[i];
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace sdpcrown
