#pragma once

#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nacert/errors.hpp"
#include "nacert/hyperrectangle.hpp"

namespace nacert {

enum class Activation { ReLU, LeakyReLU, Identity };

inline const char* to_string(Activation a) {
  switch (a) {
    case Activation::ReLU: return "relu";
    case Activation::LeakyReLU: return "leaky_relu";
    case Activation::Identity: return "identity";
  }
  return "?";
}

struct Layer {
  Matrix weight;  // out x in
  Vector bias;    // empty when the layer has no bias
  Activation activation = Activation::Identity;
  double slope = 0.0;  // LeakyReLU only

  Eigen::Index in_dim() const { return weight.cols(); }
  Eigen::Index out_dim() const { return weight.rows(); }
  bool has_bias() const { return bias.size() > 0; }

  Vector affine(const Vector& x) const {
    Vector z = weight * x;
    if (has_bias()) z += bias;
    return z;
  }

  double activate(double z) const {
    switch (activation) {
      case Activation::ReLU: return z > 0.0 ? z : 0.0;
      case Activation::LeakyReLU: return z > 0.0 ? z : slope * z;
      case Activation::Identity: return z;
    }
    return z;
  }

  void validate() const {
    if (weight.size() == 0) throw DimensionError("layer with empty weight matrix");
    if (has_bias() && bias.size() != weight.rows())
      throw DimensionError("bias has length " + std::to_string(bias.size()) + ", weight has " +
                           std::to_string(weight.rows()) + " rows");
    if (activation == Activation::LeakyReLU && !(slope > 0.0 && slope < 1.0))
      throw DimensionError("leaky_relu slope must lie strictly between 0 and 1");
    if (!weight.allFinite() || (has_bias() && !bias.allFinite())) throw DimensionError("non-finite layer parameter");
  }
};

class Network {
 public:
  Network() = default;
  explicit Network(std::vector<Layer> layers) : layers_(std::move(layers)) {
    if (layers_.empty()) throw DimensionError("network has no layers");
    for (std::size_t k = 0; k < layers_.size(); ++k) {
      layers_[k].validate();
      if (k > 0 && layers_[k].in_dim() != layers_[k - 1].out_dim())
        throw DimensionError("layer " + std::to_string(k) + " expects " + std::to_string(layers_[k].in_dim()) +
                             " inputs, previous layer produces " + std::to_string(layers_[k - 1].out_dim()));
    }
    if (layers_.back().activation != Activation::Identity)
      throw DimensionError("the last layer must use the identity activation");
  }

  std::size_t input_dim() const { return static_cast<std::size_t>(layers_.front().in_dim()); }
  std::size_t output_dim() const { return static_cast<std::size_t>(layers_.back().out_dim()); }
  const std::vector<Layer>& layers() const { return layers_; }
  std::size_t depth() const { return layers_.size(); }

  std::size_t parameter_count() const {
    std::size_t c = 0;
    for (const auto& l : layers_) c += static_cast<std::size_t>(l.weight.size() + l.bias.size());
    return c;
  }

 private:
  std::vector<Layer> layers_;
};

inline Vector forward(const Network& net, const Vector& x) {
  if (static_cast<std::size_t>(x.size()) != net.input_dim())
    throw DimensionError("network expects " + std::to_string(net.input_dim()) + " inputs, got " +
                         std::to_string(x.size()));
  Vector h = x;
  for (const auto& l : net.layers()) {
    h = l.affine(h);
    if (l.activation != Activation::Identity)
      for (Eigen::Index i = 0; i < h.size(); ++i) h[i] = l.activate(h[i]);
  }
  return h;
}

// Forward pass on many points at once; one point per column.
inline Matrix forward_batch(const Network& net, const Matrix& X) {
  if (static_cast<std::size_t>(X.rows()) != net.input_dim())
    throw DimensionError("network expects " + std::to_string(net.input_dim()) + " inputs, got " +
                         std::to_string(X.rows()));
  Matrix H = X;
  for (const auto& l : net.layers()) {
    Matrix Z = l.weight * H;
    if (l.has_bias()) Z.colwise() += l.bias;
    if (l.activation != Activation::Identity) Z = Z.unaryExpr([&l](double z) { return l.activate(z); });
    H = std::move(Z);
  }
  return H;
}

// Layers of a, then b, ... The identity head of each network feeds the next
// network's first layer directly, so forward passes compose exactly.
inline Network chain(const std::vector<Network>& nets) {
  if (nets.empty()) throw DimensionError("chain of zero networks");
  std::vector<Layer> layers;
  for (std::size_t k = 0; k < nets.size(); ++k) {
    if (k > 0 && nets[k].input_dim() != nets[k - 1].output_dim())
      throw DimensionError("cannot chain: network " + std::to_string(k) + " expects " +
                           std::to_string(nets[k].input_dim()) + " inputs, previous produces " +
                           std::to_string(nets[k - 1].output_dim()));
    layers.insert(layers.end(), nets[k].layers().begin(), nets[k].layers().end());
  }
  return Network(std::move(layers));
}

// Same function with runs of consecutive identity layers multiplied out.
// Used for bound propagation only: the product is not bit-identical to the
// layerwise forward pass.
inline Network fold_identity_layers(const Network& net) {
  std::vector<Layer> out;
  for (const auto& l : net.layers()) {
    if (!out.empty() && out.back().activation == Activation::Identity) {
      Layer& prev = out.back();
      Layer merged;
      merged.weight = l.weight * prev.weight;
      Vector b = Vector::Zero(l.out_dim());
      if (prev.has_bias()) b += l.weight * prev.bias;
      if (l.has_bias()) b += l.bias;
      if (prev.has_bias() || l.has_bias()) merged.bias = b;
      merged.activation = l.activation;
      merged.slope = l.slope;
      prev = std::move(merged);
    } else {
      out.push_back(l);
    }
  }
  return Network(std::move(out));
}

// Keep only output row j of the last layer.
inline Network select_output(const Network& net, std::size_t j) {
  if (j >= net.output_dim()) throw DimensionError("output index out of range");
  auto layers = net.layers();
  Layer& last = layers.back();
  last.weight = Matrix(last.weight.row(static_cast<Eigen::Index>(j)));
  if (last.has_bias()) last.bias = Vector::Constant(1, last.bias[static_cast<Eigen::Index>(j)]);
  return Network(std::move(layers));
}

// ---------------------------------------------------------------- weight files

inline Network network_from_json(const nlohmann::json& doc) {
  auto where = [](std::size_t k, const char* field) {
    return "layers[" + std::to_string(k) + "]." + field;
  };
  try {
    if (!doc.is_object()) throw ParseError("weight file must be a JSON object");
    if (!doc.contains("version") || doc.at("version").get<int>() != 1)
      throw ParseError("unsupported or missing weight file version (expected 1)");
    const auto& jl = doc.at("layers");
    if (!jl.is_array() || jl.empty()) throw ParseError("field 'layers' must be a non-empty array");
    std::vector<Layer> layers;
    for (std::size_t k = 0; k < jl.size(); ++k) {
      const auto& L = jl[k];
      Layer layer;
      const auto& W = L.at("weight");
      if (!W.is_array() || W.empty() || !W[0].is_array())
        throw ParseError("field '" + where(k, "weight") + "' must be a nested array");
      const std::size_t rows = W.size(), cols = W[0].size();
      layer.weight.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
      for (std::size_t r = 0; r < rows; ++r) {
        if (W[r].size() != cols) throw ParseError("ragged rows in '" + where(k, "weight") + "'");
        for (std::size_t c = 0; c < cols; ++c)
          layer.weight(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = W[r][c].get<double>();
      }
      if (L.contains("bias") && !L.at("bias").is_null()) {
        const auto b = L.at("bias").get<std::vector<double>>();
        layer.bias = Eigen::Map<const Vector>(b.data(), static_cast<Eigen::Index>(b.size()));
      }
      const auto act = L.value("activation", std::string("identity"));
      if (act == "relu") {
        layer.activation = Activation::ReLU;
      } else if (act == "leaky_relu") {
        layer.activation = Activation::LeakyReLU;
        if (!L.contains("slope")) throw ParseError("missing '" + where(k, "slope") + "' for leaky_relu");
        layer.slope = L.at("slope").get<double>();
      } else if (act == "identity") {
        layer.activation = Activation::Identity;
      } else {
        throw ParseError("unknown activation '" + act + "' in '" + where(k, "activation") + "'");
      }
      layers.push_back(std::move(layer));
    }
    Network net(std::move(layers));
    if (doc.contains("n") && doc.at("n").get<std::size_t>() != net.input_dim())
      throw DimensionError("field 'n' does not match the first layer");
    if (doc.contains("m") && doc.at("m").get<std::size_t>() != net.output_dim())
      throw DimensionError("field 'm' does not match the last layer");
    return net;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed weight file: ") + e.what());
  }
}

inline nlohmann::json network_to_json(const Network& net) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : net.layers()) {
    nlohmann::json W = nlohmann::json::array();
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
      nlohmann::json row = nlohmann::json::array();
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) row.push_back(l.weight(r, c));
      W.push_back(std::move(row));
    }
    nlohmann::json jl = {{"weight", std::move(W)}, {"activation", to_string(l.activation)}};
    if (l.has_bias()) jl["bias"] = std::vector<double>(l.bias.data(), l.bias.data() + l.bias.size());
    if (l.activation == Activation::LeakyReLU) jl["slope"] = l.slope;
    layers.push_back(std::move(jl));
  }
  return {{"version", 1}, {"n", net.input_dim()}, {"m", net.output_dim()}, {"layers", std::move(layers)}};
}

// nlohmann::json prints doubles with the shortest round-trip representation.
inline void save_weights(const Network& net, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write weight file '" + path + "'");
  out << network_to_json(net).dump() << '\n';
}

inline Network load_weights(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open weight file '" + path + "'");
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    // e.byte is the offset; recover line/column for the diagnostic
    in.clear();
    in.seekg(0);
    std::size_t line = 1, col = 1, pos = 0;
    char ch;
    while (pos + 1 < e.byte && in.get(ch)) {
      ++pos;
      if (ch == '\n') ++line, col = 1;
      else ++col;
    }
    throw ParseError("weight file '" + path + "': " + e.what(), line, col);
  }
  try {
    return network_from_json(doc);
  } catch (const ParseError& e) {
    throw ParseError("weight file '" + path + "': " + e.what());
  }
}

}  // namespace nacert
