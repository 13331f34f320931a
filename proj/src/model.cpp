#include "evib/model.hpp"

#include <cmath>
#include <map>
#include <random>

#include "evib/error.hpp"

namespace evib {
namespace {

ad::Parameter make_param(std::string name, Tensor value) {
  return ad::Parameter{std::move(name), ad::Var::leaf(std::move(value), true)};
}

DenseLayer clone_layer(const DenseLayer& layer) {
  return DenseLayer{layer.weight.clone(), layer.bias.clone()};
}

DenseLayer init_layer(const std::string& prefix, std::size_t in, std::size_t out,
                      std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  std::uniform_real_distribution<double> uniform(-bound, bound);
  Tensor w(in, out);
  for (auto& v : w.data()) v = uniform(rng);
  return DenseLayer{make_param(prefix + ".weight", std::move(w)),
                    make_param(prefix + ".bias", Tensor(1, out, 0.0))};
}

ad::Var apply(const DenseLayer& layer, const ad::Var& x) {
  return ad::linear_combine(x, layer.weight.var, layer.bias.var);
}

std::string trunk_name(std::size_t i) { return "trunk." + std::to_string(i); }

}  // namespace

DualHeadModel::DualHeadModel(std::vector<DenseLayer> trunk, DenseLayer head_mu,
                             DenseLayer head_sigma)
    : trunk_(std::move(trunk)), head_mu_(std::move(head_mu)), head_sigma_(std::move(head_sigma)) {
  collect();
}

DualHeadModel::DualHeadModel(const DualHeadModel& other)
    : head_mu_(clone_layer(other.head_mu_)), head_sigma_(clone_layer(other.head_sigma_)) {
  for (const auto& layer : other.trunk_) trunk_.push_back(clone_layer(layer));
  collect();
}

DualHeadModel& DualHeadModel::operator=(const DualHeadModel& other) {
  if (this != &other) {
    DualHeadModel copy(other);
    *this = std::move(copy);
  }
  return *this;
}

void DualHeadModel::collect() {
  params_.clear();
  for (const auto& layer : trunk_) {
    params_.push_back(layer.weight);
    params_.push_back(layer.bias);
  }
  params_.push_back(head_mu_.weight);
  params_.push_back(head_mu_.bias);
  params_.push_back(head_sigma_.weight);
  params_.push_back(head_sigma_.bias);
}

std::vector<std::size_t> DualHeadModel::layer_sizes() const {
  std::vector<std::size_t> sizes;
  if (trunk_.empty()) return sizes;
  sizes.push_back(trunk_.front().weight.var.rows());
  for (const auto& layer : trunk_) sizes.push_back(layer.weight.var.cols());
  return sizes;
}

std::size_t DualHeadModel::input_dim() const {
  return trunk_.empty() ? 0 : trunk_.front().weight.var.rows();
}

std::size_t DualHeadModel::class_count() const { return head_mu_.weight.var.cols(); }

std::size_t DualHeadModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.var.value().size();
  return n;
}

DualHeadModel build_model(const std::vector<std::size_t>& layer_sizes, std::size_t class_count,
                          std::uint64_t seed) {
  if (layer_sizes.size() < 2) {
    throw ConfigError("layer_sizes needs an input size and at least one hidden layer");
  }
  if (class_count < 1) throw ConfigError("class_count must be positive");
  for (std::size_t s : layer_sizes) {
    if (s == 0) throw ConfigError("layer sizes must be positive");
  }
  std::mt19937_64 rng(seed);
  std::vector<DenseLayer> trunk;
  for (std::size_t i = 0; i + 1 < layer_sizes.size(); ++i) {
    trunk.push_back(init_layer(trunk_name(i), layer_sizes[i], layer_sizes[i + 1], rng));
  }
  DenseLayer head_mu = init_layer("head_mu", layer_sizes.back(), class_count, rng);
  DenseLayer head_sigma{make_param("head_sigma.weight", head_mu.weight.var.value()),
                        make_param("head_sigma.bias", head_mu.bias.var.value())};
  return DualHeadModel(std::move(trunk), std::move(head_mu), std::move(head_sigma));
}

ad::Var trunk_forward(const DualHeadModel& model, const ad::Var& x) {
  if (x.cols() != model.input_dim()) {
    throw DimensionError("model expects " + std::to_string(model.input_dim()) +
                         " input features, got input of shape " + x.value().shape_string());
  }
  ad::Var h = x;
  for (const auto& layer : model.trunk()) h = ad::tanh(apply(layer, h));
  return h;
}

PreEvidenceDistribution forward_dual(const DualHeadModel& model, const ad::Var& x) {
  const ad::Var features = trunk_forward(model, x);
  return {apply(model.head_mu(), features), ad::softplus(apply(model.head_sigma(), features))};
}

ad::Var forward_mean_head(const DualHeadModel& model, const ad::Var& x) {
  return apply(model.head_mu(), trunk_forward(model, x));
}

void save_checkpoint(const DualHeadModel& model, const std::filesystem::path& path) {
  ad::save_parameters(model.parameters(), path);
}

DualHeadModel load_checkpoint(const std::filesystem::path& path) {
  auto tensors = ad::load_parameters(path);
  auto take = [&](const std::string& name) {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw ParseError(path.string() + ": missing parameter '" + name + "'");
    ad::Parameter p = make_param(name, it->second);
    tensors.erase(it);
    return p;
  };
  std::vector<DenseLayer> trunk;
  for (std::size_t i = 0; tensors.count(trunk_name(i) + ".weight") > 0; ++i) {
    trunk.push_back(DenseLayer{take(trunk_name(i) + ".weight"), take(trunk_name(i) + ".bias")});
  }
  if (trunk.empty()) throw ParseError(path.string() + ": checkpoint has no trunk layers");
  DenseLayer head_mu{take("head_mu.weight"), take("head_mu.bias")};
  DenseLayer head_sigma{take("head_sigma.weight"), take("head_sigma.bias")};
  if (!tensors.empty()) {
    throw ParseError(path.string() + ": unexpected parameter '" + tensors.begin()->first + "'");
  }
  // Chain consistency.
  std::size_t width = trunk.front().weight.var.rows();
  auto check = [&](const DenseLayer& layer) {
    const auto& w = layer.weight.var.value();
    const auto& b = layer.bias.var.value();
    if (w.rows() != width || b.rows() != 1 || b.cols() != w.cols()) {
      throw DimensionError(path.string() + ": parameter '" + layer.weight.name + "' has shape " +
                           w.shape_string() + " inconsistent with preceding width " +
                           std::to_string(width));
    }
  };
  for (const auto& layer : trunk) {
    check(layer);
    width = layer.weight.var.cols();
  }
  check(head_mu);
  check(head_sigma);
  if (head_mu.weight.var.cols() != head_sigma.weight.var.cols()) {
    throw DimensionError(path.string() + ": head_sigma.weight width differs from head_mu.weight");
  }
  return DualHeadModel(std::move(trunk), std::move(head_mu), std::move(head_sigma));
}

void load_checkpoint_into(DualHeadModel& model, const std::filesystem::path& path) {
  const auto tensors = ad::load_parameters(path);
  for (auto& p : model.parameters()) {
    auto it = tensors.find(p.name);
    if (it == tensors.end()) {
      throw ParseError(path.string() + ": missing parameter '" + p.name + "'");
    }
    if (!it->second.same_shape(p.var.value())) {
      throw DimensionError("parameter '" + p.name + "' has shape " + it->second.shape_string() +
                           " in checkpoint, model expects " + p.var.value().shape_string());
    }
  }
  if (tensors.size() != model.parameters().size()) {
    throw DimensionError(path.string() + ": checkpoint has " + std::to_string(tensors.size()) +
                         " parameters, model has " + std::to_string(model.parameters().size()));
  }
  for (auto& p : model.parameters()) p.var.mutable_value() = tensors.at(p.name);
}

}  // namespace evib
