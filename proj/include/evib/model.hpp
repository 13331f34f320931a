#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "evib/autodiff.hpp"

namespace evib {

struct DenseLayer {
  ad::Parameter weight;  // in x out
  ad::Parameter bias;    // 1 x out
};

// Shared tanh trunk g followed by two affine heads: h_mu for the Gaussian
// mean of the pre-evidence and h_sigma (through a softplus) for its standard
// deviation. The EDL and MAP baselines use h_mu alone.
class DualHeadModel {
 public:
  DualHeadModel() = default;
  DualHeadModel(std::vector<DenseLayer> trunk, DenseLayer head_mu, DenseLayer head_sigma);
  DualHeadModel(const DualHeadModel& other);
  DualHeadModel& operator=(const DualHeadModel& other);
  DualHeadModel(DualHeadModel&&) noexcept = default;
  DualHeadModel& operator=(DualHeadModel&&) noexcept = default;

  // [input, hidden_1, ..., hidden_n]
  std::vector<std::size_t> layer_sizes() const;
  std::size_t input_dim() const;
  std::size_t class_count() const;
  std::size_t parameter_count() const;

  // Trunk layers in order, then head_mu, then head_sigma; weight before bias.
  std::vector<ad::Parameter>& parameters() { return params_; }
  const std::vector<ad::Parameter>& parameters() const { return params_; }

  const std::vector<DenseLayer>& trunk() const { return trunk_; }
  const DenseLayer& head_mu() const { return head_mu_; }
  const DenseLayer& head_sigma() const { return head_sigma_; }

 private:
  void collect();

  std::vector<DenseLayer> trunk_;
  DenseLayer head_mu_;
  DenseLayer head_sigma_;
  std::vector<ad::Parameter> params_;
};

// Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases zero; head_sigma starts
// as an exact copy of head_mu.
DualHeadModel build_model(const std::vector<std::size_t>& layer_sizes, std::size_t class_count,
                          std::uint64_t seed);

struct PreEvidenceDistribution {
  ad::Var mu;     // [B, C]
  ad::Var sigma;  // [B, C], strictly positive
};

ad::Var trunk_forward(const DualHeadModel& model, const ad::Var& x);
PreEvidenceDistribution forward_dual(const DualHeadModel& model, const ad::Var& x);
// h_mu(g(x)) only: pre-evidence for EDL, logits for MAP.
ad::Var forward_mean_head(const DualHeadModel& model, const ad::Var& x);

void save_checkpoint(const DualHeadModel& model, const std::filesystem::path& path);
// Architecture is recovered from the parameter shapes.
DualHeadModel load_checkpoint(const std::filesystem::path& path);
// Loads into an existing architecture; throws DimensionError naming the first
// parameter whose shape differs.
void load_checkpoint_into(DualHeadModel& model, const std::filesystem::path& path);

}  // namespace evib
