#pragma once

// IB-EDL training and inference, with the EDL and MAP baselines.

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "evib/data.hpp"
#include "evib/evidential.hpp"
#include "evib/metrics.hpp"
#include "evib/model.hpp"
#include "evib/sampling.hpp"

namespace evib {

enum class TrainMode { ib_edl, edl, map };
enum class Schedule { constant, cosine };

std::string to_string(TrainMode mode);
TrainMode train_mode_from_string(const std::string& name);
std::string to_string(Schedule schedule);
Schedule schedule_from_string(const std::string& name);

struct TrainConfig {
  TrainMode mode = TrainMode::ib_edl;
  double beta = 1e-3;
  double lambda = 0.1;
  double eta = 1.0;
  std::size_t samples = 20;  // K
  double learning_rate = 1e-2;
  std::size_t epochs = 500;
  std::size_t batch_size = 32;
  double clip_norm = 20.0;
  std::uint64_t seed = 0;
  Schedule schedule = Schedule::cosine;
  // ib_edl only: replace the h_sigma output by this constant.
  std::optional<double> fixed_sigma;

  // Throws ConfigError on invalid values.
  void validate() const;
  // Settings that have no effect in the chosen mode.
  std::vector<std::string> warnings() const;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double loss_total = 0.0;
  std::map<std::string, double> components;
  double grad_norm_preclip = 0.0;  // mean over the epoch's steps
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  std::map<std::string, Tensor> final_parameters;

  // One JSON object per epoch: {epoch, loss_total, components{...}, grad_norm_preclip}.
  std::string to_jsonl() const;
};

// Mini-batch training. Each step: loss -> backward -> clip_gradient_norm ->
// optimizer_step -> zero_gradients. Throws NumericalError on a non-finite loss.
TrainReport train(DualHeadModel& model, const data::LabeledDataset& dataset,
                  const TrainConfig& config);

struct PredictionOutput {
  std::optional<DirichletBelief> alpha;  // absent in map mode
  std::vector<double> probabilities;
  std::size_t predicted_class = 0;
  std::optional<double> uncertainty_mass;
  std::vector<double> mu;                    // pre-evidence mean (logits in map mode)
  std::optional<std::vector<double>> sigma;  // ib_edl only
};

// Inference on a fixed Gaussian over pre-evidence: average K draws of
// mu + sigma * eps first, then alpha = softplus(average) + eta.
PredictionOutput predict_from_distribution(std::span<const double> mu,
                                           std::span<const double> sigma, std::size_t samples,
                                           double eta, Rng& rng);

PredictionOutput predict(const DualHeadModel& model, std::span<const double> x,
                         const TrainConfig& config, Rng& rng);
// Row-by-row equivalent of predict() with one shared generator.
std::vector<PredictionOutput> predict_batch(const DualHeadModel& model, const Tensor& x,
                                            const TrainConfig& config, Rng& rng);

ScoredPrediction to_scored(const PredictionOutput& pred, std::size_t true_class, bool is_ood);
std::vector<ScoredPrediction> score_dataset(const DualHeadModel& model,
                                            const data::LabeledDataset& ds,
                                            const TrainConfig& config, Rng& rng);

}  // namespace evib
