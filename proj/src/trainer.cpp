#include "evib/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "evib/error.hpp"
#include "evib/losses.hpp"
#include "evib/special_functions.hpp"

namespace evib {

std::string to_string(TrainMode mode) {
  switch (mode) {
    case TrainMode::ib_edl: return "ib_edl";
    case TrainMode::edl: return "edl";
    case TrainMode::map: return "map";
  }
  return "ib_edl";
}

TrainMode train_mode_from_string(const std::string& name) {
  if (name == "ib_edl") return TrainMode::ib_edl;
  if (name == "edl") return TrainMode::edl;
  if (name == "map") return TrainMode::map;
  throw ConfigError("unknown mode '" + name + "' (expected ib_edl, edl or map)");
}

std::string to_string(Schedule schedule) {
  return schedule == Schedule::cosine ? "cosine" : "constant";
}

Schedule schedule_from_string(const std::string& name) {
  if (name == "cosine") return Schedule::cosine;
  if (name == "constant") return Schedule::constant;
  throw ConfigError("unknown schedule '" + name + "' (expected constant or cosine)");
}

void TrainConfig::validate() const {
  if (!(beta >= 0.0)) throw ConfigError("beta must be >= 0");
  if (!(lambda >= 0.0)) throw ConfigError("lambda must be >= 0");
  if (!(eta > 0.0)) throw ConfigError("eta must be > 0");
  if (samples < 1) throw ConfigError("K must be at least 1");
  if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be > 0");
  if (epochs < 1) throw ConfigError("epochs must be at least 1");
  if (batch_size < 1) throw ConfigError("batch size must be at least 1");
  if (!(clip_norm > 0.0)) throw ConfigError("clip norm must be > 0");
  if (fixed_sigma && !(*fixed_sigma > 0.0)) throw ConfigError("fixed sigma must be > 0");
}

std::vector<std::string> TrainConfig::warnings() const {
  const TrainConfig defaults;
  std::vector<std::string> out;
  if (mode != TrainMode::ib_edl && beta != defaults.beta) {
    out.push_back("beta is ignored outside ib_edl mode");
  }
  if (mode != TrainMode::ib_edl && samples != defaults.samples) {
    out.push_back("K is ignored outside ib_edl mode");
  }
  if (mode != TrainMode::ib_edl && fixed_sigma) {
    out.push_back("fixed sigma is ignored outside ib_edl mode");
  }
  if (mode != TrainMode::edl && lambda != defaults.lambda) {
    out.push_back("lambda is ignored outside edl mode");
  }
  if (mode == TrainMode::map && eta != defaults.eta) out.push_back("eta is ignored in map mode");
  return out;
}

std::string TrainReport::to_jsonl() const {
  std::ostringstream out;
  for (const auto& e : epochs) {
    nlohmann::ordered_json rec;
    rec["epoch"] = e.epoch;
    rec["loss_total"] = e.loss_total;
    nlohmann::ordered_json comps = nlohmann::ordered_json::object();
    for (const auto& [k, v] : e.components) comps[k] = v;
    rec["components"] = std::move(comps);
    rec["grad_norm_preclip"] = e.grad_norm_preclip;
    out << rec.dump() << '\n';
  }
  return out.str();
}

namespace {

LossValue batch_loss(const DualHeadModel& model, const ad::Var& x,
                     std::span<const OneHotTarget> targets, const TrainConfig& config, Rng& rng) {
  switch (config.mode) {
    case TrainMode::ib_edl: {
      PreEvidenceDistribution dist = forward_dual(model, x);
      if (config.fixed_sigma) {
        dist.sigma = ad::Var::constant(Tensor(dist.mu.rows(), dist.mu.cols(), *config.fixed_sigma));
      }
      return ib_total(dist.mu, dist.sigma, targets, config.beta, config.samples, rng, config.eta);
    }
    case TrainMode::edl: {
      const ad::Var alpha = alpha_from_pre_evidence(forward_mean_head(model, x), config.eta);
      return edl_total(alpha, targets, config.lambda, BaseLoss::mse);
    }
    case TrainMode::map:
      return mle_nll(forward_mean_head(model, x), targets);
  }
  throw ConfigError("unreachable mode");
}

std::size_t first_max(std::span<const double> v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

PredictionOutput from_alpha(std::vector<double> alpha, double eta) {
  PredictionOutput out;
  DirichletBelief belief(std::move(alpha), eta);
  out.probabilities = expected_probabilities(belief);
  out.predicted_class = argmax(out.probabilities);
  out.uncertainty_mass = belief_and_uncertainty(belief).uncertainty;
  out.alpha = std::move(belief);
  return out;
}

}  // namespace

TrainReport train(DualHeadModel& model, const data::LabeledDataset& dataset,
                  const TrainConfig& config) {
  config.validate();
  const std::size_t n = dataset.size();
  if (n == 0) throw DataError("training set is empty");
  if (dataset.dim() != model.input_dim()) {
    throw DimensionError("dataset has " + std::to_string(dataset.dim()) +
                         " features, model expects " + std::to_string(model.input_dim()));
  }
  const std::size_t classes = model.class_count();
  for (std::size_t i = 0; i < n; ++i) {
    if (dataset.labels[i] >= classes) {
      std::ostringstream msg;
      msg << "sample " << i << " has label " << dataset.labels[i] << " but the model has "
          << classes << " classes";
      throw DataError(msg.str());
    }
  }

  // Shuffling and reparameterization noise use separate streams so that the
  // batch order does not depend on the mode.
  Rng shuffle_rng(config.seed);
  Rng noise_rng(config.seed ^ 0x5deece66dULL);
  auto& params = model.parameters();
  ad::zero_gradients(params);
  ad::OptimizerState optimizer;
  const std::size_t steps_per_epoch = (n + config.batch_size - 1) / config.batch_size;
  const std::uint64_t total_steps = steps_per_epoch * config.epochs;
  std::uint64_t step = 0;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  const std::size_t d = dataset.dim();

  TrainReport report;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    EpochRecord record;
    record.epoch = epoch;
    double norm_sum = 0.0;
    for (std::size_t b = 0; b < steps_per_epoch; ++b) {
      const std::size_t begin = b * config.batch_size;
      const std::size_t end = std::min(n, begin + config.batch_size);
      Tensor xb(end - begin, d);
      std::vector<OneHotTarget> targets;
      targets.reserve(end - begin);
      for (std::size_t r = begin; r < end; ++r) {
        const std::size_t idx = order[r];
        for (std::size_t k = 0; k < d; ++k) xb(r - begin, k) = dataset.features(idx, k);
        targets.emplace_back(dataset.labels[idx], classes);
      }
      auto where = [&] {
        std::ostringstream msg;
        msg << "epoch " << epoch << ", batch " << b << " (samples " << begin << ".." << end - 1
            << " of the shuffled order)";
        return msg.str();
      };
      LossValue loss;
      try {
        loss = batch_loss(model, ad::Var::constant(std::move(xb)), targets, config, noise_rng);
      } catch (const NumericalError& e) {
        throw NumericalError(std::string(e.what()) + " at " + where());
      } catch (const DomainError& e) {
        // the data was validated up front, so this means the parameters diverged
        throw NumericalError(std::string(e.what()) + " at " + where());
      }
      const double value = loss.total();
      if (!std::isfinite(value)) {
        std::ostringstream msg;
        msg << "non-finite loss " << value << " at " << where();
        throw NumericalError(msg.str());
      }
      ad::backward(loss.node);
      norm_sum += ad::clip_gradient_norm(params, config.clip_norm);
      const double lr = config.schedule == Schedule::cosine
                            ? ad::cosine_learning_rate(config.learning_rate, step, total_steps)
                            : config.learning_rate;
      // The cosine schedule reaches exactly zero on the last step.
      if (lr > 0.0) ad::optimizer_step(params, optimizer, lr);
      ad::zero_gradients(params);
      ++step;

      const double weight = static_cast<double>(end - begin) / static_cast<double>(n);
      record.loss_total += weight * value;
      for (const auto& [name, v] : loss.components) record.components[name] += weight * v;
    }
    record.grad_norm_preclip = norm_sum / static_cast<double>(steps_per_epoch);
    report.epochs.push_back(std::move(record));
  }
  for (const auto& p : params) report.final_parameters.emplace(p.name, p.var.value());
  return report;
}

PredictionOutput predict_from_distribution(std::span<const double> mu,
                                           std::span<const double> sigma, std::size_t samples,
                                           double eta, Rng& rng) {
  if (samples < 1) throw ConfigError("K must be at least 1");
  if (mu.size() != sigma.size()) throw DimensionError("mu and sigma lengths differ");
  const std::size_t c = mu.size();
  std::vector<double> noise_mean(c, 0.0);
  for (std::size_t k = 0; k < samples; ++k)
    for (std::size_t j = 0; j < c; ++j) noise_mean[j] += sample_standard_normal(rng);
  PreEvidence averaged;
  averaged.values.resize(c);
  for (std::size_t j = 0; j < c; ++j) {
    // mean_k(mu + sigma * eps_k) = mu + sigma * mean_k(eps_k)
    averaged.values[j] = mu[j] + sigma[j] * (noise_mean[j] / static_cast<double>(samples));
  }
  const DirichletBelief belief = alpha_from_pre_evidence(averaged, eta);
  PredictionOutput out = from_alpha(std::vector<double>(belief.alpha().begin(), belief.alpha().end()), eta);
  out.mu.assign(mu.begin(), mu.end());
  out.sigma = std::vector<double>(sigma.begin(), sigma.end());
  return out;
}

std::vector<PredictionOutput> predict_batch(const DualHeadModel& model, const Tensor& x,
                                            const TrainConfig& config, Rng& rng) {
  const ad::Var input = ad::Var::constant(x);
  std::vector<PredictionOutput> out;
  out.reserve(x.rows());
  switch (config.mode) {
    case TrainMode::ib_edl: {
      PreEvidenceDistribution dist = forward_dual(model, input);
      if (config.fixed_sigma) {
        dist.sigma = ad::Var::constant(Tensor(dist.mu.rows(), dist.mu.cols(), *config.fixed_sigma));
      }
      for (std::size_t r = 0; r < x.rows(); ++r) {
        out.push_back(predict_from_distribution(dist.mu.value().row_span(r),
                                                dist.sigma.value().row_span(r), config.samples,
                                                config.eta, rng));
      }
      break;
    }
    case TrainMode::edl: {
      const ad::Var mu = forward_mean_head(model, input);
      for (std::size_t r = 0; r < x.rows(); ++r) {
        auto row = mu.value().row_span(r);
        const DirichletBelief belief =
            alpha_from_pre_evidence(PreEvidence{std::vector<double>(row.begin(), row.end())}, config.eta);
        PredictionOutput p =
            from_alpha(std::vector<double>(belief.alpha().begin(), belief.alpha().end()), config.eta);
        p.mu.assign(row.begin(), row.end());
        out.push_back(std::move(p));
      }
      break;
    }
    case TrainMode::map: {
      // Plain softmax; deliberately independent of the evidential math.
      const ad::Var logits = forward_mean_head(model, input);
      for (std::size_t r = 0; r < x.rows(); ++r) {
        auto row = logits.value().row_span(r);
        PredictionOutput p;
        const double mx = *std::max_element(row.begin(), row.end());
        double s = 0.0;
        p.probabilities.resize(row.size());
        for (std::size_t j = 0; j < row.size(); ++j) {
          p.probabilities[j] = std::exp(row[j] - mx);
          s += p.probabilities[j];
        }
        for (auto& v : p.probabilities) v /= s;
        p.predicted_class = first_max(p.probabilities);
        p.mu.assign(row.begin(), row.end());
        out.push_back(std::move(p));
      }
      break;
    }
  }
  return out;
}

PredictionOutput predict(const DualHeadModel& model, std::span<const double> x,
                         const TrainConfig& config, Rng& rng) {
  return predict_batch(model, Tensor::row(x), config, rng).front();
}

ScoredPrediction to_scored(const PredictionOutput& pred, std::size_t true_class, bool is_ood) {
  ScoredPrediction s;
  s.probabilities = pred.probabilities;
  s.predicted_class = pred.predicted_class;
  s.true_class = true_class;
  s.uncertainty_mass = pred.uncertainty_mass;
  if (pred.sigma) {
    for (double v : *pred.sigma) s.sigma_sum += v;
  }
  s.is_ood = is_ood;
  return s;
}

std::vector<ScoredPrediction> score_dataset(const DualHeadModel& model,
                                            const data::LabeledDataset& ds,
                                            const TrainConfig& config, Rng& rng) {
  const auto preds = predict_batch(model, ds.features, config, rng);
  std::vector<ScoredPrediction> out;
  out.reserve(preds.size());
  const bool ood = ds.split == data::Split::ood;
  for (std::size_t i = 0; i < preds.size(); ++i) out.push_back(to_scored(preds[i], ds.labels[i], ood));
  return out;
}

}  // namespace evib
