#pragma once

// Synthetic Gaussian-cluster classification tasks, label-noise injection,
// ID/OOD pairs and the JSONL dataset format.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "evib/tensor.hpp"

namespace evib::data {

enum class Split { train, test, ood };

std::string to_string(Split split);
Split split_from_string(const std::string& name);

struct LabeledDataset {
  Tensor features;  // N x d
  std::vector<std::size_t> labels;
  std::vector<std::size_t> clean_labels;
  std::vector<bool> noise_mask;  // true exactly where labels != clean_labels
  Split split = Split::train;
  std::size_t class_count = 0;
  std::optional<double> noise_fraction;

  std::size_t size() const { return labels.size(); }
  std::size_t dim() const { return features.cols(); }
  // Throws DataError when an invariant is broken.
  void validate() const;
  bool operator==(const LabeledDataset&) const = default;
};

struct ClusterSpec {
  std::size_t class_count = 4;
  std::size_t dim = 2;
  Tensor means;  // class_count x dim
  double scale = 1.0;
  std::size_t samples_per_class = 500;
  std::uint64_t seed = 0;

  void validate() const;
};

// Four unit-scale clusters on the corners of a square of side 3.5 centred at
// the origin (Bayes error about 8%).
ClusterSpec default_task(std::uint64_t seed, std::size_t samples_per_class = 500);

// Isotropic Gaussian draws around each mean. Samples are interleaved by class
// (row i has label i mod C).
LabeledDataset generate_clusters(const ClusterSpec& spec, Split split = Split::train);

// Flips exactly round(fraction * N) labels, each to a uniformly chosen other class.
LabeledDataset inject_label_noise(const LabeledDataset& ds, double fraction, std::uint64_t seed);

// ID test set from spec and an OOD set drawn around means + shift.
std::pair<LabeledDataset, LabeledDataset> make_ood_pair(const ClusterSpec& id_spec,
                                                        const std::vector<double>& shift);
std::pair<LabeledDataset, LabeledDataset> make_ood_pair(const ClusterSpec& id_spec, double shift);

// JSONL: header {"c", "d", "n"[, "noise"]} then one record per sample
// {"features", "label", "clean_label", "noisy", "split"}.
void write_dataset(const LabeledDataset& ds, const std::filesystem::path& path);
LabeledDataset read_dataset(const std::filesystem::path& path);

}  // namespace evib::data
