#include "evib/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "evib/error.hpp"
#include "evib/sampling.hpp"

namespace evib::data {

using nlohmann::json;
using nlohmann::ordered_json;

std::string to_string(Split split) {
  switch (split) {
    case Split::train: return "train";
    case Split::test: return "test";
    case Split::ood: return "ood";
  }
  return "train";
}

Split split_from_string(const std::string& name) {
  if (name == "train") return Split::train;
  if (name == "test") return Split::test;
  if (name == "ood") return Split::ood;
  throw DataError("unknown split '" + name + "'");
}

void LabeledDataset::validate() const {
  const std::size_t n = labels.size();
  if (features.rows() != n || clean_labels.size() != n || noise_mask.size() != n) {
    throw DataError("dataset columns disagree on the sample count");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] >= class_count || clean_labels[i] >= class_count) {
      std::ostringstream msg;
      msg << "sample " << i << ": label " << labels[i] << " not below class count "
          << class_count;
      throw DataError(msg.str());
    }
    if (noise_mask[i] != (labels[i] != clean_labels[i])) {
      std::ostringstream msg;
      msg << "sample " << i << ": noise flag disagrees with label/clean_label";
      throw DataError(msg.str());
    }
  }
}

void ClusterSpec::validate() const {
  if (class_count < 1 || dim < 1) throw ConfigError("cluster spec needs C >= 1 and d >= 1");
  if (samples_per_class < 1) throw ConfigError("samples_per_class must be at least 1");
  if (means.rows() != class_count || means.cols() != dim) {
    throw ConfigError("cluster means must be " + std::to_string(class_count) + " x " +
                      std::to_string(dim) + ", got " + means.shape_string());
  }
  if (!(scale >= 0.0)) throw ConfigError("cluster scale must be non-negative");
  for (std::size_t a = 0; a < class_count; ++a)
    for (std::size_t b = a + 1; b < class_count; ++b) {
      auto ra = means.row_span(a);
      auto rb = means.row_span(b);
      if (std::equal(ra.begin(), ra.end(), rb.begin())) {
        throw ConfigError("cluster means " + std::to_string(a) + " and " + std::to_string(b) +
                          " coincide");
      }
    }
}

ClusterSpec default_task(std::uint64_t seed, std::size_t samples_per_class) {
  ClusterSpec spec;
  spec.class_count = 4;
  spec.dim = 2;
  spec.scale = 1.0;
  spec.samples_per_class = samples_per_class;
  spec.seed = seed;
  const double h = 1.75;
  spec.means = Tensor::from_rows({{h, h}, {-h, h}, {-h, -h}, {h, -h}});
  return spec;
}

LabeledDataset generate_clusters(const ClusterSpec& spec, Split split) {
  spec.validate();
  Rng rng(spec.seed);
  const std::size_t n = spec.class_count * spec.samples_per_class;
  LabeledDataset ds;
  ds.features = Tensor(n, spec.dim);
  ds.labels.resize(n);
  ds.clean_labels.resize(n);
  ds.noise_mask.assign(n, false);
  ds.split = split;
  ds.class_count = spec.class_count;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c = i % spec.class_count;
    for (std::size_t k = 0; k < spec.dim; ++k) {
      ds.features(i, k) = spec.means(c, k) + spec.scale * sample_standard_normal(rng);
    }
    ds.labels[i] = c;
    ds.clean_labels[i] = c;
  }
  return ds;
}

LabeledDataset inject_label_noise(const LabeledDataset& ds, double fraction, std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) {
    throw ConfigError("noise fraction must lie in [0, 1]");
  }
  if (ds.class_count < 2) throw ConfigError("label noise needs at least two classes");
  LabeledDataset out = ds;
  out.clean_labels = ds.clean_labels;
  const std::size_t n = ds.size();
  const auto flips = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  Rng rng(seed);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  // Partial Fisher-Yates: the first `flips` entries are a uniform subset.
  for (std::size_t i = 0; i < flips; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(order[i], order[pick(rng)]);
  }
  std::uniform_int_distribution<std::size_t> other(1, ds.class_count - 1);
  for (std::size_t i = 0; i < flips; ++i) {
    const std::size_t idx = order[i];
    const std::size_t clean = out.clean_labels[idx];
    out.labels[idx] = (clean + other(rng)) % ds.class_count;
    out.noise_mask[idx] = true;
  }
  out.noise_fraction = fraction;
  return out;
}

std::pair<LabeledDataset, LabeledDataset> make_ood_pair(const ClusterSpec& id_spec,
                                                        const std::vector<double>& shift) {
  if (shift.size() != id_spec.dim) {
    throw ConfigError("OOD shift has " + std::to_string(shift.size()) + " entries, expected " +
                      std::to_string(id_spec.dim));
  }
  if (std::all_of(shift.begin(), shift.end(), [](double s) { return s == 0.0; })) {
    throw ConfigError("OOD shift must be nonzero");
  }
  LabeledDataset id_test = generate_clusters(id_spec, Split::test);
  ClusterSpec ood_spec = id_spec;
  ood_spec.seed = id_spec.seed ^ 0x9e3779b97f4a7c15ULL;
  for (std::size_t c = 0; c < ood_spec.class_count; ++c)
    for (std::size_t k = 0; k < ood_spec.dim; ++k) ood_spec.means(c, k) += shift[k];
  LabeledDataset ood_test = generate_clusters(ood_spec, Split::ood);
  return {std::move(id_test), std::move(ood_test)};
}

std::pair<LabeledDataset, LabeledDataset> make_ood_pair(const ClusterSpec& id_spec, double shift) {
  return make_ood_pair(id_spec, std::vector<double>(id_spec.dim, shift));
}

void write_dataset(const LabeledDataset& ds, const std::filesystem::path& path) {
  ds.validate();
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  ordered_json header;
  header["c"] = ds.class_count;
  header["d"] = ds.dim();
  header["n"] = ds.size();
  if (ds.noise_fraction) header["noise"] = *ds.noise_fraction;
  out << header.dump() << '\n';
  const std::string split = to_string(ds.split);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    ordered_json rec;
    auto row = ds.features.row_span(i);
    rec["features"] = std::vector<double>(row.begin(), row.end());
    rec["label"] = ds.labels[i];
    rec["clean_label"] = ds.clean_labels[i];
    rec["noisy"] = static_cast<bool>(ds.noise_mask[i]);
    rec["split"] = split;
    out << rec.dump() << '\n';
  }
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

namespace {

[[noreturn]] void parse_fail(const std::filesystem::path& path, std::size_t line,
                             const std::string& what) {
  std::ostringstream msg;
  msg << path.string() << ": line " << line;
  if (line > 1) msg << " (record " << line - 1 << ")";
  msg << ": " << what;
  throw ParseError(msg.str());
}

}  // namespace

LabeledDataset read_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open dataset '" + path.string() + "'");
  std::string text;
  std::size_t line_no = 0;

  if (!std::getline(in, text)) parse_fail(path, 1, "missing header record");
  ++line_no;
  std::size_t c = 0, d = 0, n = 0;
  LabeledDataset ds;
  try {
    const json header = json::parse(text);
    c = header.at("c").get<std::size_t>();
    d = header.at("d").get<std::size_t>();
    n = header.at("n").get<std::size_t>();
    if (header.contains("noise")) ds.noise_fraction = header.at("noise").get<double>();
  } catch (const json::exception& e) {
    parse_fail(path, line_no, std::string("bad header: ") + e.what());
  }

  ds.class_count = c;
  std::vector<double> features;
  features.reserve(n * d);
  bool split_seen = false;
  while (std::getline(in, text)) {
    ++line_no;
    if (text.empty()) continue;
    try {
      const json rec = json::parse(text);
      const auto& f = rec.at("features");
      const auto& label = rec.at("label");
      const auto& clean = rec.at("clean_label");
      if (!label.is_number_unsigned() || !clean.is_number_unsigned()) {
        parse_fail(path, line_no, "labels must be non-negative integers");
      }
      auto row = f.get<std::vector<double>>();
      if (row.size() != d) {
        parse_fail(path, line_no,
                   "expected " + std::to_string(d) + " features, got " + std::to_string(row.size()));
      }
      const auto lab = label.get<std::size_t>();
      const auto clab = clean.get<std::size_t>();
      if (lab >= c || clab >= c) {
        std::ostringstream msg;
        msg << path.string() << ": line " << line_no << ": label " << std::max(lab, clab)
            << " not below class count " << c;
        throw DataError(msg.str());
      }
      const bool noisy = rec.at("noisy").get<bool>();
      const Split split = split_from_string(rec.at("split").get<std::string>());
      if (split_seen && split != ds.split) parse_fail(path, line_no, "mixed split tags");
      ds.split = split;
      split_seen = true;
      features.insert(features.end(), row.begin(), row.end());
      ds.labels.push_back(lab);
      ds.clean_labels.push_back(clab);
      ds.noise_mask.push_back(noisy);
    } catch (const json::exception& e) {
      parse_fail(path, line_no, e.what());
    }
  }
  if (ds.labels.size() != n) {
    std::ostringstream msg;
    msg << path.string() << ": header announces " << n << " records, found " << ds.labels.size();
    throw DataError(msg.str());
  }
  ds.features = Tensor(n, d, std::move(features));
  ds.validate();
  return ds;
}

}  // namespace evib::data
