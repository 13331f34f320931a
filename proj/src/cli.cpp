#include "evib/cli.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "evib/data.hpp"
#include "evib/error.hpp"
#include "evib/metrics.hpp"
#include "evib/model.hpp"
#include "evib/trainer.hpp"

namespace evib::cli {
namespace {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

enum class Kind { string, real, integer, boolean, real_list, integer_list };

struct Field {
  std::string key;
  Kind kind;
  Json fallback;  // null means "unset"
  std::string help;
};

std::string flag_name(const std::string& key) {
  std::string f = key;
  std::replace(f.begin(), f.end(), '_', '-');
  return "--" + f;
}

std::vector<Field> training_fields() {
  const TrainConfig d;
  return {
      {"mode", Kind::string, "ib_edl", "ib_edl, edl or map"},
      {"beta", Kind::real, d.beta, "IB compression weight (ib_edl)"},
      {"lambda", Kind::real, d.lambda, "KL regularizer weight (edl)"},
      {"eta", Kind::real, d.eta, "alpha = softplus(pre-evidence) + eta"},
      {"k", Kind::integer, d.samples, "pre-evidence samples per input (ib_edl)"},
      {"lr", Kind::real, d.learning_rate, "base learning rate"},
      {"epochs", Kind::integer, d.epochs, "training epochs"},
      {"batch", Kind::integer, d.batch_size, "mini-batch size"},
      {"clip_norm", Kind::real, d.clip_norm, "global gradient-norm clip"},
      {"seed", Kind::integer, d.seed, "random seed"},
      {"schedule", Kind::string, to_string(d.schedule), "constant or cosine"},
      {"hidden", Kind::integer_list, Json::array({32}), "hidden layer widths"},
      {"fixed_sigma", Kind::real, nullptr, "freeze sigma at this value (ib_edl)"},
  };
}

std::vector<Field> fields_for(const std::string& command) {
  std::vector<Field> f;
  if (command == "gen-data") {
    f = {
        {"seed", Kind::integer, 0, "random seed"},
        {"samples_per_class", Kind::integer, 500, "training samples per class"},
        {"test_samples_per_class", Kind::integer, 500, "test / OOD samples per class"},
        {"scale", Kind::real, 1.0, "cluster standard deviation"},
        {"separation", Kind::real, 3.5, "distance between adjacent cluster means"},
        {"noise", Kind::real, 0.0, "fraction of training labels to flip"},
        {"ood_shift", Kind::real, nullptr, "offset added to every coordinate of the OOD means"},
    };
  } else if (command == "train") {
    f = training_fields();
    f.insert(f.begin(), {"train", Kind::string, nullptr, "training set (JSONL)"});
  } else if (command == "eval" || command == "ood-eval") {
    f = {
        {"checkpoint", Kind::string, nullptr, "checkpoint JSON"},
        {"test", Kind::string, nullptr, "ID test set (JSONL)"},
        {"mode", Kind::string, nullptr, "defaults to the mode recorded next to the checkpoint"},
        {"eta", Kind::real, nullptr, "defaults to the training value"},
        {"k", Kind::integer, nullptr, "defaults to the training value"},
        {"seed", Kind::integer, 0, "seed for inference sampling"},
    };
    if (command == "eval") {
      f.push_back({"bins", Kind::integer, 15, "ECE bin count"});
      f.push_back({"zeta", Kind::real, 0.0,
                   "post-hoc alpha_j -= zeta * sigma_j; zeta > 0 if the calibration curve lies "
                   "below the diagonal (overconfident), zeta < 0 if above"});
    } else {
      f.push_back({"ood", Kind::string, nullptr, "OOD test set (JSONL)"});
    }
  } else if (command == "sweep") {
    for (auto& field : training_fields()) {
      if (field.key != "mode" && field.key != "beta" && field.key != "seed" &&
          field.key != "fixed_sigma") {
        f.push_back(field);
      }
    }
    f.insert(f.begin(), {"test", Kind::string, nullptr, "test set (JSONL)"});
    f.insert(f.begin(), {"train", Kind::string, nullptr, "training set (JSONL)"});
    f.push_back({"betas", Kind::real_list, Json::array({0.0, 1e-4, 1e-3, 1e-2}), "beta grid"});
    f.push_back({"seeds", Kind::integer_list, Json::array({0, 1}), "seed grid"});
    f.push_back({"include_map", Kind::boolean, false, "add MAP baseline rows"});
    f.push_back({"bins", Kind::integer, 15, "ECE bin count"});
  }
  f.push_back({"out", Kind::string, ".", "output directory"});
  return f;
}

bool matches(const Json& v, Kind kind) {
  switch (kind) {
    case Kind::string: return v.is_string();
    case Kind::real: return v.is_number();
    case Kind::integer: return v.is_number_unsigned();
    case Kind::boolean: return v.is_boolean();
    case Kind::real_list:
      return v.is_array() && std::all_of(v.begin(), v.end(), [](const Json& x) { return x.is_number(); });
    case Kind::integer_list:
      return v.is_array() &&
             std::all_of(v.begin(), v.end(), [](const Json& x) { return x.is_number_unsigned(); });
  }
  return false;
}

Json parse_flag(const Field& field, const std::string& text) {
  auto real = [&](const std::string& s) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != s.size() || s.empty()) {
      throw ConfigError(flag_name(field.key) + ": '" + s + "' is not a number");
    }
    return v;
  };
  auto integer = [&](const std::string& s) {
    std::size_t used = 0;
    unsigned long long v = 0;
    try {
      if (!s.empty() && s[0] != '-') v = std::stoull(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != s.size() || s.empty()) {
      throw ConfigError(flag_name(field.key) + ": '" + s + "' is not a non-negative integer");
    }
    return static_cast<std::uint64_t>(v);
  };
  auto split = [](const std::string& s) {
    std::vector<std::string> parts;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
      if (!item.empty()) parts.push_back(item);
    }
    return parts;
  };
  switch (field.kind) {
    case Kind::string: return text;
    case Kind::real: return real(text);
    case Kind::integer: return integer(text);
    case Kind::boolean: return true;
    case Kind::real_list: {
      Json arr = Json::array();
      for (const auto& p : split(text)) arr.push_back(real(p));
      return arr;
    }
    case Kind::integer_list: {
      Json arr = Json::array();
      for (const auto& p : split(text)) arr.push_back(integer(p));
      return arr;
    }
  }
  return nullptr;
}

// Defaults <- config file <- explicit flags.
Json resolve(const std::vector<Field>& fields, const std::optional<std::string>& config_path,
             const std::map<std::string, std::string>& flags) {
  Json resolved = Json::object();
  for (const auto& f : fields) resolved[f.key] = f.fallback;
  if (config_path) {
    std::ifstream in(*config_path);
    if (!in) throw ConfigError("cannot open config file '" + *config_path + "'");
    Json file;
    try {
      file = Json::parse(in);
    } catch (const Json::parse_error& e) {
      throw ConfigError("config file '" + *config_path + "': " + e.what());
    }
    if (!file.is_object()) throw ConfigError("config file must hold a JSON object");
    for (auto it = file.begin(); it != file.end(); ++it) {
      auto field = std::find_if(fields.begin(), fields.end(),
                                [&](const Field& f) { return f.key == it.key(); });
      if (field == fields.end()) throw ConfigError("unknown config key '" + it.key() + "'");
      if (!it.value().is_null() && !matches(it.value(), field->kind)) {
        throw ConfigError("config key '" + it.key() + "' has the wrong type");
      }
      resolved[it.key()] = it.value();
    }
  }
  for (const auto& f : fields) {
    auto it = flags.find(f.key);
    if (it != flags.end()) resolved[f.key] = parse_flag(f, it->second);
  }
  return resolved;
}

std::string require_string(const Json& cfg, const std::string& key) {
  if (cfg.at(key).is_null()) throw ConfigError("missing required setting " + flag_name(key));
  return cfg.at(key).get<std::string>();
}

std::string format_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

fs::path prepare_out(const Json& cfg) {
  fs::path out = cfg.at("out").get<std::string>();
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw IoError("cannot create output directory '" + out.string() + "': " + ec.message());
  write_text(out / "resolved_config.json", cfg.dump(2) + "\n");
  return out;
}

TrainConfig train_config_from(const Json& cfg) {
  TrainConfig tc;
  if (cfg.contains("mode") && !cfg.at("mode").is_null()) {
    tc.mode = train_mode_from_string(cfg.at("mode").get<std::string>());
  }
  if (cfg.contains("beta")) tc.beta = cfg.at("beta").get<double>();
  if (cfg.contains("lambda")) tc.lambda = cfg.at("lambda").get<double>();
  if (cfg.contains("eta") && !cfg.at("eta").is_null()) tc.eta = cfg.at("eta").get<double>();
  if (cfg.contains("k") && !cfg.at("k").is_null()) tc.samples = cfg.at("k").get<std::size_t>();
  if (cfg.contains("lr")) tc.learning_rate = cfg.at("lr").get<double>();
  if (cfg.contains("epochs")) tc.epochs = cfg.at("epochs").get<std::size_t>();
  if (cfg.contains("batch")) tc.batch_size = cfg.at("batch").get<std::size_t>();
  if (cfg.contains("clip_norm")) tc.clip_norm = cfg.at("clip_norm").get<double>();
  if (cfg.contains("seed")) tc.seed = cfg.at("seed").get<std::uint64_t>();
  if (cfg.contains("schedule")) tc.schedule = schedule_from_string(cfg.at("schedule").get<std::string>());
  if (cfg.contains("fixed_sigma") && !cfg.at("fixed_sigma").is_null()) {
    tc.fixed_sigma = cfg.at("fixed_sigma").get<double>();
  }
  tc.validate();
  return tc;
}

std::vector<std::size_t> layer_sizes_for(std::size_t input_dim, const Json& hidden) {
  std::vector<std::size_t> sizes{input_dim};
  for (const auto& h : hidden) sizes.push_back(h.get<std::size_t>());
  if (sizes.size() < 2) throw ConfigError("--hidden needs at least one layer width");
  return sizes;
}

// ---------------------------------------------------------------------------

int cmd_gen_data(const Json& cfg, std::ostream& out) {
  const auto seed = cfg.at("seed").get<std::uint64_t>();
  const double scale = cfg.at("scale").get<double>();
  const double half = cfg.at("separation").get<double>() / 2.0;
  const double noise = cfg.at("noise").get<double>();
  if (!(noise >= 0.0 && noise <= 1.0)) throw ConfigError("--noise must lie in [0, 1]");

  data::ClusterSpec spec = data::default_task(seed, cfg.at("samples_per_class").get<std::size_t>());
  spec.scale = scale;
  spec.means = Tensor::from_rows({{half, half}, {-half, half}, {-half, -half}, {half, -half}});
  data::ClusterSpec test_spec = spec;
  test_spec.seed = seed + 1;
  test_spec.samples_per_class = cfg.at("test_samples_per_class").get<std::size_t>();

  const fs::path dir = prepare_out(cfg);
  data::LabeledDataset train = data::generate_clusters(spec, data::Split::train);
  train = data::inject_label_noise(train, noise, seed + 2);
  data::write_dataset(train, dir / "train.jsonl");

  if (cfg.at("ood_shift").is_null()) {
    data::write_dataset(data::generate_clusters(test_spec, data::Split::test), dir / "test.jsonl");
  } else {
    auto [id_test, ood_test] = data::make_ood_pair(test_spec, cfg.at("ood_shift").get<double>());
    data::write_dataset(id_test, dir / "test.jsonl");
    data::write_dataset(ood_test, dir / "ood.jsonl");
  }
  out << "wrote datasets to " << dir.string() << "\n";
  return kSuccess;
}

int cmd_train(const Json& cfg, std::ostream& out, std::ostream& err) {
  const TrainConfig tc = train_config_from(cfg);
  const data::LabeledDataset train_set = data::read_dataset(require_string(cfg, "train"));
  for (const auto& w : tc.warnings()) err << "warning: " << w << "\n";
  const fs::path dir = prepare_out(cfg);
  DualHeadModel model =
      build_model(layer_sizes_for(train_set.dim(), cfg.at("hidden")), train_set.class_count, tc.seed);
  const TrainReport report = train(model, train_set, tc);
  save_checkpoint(model, dir / "checkpoint.json");
  write_text(dir / "train_log.jsonl", report.to_jsonl());
  out << "final loss " << format_real(report.epochs.back().loss_total) << "\n";
  return kSuccess;
}

// Fills unset mode / eta / k from the resolved_config.json written by `train`
// next to the checkpoint.
Json with_training_defaults(Json cfg) {
  const fs::path sidecar = fs::path(require_string(cfg, "checkpoint")).parent_path() / "resolved_config.json";
  Json trained = Json::object();
  if (fs::exists(sidecar)) {
    std::ifstream in(sidecar);
    try {
      trained = Json::parse(in);
    } catch (const Json::parse_error& e) {
      throw ConfigError("cannot parse " + sidecar.string() + ": " + e.what());
    }
  }
  auto fill = [&](const std::string& key, const Json& fallback) {
    if (!cfg.at(key).is_null()) return;
    if (trained.contains(key) && !trained.at(key).is_null()) cfg[key] = trained.at(key);
    else cfg[key] = fallback;
  };
  const TrainConfig d;
  fill("mode", nullptr);
  fill("eta", d.eta);
  fill("k", d.samples);
  if (cfg.at("mode").is_null()) {
    throw ConfigError("--mode not given and no training config found at " + sidecar.string());
  }
  return cfg;
}

std::vector<ScoredPrediction> score(const DualHeadModel& model, const data::LabeledDataset& ds,
                                    const TrainConfig& tc, Rng& rng, double zeta) {
  if (ds.class_count != model.class_count()) {
    throw ConfigError("checkpoint predicts " + std::to_string(model.class_count()) +
                      " classes but the data has " + std::to_string(ds.class_count));
  }
  if (ds.dim() != model.input_dim()) {
    throw ConfigError("checkpoint expects " + std::to_string(model.input_dim()) +
                      " features but the data has " + std::to_string(ds.dim()));
  }
  const auto preds = predict_batch(model, ds.features, tc, rng);
  std::vector<ScoredPrediction> scored;
  scored.reserve(preds.size());
  for (std::size_t i = 0; i < preds.size(); ++i) {
    ScoredPrediction s = to_scored(preds[i], ds.labels[i], ds.split == data::Split::ood);
    if (zeta != 0.0) {
      const ZetaAdjustment adj = posthoc_zeta_adjust(preds[i].alpha->alpha(), *preds[i].sigma, zeta);
      s.probabilities = adj.probabilities;
      s.predicted_class = argmax(adj.probabilities);
      s.uncertainty_mass = adj.uncertainty;
    }
    scored.push_back(std::move(s));
  }
  return scored;
}

int cmd_eval(Json cfg, std::ostream& out) {
  cfg = with_training_defaults(std::move(cfg));
  const TrainConfig tc = train_config_from(cfg);
  const double zeta = cfg.at("zeta").get<double>();
  if (zeta != 0.0 && tc.mode != TrainMode::ib_edl) {
    throw ConfigError("--zeta needs an ib_edl model (it uses the predicted sigma)");
  }
  const DualHeadModel model = load_checkpoint(require_string(cfg, "checkpoint"));
  const data::LabeledDataset test = data::read_dataset(require_string(cfg, "test"));
  const fs::path dir = prepare_out(cfg);
  Rng rng(tc.seed);
  const auto scored = score(model, test, tc, rng, zeta);
  const CalibrationReport report = ece(scored, cfg.at("bins").get<std::size_t>());
  write_text(dir / "report.json", report.to_json() + "\n");
  reliability_curve_export(report, dir / "reliability.csv");
  out << "accuracy " << format_real(report.accuracy) << " ece " << format_real(report.ece)
      << " nll " << format_real(report.nll) << "\n";
  return kSuccess;
}

int cmd_ood_eval(Json cfg, std::ostream& out) {
  cfg = with_training_defaults(std::move(cfg));
  const TrainConfig tc = train_config_from(cfg);
  const DualHeadModel model = load_checkpoint(require_string(cfg, "checkpoint"));
  const data::LabeledDataset id_set = data::read_dataset(require_string(cfg, "test"));
  const data::LabeledDataset ood_set = data::read_dataset(require_string(cfg, "ood"));
  const fs::path dir = prepare_out(cfg);
  Rng rng(tc.seed);
  auto pooled = score(model, id_set, tc, rng, 0.0);
  const auto ood_scored = score(model, ood_set, tc, rng, 0.0);
  pooled.insert(pooled.end(), ood_scored.begin(), ood_scored.end());

  std::vector<bool> id_flags;
  std::vector<double> mp;
  for (std::size_t i = 0; i < pooled.size(); ++i) {
    // Records are ID by position, regardless of the split tag in the file.
    id_flags.push_back(i < id_set.size());
    mp.push_back(mp_score(pooled[i]));
  }
  Json report;
  report["auroc_mp"] = auroc(mp, id_flags);
  if (tc.mode == TrainMode::map) {
    // MAP models have no uncertainty mass.
    report["auroc_um"] = nullptr;
  } else {
    std::vector<double> um;
    for (const auto& p : pooled) um.push_back(um_score(p));
    report["auroc_um"] = auroc(um, id_flags);
  }
  report["n_id"] = id_set.size();
  report["n_ood"] = ood_set.size();
  write_text(dir / "ood_report.json", report.dump(2) + "\n");
  out << report.dump() << "\n";
  return kSuccess;
}

std::size_t sweep_threads() {
  std::size_t threads = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("EVIB_THREADS")) {
    try {
      const long cap = std::stol(env);
      if (cap >= 1) threads = std::min(threads, static_cast<std::size_t>(cap));
    } catch (const std::exception&) {
      throw ConfigError(std::string("EVIB_THREADS must be a positive integer, got '") + env + "'");
    }
  }
  return threads;
}

int cmd_sweep(const Json& cfg, std::ostream& out) {
  const auto betas = cfg.at("betas").get<std::vector<double>>();
  const auto seeds = cfg.at("seeds").get<std::vector<std::uint64_t>>();
  const bool include_map = cfg.at("include_map").get<bool>();
  if (betas.empty() || seeds.empty()) throw ConfigError("sweep grid is empty");
  const std::size_t bins = cfg.at("bins").get<std::size_t>();

  const data::LabeledDataset train_set = data::read_dataset(require_string(cfg, "train"));
  const data::LabeledDataset test_set = data::read_dataset(require_string(cfg, "test"));
  if (train_set.class_count != test_set.class_count || train_set.dim() != test_set.dim()) {
    throw ConfigError("train and test sets disagree on class count or dimension");
  }
  const auto sizes = layer_sizes_for(train_set.dim(), cfg.at("hidden"));
  const TrainConfig base = train_config_from(cfg);
  const fs::path dir = prepare_out(cfg);

  struct Run {
    std::optional<double> beta;  // empty for MAP rows
    std::uint64_t seed;
    CalibrationReport report;
  };
  std::vector<Run> runs;
  for (double beta : betas)
    for (auto seed : seeds) runs.push_back({beta, seed, {}});
  if (include_map) {
    for (auto seed : seeds) runs.push_back({std::nullopt, seed, {}});
  }

  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> failures(runs.size());
  auto worker = [&] {
    for (std::size_t i = next++; i < runs.size(); i = next++) {
      try {
        Run& run = runs[i];
        TrainConfig tc = base;
        tc.seed = run.seed;
        if (run.beta) {
          tc.mode = TrainMode::ib_edl;
          tc.beta = *run.beta;
        } else {
          tc.mode = TrainMode::map;
        }
        DualHeadModel model = build_model(sizes, train_set.class_count, run.seed);
        train(model, train_set, tc);
        Rng rng(run.seed);
        run.report = ece(score_dataset(model, test_set, tc, rng), bins);
      } catch (...) {
        failures[i] = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::min(sweep_threads(), runs.size());
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (const auto& f : failures) {
    if (f) std::rethrow_exception(f);
  }

  std::ostringstream csv;
  csv << "beta,seed,accuracy,ece,nll\n";
  for (const auto& run : runs) {
    csv << (run.beta ? format_real(*run.beta) : "") << ',' << run.seed << ','
        << format_real(run.report.accuracy) << ',' << format_real(run.report.ece) << ','
        << format_real(run.report.nll) << '\n';
  }
  write_text(dir / "sweep.csv", csv.str());
  out << "wrote " << runs.size() << " rows to " << (dir / "sweep.csv").string() << "\n";
  return kSuccess;
}

int dispatch(const std::string& command, const Json& cfg, std::ostream& out, std::ostream& err) {
  if (command == "gen-data") return cmd_gen_data(cfg, out);
  if (command == "train") return cmd_train(cfg, out, err);
  if (command == "eval") return cmd_eval(cfg, out);
  if (command == "ood-eval") return cmd_ood_eval(cfg, out);
  if (command == "sweep") return cmd_sweep(cfg, out);
  throw ConfigError("unknown command '" + command + "'");
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Evidential classifiers with an information-bottleneck regularizer"};
  app.require_subcommand(1);

  const std::vector<std::string> commands = {"gen-data", "train", "eval", "ood-eval", "sweep"};
  const std::map<std::string, std::string> descriptions = {
      {"gen-data", "generate Gaussian-cluster train/test (and OOD) sets"},
      {"train", "train an ib_edl, edl or map model"},
      {"eval", "accuracy, ECE, NLL and the reliability curve on a test set"},
      {"ood-eval", "OOD detection AUROC with max-probability and 1/u scores"},
      {"sweep", "train over a beta x seed grid and tabulate test metrics"},
  };
  std::map<std::string, std::map<std::string, std::string>> raw;
  std::map<std::string, std::string> config_paths;
  std::map<std::string, std::vector<Field>> schema;
  std::map<std::string, CLI::App*> subs;
  std::map<std::string, std::map<std::string, CLI::Option*>> options;

  for (const auto& name : commands) {
    CLI::App* sub = app.add_subcommand(name, descriptions.at(name));
    subs[name] = sub;
    schema[name] = fields_for(name);
    sub->add_option("--config", config_paths[name], "JSON file with settings; flags override it");
    for (const auto& f : schema[name]) {
      CLI::Option* opt = nullptr;
      std::string help = f.help;
      if (!f.fallback.is_null()) help += " [default: " + f.fallback.dump() + "]";
      if (f.kind == Kind::boolean) {
        opt = sub->add_flag(flag_name(f.key), help);
      } else {
        opt = sub->add_option(flag_name(f.key), raw[name][f.key], help);
      }
      options[name][f.key] = opt;
    }
  }

  std::vector<std::string> argv_storage{"evib"};
  argv_storage.insert(argv_storage.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : argv_storage) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kSuccess;
  } catch (const CLI::ParseError& e) {
    std::ostringstream o, e2;
    const int code = app.exit(e, o, e2);
    out << o.str();
    err << e2.str();
    return code == 0 ? kSuccess : kConfigError;
  }

  for (const auto& name : commands) {
    if (!subs[name]->parsed()) continue;
    try {
      std::map<std::string, std::string> flags;
      for (const auto& f : schema[name]) {
        if (options[name][f.key]->count() > 0) flags[f.key] = raw[name][f.key];
      }
      std::optional<std::string> config_path;
      if (!config_paths[name].empty()) config_path = config_paths[name];
      const Json cfg = resolve(schema[name], config_path, flags);
      return dispatch(name, cfg, out, err);
    } catch (const ConfigError& e) {
      err << "config error: " << e.what() << "\n";
      return kConfigError;
    } catch (const NumericalError& e) {
      err << "numerical abort: " << e.what() << "\n";
      return kNumericalError;
    } catch (const Error& e) {
      err << "data error: " << e.what() << "\n";
      return kDataError;
    } catch (const Json::exception& e) {
      err << "config error: " << e.what() << "\n";
      return kConfigError;
    }
  }
  return kFailure;
}

}  // namespace evib::cli
