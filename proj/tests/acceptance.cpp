// Acceptance run: one PASS/FAIL line per criterion. Exit status is nonzero
// when any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "evib/data.hpp"
#include "evib/evidential.hpp"
#include "evib/losses.hpp"
#include "evib/metrics.hpp"
#include "evib/model.hpp"
#include "evib/special_functions.hpp"
#include "evib/trainer.hpp"
#include "oracles.hpp"
#include "protocol.hpp"

using namespace evib;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::size_t random_class_count(std::mt19937_64& rng) {
  return std::uniform_int_distribution<std::size_t>(2, 10)(rng);
}

std::vector<double> random_vector(std::size_t n, double lo, double hi, std::mt19937_64& rng) {
  std::vector<double> v(n);
  for (double& x : v) x = oracle::uniform(rng, lo, hi);
  return v;
}

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

Outcome criterion1() {
  std::mt19937_64 rng(20261016);
  std::size_t ce_ok = 0, mse_ok = 0;
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const std::size_t c = random_class_count(rng);
    const auto alpha = random_vector(c, 1.0, 50.0, rng);
    const std::size_t y = std::uniform_int_distribution<std::size_t>(0, c - 1)(rng);
    const auto mc = oracle::dirichlet_risks_mc(alpha, y, 1000000, rng);
    const OneHotTarget t(y, c);
    const double zc = mc.ce.z(reference::bayes_risk_ce(alpha, t));
    const double zm = mc.mse.z(reference::bayes_risk_mse(alpha, t));
    ce_ok += zc <= 3.0;
    mse_ok += zm <= 3.0;
    worst = std::max({worst, zc, zm});
  }
  return {ce_ok == 100 && mse_ok == 100, "ce " + std::to_string(ce_ok) + "/100, mse " + std::to_string(mse_ok) +
                                             "/100 within 3 SE, worst z " + fmt("%.2f", worst)};
}

Outcome criterion2() {
  std::mt19937_64 rng(20261017);
  std::size_t ok = 0;
  double worst = 0.0;
  for (int i = 0; i < 50; ++i) {
    const std::size_t c = random_class_count(rng);
    const auto mu = random_vector(c, -3.0, 3.0, rng);
    const auto sigma = random_vector(c, 0.1, 3.0, rng);
    const double z = oracle::gaussian_kl_mc(mu, sigma, 1000000, rng).z(reference::gaussian_prior_kl(mu, sigma));
    ok += z <= 3.0;
    worst = std::max(worst, z);
  }
  return {ok == 50, std::to_string(ok) + "/50 within 3 SE, worst z " + fmt("%.2f", worst)};
}

Outcome criterion3() {
  std::mt19937_64 rng(20261018);
  std::size_t ok = 0;
  double worst = 0.0;
  for (int i = 0; i < 50; ++i) {
    const std::size_t c = random_class_count(rng);
    const auto p = random_vector(c, 1.0, 50.0, rng);
    const auto q = random_vector(c, 1.0, 50.0, rng);
    const double z = oracle::dirichlet_kl_mc(p, q, 1000000, rng).z(dirichlet_kl(p, q));
    ok += z <= 3.0;
    worst = std::max(worst, z);
  }
  return {ok == 50, std::to_string(ok) + "/50 within 3 SE, worst z " + fmt("%.2f", worst)};
}

Outcome criterion4() {
  std::mt19937_64 rng(20261019);
  double worst = 0.0;
  std::string worst_name;
  for (int i = 0; i < 50; ++i) {
    const std::size_t c = random_class_count(rng);
    const std::size_t batch = 1 + static_cast<std::size_t>(i % 3);
    std::vector<OneHotTarget> t;
    for (std::size_t b = 0; b < batch; ++b) t.emplace_back(std::uniform_int_distribution<std::size_t>(0, c - 1)(rng), c);
    const Tensor alpha = oracle::uniform_tensor(batch, c, 1.0, 50.0, rng);
    const Tensor logits = oracle::uniform_tensor(batch, c, -5.0, 5.0, rng);
    const Tensor mu = oracle::uniform_tensor(batch, c, -3.0, 3.0, rng);
    const Tensor sigma = oracle::uniform_tensor(batch, c, 0.1, 3.0, rng);
    const std::uint64_t noise_seed = static_cast<std::uint64_t>(i);

    const std::vector<std::pair<std::string, double>> errors = {
        {"bayes_risk_ce", oracle::gradient_check([&](const auto& v) { return bayes_risk_ce(v[0], t).node; }, {alpha})},
        {"bayes_risk_mse", oracle::gradient_check([&](const auto& v) { return bayes_risk_mse(v[0], t).node; }, {alpha})},
        {"kl_regularizer", oracle::gradient_check([&](const auto& v) { return kl_regularizer(v[0], t).node; }, {alpha})},
        {"edl_total_mse", oracle::gradient_check([&](const auto& v) { return edl_total(v[0], t, 0.1).node; }, {alpha})},
        {"edl_total_ce", oracle::gradient_check(
                             [&](const auto& v) { return edl_total(v[0], t, 0.1, BaseLoss::ce).node; }, {alpha})},
        {"ib_nll", oracle::gradient_check([&](const auto& v) { return ib_nll(v[0], t).node; }, {alpha})},
        {"gaussian_prior_kl",
         oracle::gradient_check([&](const auto& v) { return gaussian_prior_kl(v[0], v[1]).node; }, {mu, sigma})},
        {"ib_mse_mc", oracle::gradient_check(
                          [&](const auto& v) {
                            Rng frozen(noise_seed);
                            return ib_mse_mc(v[0], v[1], t, 20, frozen).node;
                          },
                          {mu, sigma})},
        {"ib_total", oracle::gradient_check(
                         [&](const auto& v) {
                           Rng frozen(noise_seed);
                           return ib_total(v[0], v[1], t, 1e-3, 20, frozen).node;
                         },
                         {mu, sigma})},
        {"mle_nll", oracle::gradient_check([&](const auto& v) { return mle_nll(v[0], t).node; }, {logits})},
    };
    for (const auto& [name, err] : errors) {
      if (err > worst) {
        worst = err;
        worst_name = name;
      }
    }
  }
  return {worst <= 1e-4, "10 losses x 50 configs, worst relative error " + fmt("%.2e", worst) + " (" + worst_name + ")"};
}

Outcome criterion5() {
  std::mt19937_64 rng(20261020);
  std::vector<std::string> failures;
  double worst_mass = 0.0, worst_prob = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const std::size_t c = random_class_count(rng);
    const DirichletBelief belief(random_vector(c, 1.0, 100.0, rng));
    const auto bm = belief_and_uncertainty(belief);
    double mass = bm.uncertainty;
    for (double b : bm.beliefs) mass += b;
    double prob = 0.0;
    for (double p : expected_probabilities(belief)) prob += p;
    worst_mass = std::max(worst_mass, std::abs(mass - 1.0));
    worst_prob = std::max(worst_prob, std::abs(prob - 1.0));
  }
  if (worst_mass > 1e-12) failures.push_back("belief mass");
  if (worst_prob > 1e-12) failures.push_back("expected probabilities");

  double worst_rec = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const double x = std::exp(oracle::uniform(rng, std::log(0.01), std::log(100.0)));
    const double d1 = std::abs(digamma(x + 1.0) - digamma(x) - 1.0 / x) / std::max(1.0, std::abs(digamma(x + 1.0)));
    const double d2 =
        std::abs(log_gamma(x + 1.0) - log_gamma(x) - std::log(x)) / std::max(1.0, std::abs(log_gamma(x + 1.0)));
    worst_rec = std::max({worst_rec, d1, d2});
  }
  if (worst_rec > 1e-10) failures.push_back("recurrences");

  bool auroc_ok = true;
  for (int t = 0; t < 20; ++t) {
    std::vector<double> s(500), e(500), lin(500);
    std::vector<bool> flags(500);
    for (std::size_t i = 0; i < 500; ++i) {
      flags[i] = i % 2 == 0;
      s[i] = oracle::uniform(rng, -3, 3) + (flags[i] ? 0.5 : 0.0);
      e[i] = std::exp(s[i]);
      lin[i] = 3.0 * s[i] + 1.0;
    }
    const double a = auroc(s, flags);
    auroc_ok = auroc_ok && a == auroc(e, flags) && a == auroc(lin, flags);
  }
  if (!auroc_ok) failures.push_back("auroc invariance");

  // Confidence k/20 with k correct out of 20 in every occupied bin.
  double worst_ece = 0.0;
  for (std::size_t bins : {10u, 15u, 20u}) {
    std::vector<ScoredPrediction> fixture;
    for (std::size_t k = 11; k <= 20; ++k) {
      const double conf = static_cast<double>(k) / 20.0;
      for (std::size_t i = 0; i < 20; ++i) {
        ScoredPrediction p;
        p.probabilities = {conf, 1.0 - conf};
        p.predicted_class = 0;
        p.true_class = i < k ? 0 : 1;
        fixture.push_back(p);
      }
    }
    // bins that hold two confidence levels still balance because each level is calibrated
    worst_ece = std::max(worst_ece, ece(fixture, bins).ece);
  }
  if (worst_ece > 1e-12) failures.push_back("calibrated ece");

  bool zeta_ok = true;
  for (int t = 0; t < 1000; ++t) {
    const auto alpha = random_vector(4, 5.0, 40.0, rng);
    const auto sigma = random_vector(4, 0.0, 1.0, rng);
    double prev = -1.0;
    for (double z : {-3.0, -1.0, 0.0, 0.5, 1.5, 3.0}) {
      const double u = posthoc_zeta_adjust(alpha, sigma, z).uncertainty;
      zeta_ok = zeta_ok && u > prev;
      prev = u;
    }
  }
  if (!zeta_ok) failures.push_back("zeta monotonicity");

  std::string detail = "mass err " + fmt("%.1e", worst_mass) + ", prob err " + fmt("%.1e", worst_prob) +
                       ", recurrence err " + fmt("%.1e", worst_rec) + ", calibrated ece " + fmt("%.1e", worst_ece);
  for (const auto& f : failures) detail += "; failed: " + f;
  return {failures.empty(), detail};
}

// ---- desk-scale reproductions ----

const std::vector<double> kBetaGrid{0.0, 1e-4, 1e-3, 1e-2};
constexpr std::size_t kSeeds = 5;

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Fitted {
  DualHeadModel model;
  TrainConfig config;
};

Fitted fit(const data::LabeledDataset& train_set, TrainMode mode, double beta, std::uint64_t seed,
           double lambda = 0.1) {
  auto tc = protocol::config(mode, beta, seed);
  tc.lambda = lambda;
  Fitted f{protocol::model(seed), tc};
  train(f.model, train_set, tc);
  return f;
}

std::vector<ScoredPrediction> score(const Fitted& f, const data::LabeledDataset& ds) {
  Rng rng(f.config.seed);
  return score_dataset(f.model, ds, f.config, rng);
}

std::string checkpoint_text(const DualHeadModel& model, const std::string& tag) {
  const auto path = std::filesystem::temp_directory_path() / ("evib_acceptance_" + tag + ".json");
  save_checkpoint(model, path);
  std::string text = slurp(path);
  std::filesystem::remove(path);
  return text;
}

struct CleanRun {
  std::uint64_t seed = 0;
  double chosen_beta = 0.0;
  std::vector<ScoredPrediction> map_test, ib_test;
  CalibrationReport map_report, ib_report;
  std::string map_checkpoint, ib_checkpoint;
  Fitted ib;
  data::ClusterSpec test_spec;
};

data::ClusterSpec shifted_seed(const data::ClusterSpec& spec, std::uint64_t offset) {
  auto s = spec;
  s.seed = spec.seed + offset;
  return s;
}

CleanRun clean_run(std::uint64_t seed) {
  const auto spec = protocol::task(seed);
  const auto train_set = data::generate_clusters(spec, data::Split::train);
  const auto val_set = data::generate_clusters(shifted_seed(spec, 500), data::Split::test);
  const auto test_spec = shifted_seed(spec, 1000);
  const auto test_set = data::generate_clusters(test_spec, data::Split::test);

  auto map = fit(train_set, TrainMode::map, 0.0, seed);
  std::optional<Fitted> best;
  double best_ece = 0.0, best_beta = 0.0;
  for (double beta : kBetaGrid) {
    auto f = fit(train_set, TrainMode::ib_edl, beta, seed);
    const double v = ece(score(f, val_set)).ece;
    if (!best || v < best_ece) {
      best = std::move(f);
      best_ece = v;
      best_beta = beta;
    }
  }
  CleanRun r{seed, best_beta, score(map, test_set), score(*best, test_set), {}, {}, {}, {}, std::move(*best),
             test_spec};
  r.map_report = ece(r.map_test);
  r.ib_report = ece(r.ib_test);
  r.map_checkpoint = checkpoint_text(map.model, "map");
  r.ib_checkpoint = checkpoint_text(r.ib.model, "ib");
  return r;
}

Outcome criterion6(const std::vector<CleanRun>& runs) {
  std::size_t wins = 0;
  std::string detail;
  for (const auto& r : runs) {
    const bool lower = r.ib_report.ece < r.map_report.ece;
    const bool close = r.ib_report.accuracy >= r.map_report.accuracy - 0.02;
    wins += lower && close;
    char buf[200];
    std::snprintf(buf, sizeof buf, " [s%lu beta=%g ece map %.4f ib %.4f, acc map %.4f ib %.4f]",
                  static_cast<unsigned long>(r.seed), r.chosen_beta, r.map_report.ece, r.ib_report.ece,
                  r.map_report.accuracy, r.ib_report.accuracy);
    detail += buf;
  }
  return {wins >= 4, std::to_string(wins) + "/5 seeds with lower ECE and accuracy within 2 points;" + detail};
}

Outcome criterion7() {
  std::size_t wins = 0;
  std::string detail;
  for (std::uint64_t seed = 0; seed < kSeeds; ++seed) {
    const auto spec = protocol::task(seed);
    const auto train_set = data::inject_label_noise(data::generate_clusters(spec, data::Split::train), 0.3, seed + 7);
    const auto val_set =
        data::inject_label_noise(data::generate_clusters(shifted_seed(spec, 500), data::Split::test), 0.3, seed + 8);
    const auto test_set = data::generate_clusters(shifted_seed(spec, 1000), data::Split::test);

    const double map_acc = accuracy(score(fit(train_set, TrainMode::map, 0.0, seed), test_set));
    const double edl_acc = accuracy(score(fit(train_set, TrainMode::edl, 0.0, seed, 0.1), test_set));
    double best_val = -1.0, chosen = 0.0, ib_acc = 0.0;
    for (double beta : kBetaGrid) {
      const auto f = fit(train_set, TrainMode::ib_edl, beta, seed);
      const double v = accuracy(score(f, val_set));
      if (v > best_val) {
        best_val = v;
        chosen = beta;
        ib_acc = accuracy(score(f, test_set));
      }
    }
    const bool ok = ib_acc >= edl_acc - 0.01 && ib_acc >= map_acc;
    wins += ok;
    char buf[200];
    std::snprintf(buf, sizeof buf, " [s%lu beta=%g acc map %.4f edl %.4f ib %.4f]", static_cast<unsigned long>(seed),
                  chosen, map_acc, edl_acc, ib_acc);
    detail += buf;
  }
  return {wins >= 3, std::to_string(wins) + "/5 seeds;" + detail};
}

Outcome criterion8(const std::vector<CleanRun>& runs) {
  std::size_t detected = 0;
  bool control_ok = true;
  std::string detail;
  for (const auto& r : runs) {
    const auto [id, ood] = data::make_ood_pair(r.test_spec, protocol::off_plane_shift(10.0 * r.test_spec.scale));
    const auto control = data::generate_clusters(shifted_seed(r.test_spec, 1000), data::Split::test);
    auto pooled = [&](const data::LabeledDataset& other) {
      std::vector<double> mp, um;
      std::vector<bool> flags;
      for (const auto& p : score(r.ib, id)) {
        mp.push_back(mp_score(p));
        um.push_back(um_score(p));
        flags.push_back(true);
      }
      for (const auto& p : score(r.ib, other)) {
        mp.push_back(mp_score(p));
        um.push_back(um_score(p));
        flags.push_back(false);
      }
      return std::pair{auroc(mp, flags), auroc(um, flags)};
    };
    const auto [mp, um] = pooled(ood);
    const auto [cmp, cum] = pooled(control);
    detected += mp >= 0.9 && um >= 0.9;
    control_ok = control_ok && std::abs(cmp - 0.5) <= 0.02 && std::abs(cum - 0.5) <= 0.02;
    char buf[200];
    std::snprintf(buf, sizeof buf, " [s%lu auroc mp %.3f um %.3f, control mp %.3f um %.3f]",
                  static_cast<unsigned long>(r.seed), mp, um, cmp, cum);
    detail += buf;
  }
  return {detected == runs.size() && control_ok,
          std::to_string(detected) + "/5 seeds with both AUROC >= 0.9, control " + (control_ok ? "ok" : "off") + ";" +
              detail};
}

Outcome criterion9(const std::vector<CleanRun>& runs) {
  bool ok = true;
  std::string detail;
  for (std::size_t bins : {10u, 15u, 25u, 35u}) {
    double map_mean = 0.0, ib_mean = 0.0;
    std::size_t seed_wins = 0;
    for (const auto& r : runs) {
      const double m = ece(r.map_test, bins).ece;
      const double i = ece(r.ib_test, bins).ece;
      map_mean += m / static_cast<double>(runs.size());
      ib_mean += i / static_cast<double>(runs.size());
      seed_wins += i < m;
    }
    ok = ok && ib_mean < map_mean;
    char buf[160];
    std::snprintf(buf, sizeof buf, " [bins %zu mean ece map %.4f ib %.4f, ib lower in %zu/5 seeds]", bins, map_mean,
                  ib_mean, seed_wins);
    detail += buf;
  }
  return {ok, std::string("ranking ") + (ok ? "IB-EDL < MAP at every bin count" : "changes") + ";" + detail};
}

Outcome criterion10(const CleanRun& first) {
  const CleanRun again = clean_run(first.seed);
  const bool same = again.map_report.to_json() == first.map_report.to_json() &&
                    again.ib_report.to_json() == first.ib_report.to_json() &&
                    again.map_checkpoint == first.map_checkpoint && again.ib_checkpoint == first.ib_checkpoint &&
                    again.chosen_beta == first.chosen_beta;
  return {same, same ? "reports and checkpoints byte-identical" : "rerun differs"};
}

}  // namespace

int main() {
  int failed = 0;
  auto report = [&](int n, const std::function<Outcome()>& fn, double budget_s) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (secs > budget_s) {
      o.pass = false;
      o.detail += "; over the " + fmt("%.0f", budget_s) + " s budget";
    }
    failed += !o.pass;
    std::printf("criterion %d: %s %s (%.1f s)\n", n, o.pass ? "PASS" : "FAIL", o.detail.c_str(), secs);
    std::fflush(stdout);
  };

  report(1, criterion1, 60);
  report(2, criterion2, 30);
  report(3, criterion3, 60);
  report(4, criterion4, 60);
  report(5, criterion5, 30);

  std::vector<CleanRun> runs;
  report(6, [&] {
    for (std::uint64_t s = 0; s < kSeeds; ++s) runs.push_back(clean_run(s));
    return criterion6(runs);
  }, 600);
  report(7, criterion7, 600);
  report(8, [&] {
    if (runs.size() != kSeeds) return Outcome{false, "criterion 6 models unavailable"};
    return criterion8(runs);
  }, 300);
  report(9, [&] {
    if (runs.size() != kSeeds) return Outcome{false, "criterion 6 models unavailable"};
    return criterion9(runs);
  }, 60);
  report(10, [&] {
    if (runs.empty()) return Outcome{false, "criterion 6 models unavailable"};
    return criterion10(runs.front());
  }, 600);

  std::printf("%d of 10 criteria failed\n", failed);
  return failed == 0 ? 0 : 1;
}
