#include "synaudit/metrics.hpp"
#include "synaudit/mini_classifier.hpp"
#include "synaudit/plot.hpp"
#include "synaudit/random.hpp"
#include "synaudit/threshold.hpp"
#include "synaudit/tuning.hpp"
#include "synaudit/testbed/evaluate.hpp"
#include "synaudit/testbed/experiment.hpp"
#include "synaudit/testbed/fleet.hpp"
#include "synaudit/testbed/plots.hpp"
#include "synaudit/testbed/population.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

using namespace synaudit;
using namespace synaudit::testbed;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::string summary_text(const EvalSummary& s) { return fmt("%.3f +- %.3f", s.mean, s.std); }

// ---- 1: threshold search vs exhaustive partition count ---------------------

// Every partition a strict threshold can produce is reached by putting tau at
// one of the observed values or below all of them.
std::size_t best_partition(const std::vector<double>& syn, const std::vector<double>& real, Direction dir) {
  std::vector<double> taus(syn);
  taus.insert(taus.end(), real.begin(), real.end());
  double lowest = *std::min_element(taus.begin(), taus.end());
  double highest = *std::max_element(taus.begin(), taus.end());
  taus.push_back(lowest - 1.0);
  taus.push_back(highest + 1.0);
  std::size_t best = 0;
  for (double tau : taus) {
    std::size_t correct = 0;
    for (double v : syn) correct += dir == Direction::HigherIsSynthetic ? v > tau : v < tau;
    for (double v : real) correct += dir == Direction::HigherIsSynthetic ? !(v > tau) : !(v < tau);
    best = std::max(best, correct);
  }
  return best;
}

Outcome threshold_oracle() {
  Rng rng(101);
  const auto start = Clock::now();
  int mismatches = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const int n_syn = std::uniform_int_distribution<int>(1, 10)(rng);
    const int n_real = std::uniform_int_distribution<int>(1, 10)(rng);
    const bool coarse = trial % 2 == 0;  // coarse values force ties
    auto draw = [&](double shift) {
      return coarse ? static_cast<double>(std::uniform_int_distribution<int>(0, 4)(rng))
                    : std::normal_distribution<double>(shift, 1.0)(rng);
    };
    std::vector<double> syn, real;
    for (int i = 0; i < n_syn; ++i) syn.push_back(draw(0.5));
    for (int i = 0; i < n_real; ++i) real.push_back(draw(0.0));
    const Direction dir = trial % 4 < 2 ? Direction::HigherIsSynthetic : Direction::LowerIsSynthetic;

    const auto fitted = fit_threshold(syn, real, dir);
    const double total = static_cast<double>(n_syn + n_real);
    const double expected = static_cast<double>(best_partition(syn, real, dir)) / total;

    std::size_t achieved = 0;
    for (double v : syn) achieved += threshold_label(v, fitted.tau, dir) == 1;
    for (double v : real) achieved += threshold_label(v, fitted.tau, dir) == 0;
    if (fitted.reference_accuracy != expected || static_cast<double>(achieved) / total != expected) ++mismatches;
  }
  const double elapsed = seconds_since(start);
  return {mismatches == 0 && elapsed < 5.0, fmt("500 pairs, %d mismatches, %.3f s", mismatches, elapsed)};
}

// ---- 2: metric oracles ------------------------------------------------------

std::size_t lcs_oracle(const TokenSeq& a, const TokenSeq& b) {
  std::vector<std::vector<std::size_t>> t(a.size() + 1, std::vector<std::size_t>(b.size() + 1, 0));
  for (std::size_t i = 1; i <= a.size(); ++i)
    for (std::size_t j = 1; j <= b.size(); ++j)
      t[i][j] = a[i - 1] == b[j - 1] ? t[i - 1][j - 1] + 1 : std::max(t[i - 1][j], t[i][j - 1]);
  return t[a.size()][b.size()];
}

// Counts n-grams by scanning every window pair; clipping by marking used
// reference windows.
double bleu_oracle(const TokenSeq& cand, const TokenSeq& ref, int max_n) {
  const std::size_t top = std::min<std::size_t>(max_n, cand.size());
  double log_p = 0.0;
  for (std::size_t n = 1; n <= top; ++n) {
    std::vector<bool> used(ref.size() >= n ? ref.size() - n + 1 : 0, false);
    std::size_t matched = 0;
    for (std::size_t i = 0; i + n <= cand.size(); ++i) {
      for (std::size_t j = 0; j < used.size(); ++j) {
        if (used[j]) continue;
        if (std::equal(cand.begin() + i, cand.begin() + i + n, ref.begin() + j)) {
          used[j] = true;
          ++matched;
          break;
        }
      }
    }
    if (matched == 0) return 0.0;
    log_p += std::log(static_cast<double>(matched) / static_cast<double>(cand.size() - n + 1));
  }
  const double c = static_cast<double>(cand.size());
  const double r = static_cast<double>(ref.size());
  const double bp = c > r ? 1.0 : std::exp(1.0 - r / c);
  return bp * std::exp(log_p / static_cast<double>(top));
}

Outcome metric_oracles() {
  Rng rng(202);
  int rouge_bad = 0;
  double bleu_err = 0.0;
  for (int i = 0; i < 200; ++i) {
    const int vocab = std::uniform_int_distribution<int>(2, 6)(rng);
    auto seq = [&] {
      TokenSeq s(std::uniform_int_distribution<int>(1, 15)(rng));
      for (auto& tok : s) tok = "t" + std::to_string(std::uniform_int_distribution<int>(0, vocab - 1)(rng));
      return s;
    };
    const TokenSeq cand = seq(), ref = seq();
    const double lcs = static_cast<double>(lcs_oracle(cand, ref));
    const double p = lcs / static_cast<double>(cand.size());
    const double r = lcs / static_cast<double>(ref.size());
    const double f1 = lcs == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
    const auto got = rouge_l(cand, ref);
    if (got.precision != p || got.recall != r || got.f1 != f1) ++rouge_bad;
    bleu_err = std::max(bleu_err, std::abs(bleu(cand, ref) - bleu_oracle(cand, ref, 4)));
  }

  double analytic_err = 0.0;
  for (int c = 2; c <= 10; ++c) {
    const Posterior uniform(Eigen::VectorXd::Constant(c, 1.0 / c));
    analytic_err = std::max(analytic_err, std::abs(entropy(uniform) - std::log(static_cast<double>(c))));
    analytic_err = std::max(analytic_err, std::abs(confidence(uniform, c - 1) - 1.0 / c));
    Eigen::VectorXd hot = Eigen::VectorXd::Zero(c);
    hot[c / 2] = 1.0;
    const Posterior onehot(hot);
    analytic_err = std::max(analytic_err, std::abs(entropy(onehot)));
    analytic_err = std::max(analytic_err, std::abs(confidence(onehot, c / 2) - 1.0));
  }
  for (double q : {0.1, 0.25, 0.5, 0.9}) {
    const Posterior two((Eigen::VectorXd(2) << q, 1.0 - q).finished());
    const double h = -q * std::log(q) - (1.0 - q) * std::log(1.0 - q);
    analytic_err = std::max(analytic_err, std::abs(entropy(two) - h));
    analytic_err = std::max(analytic_err, std::abs(confidence(two, 0) - q));
  }

  const bool pass = rouge_bad == 0 && bleu_err <= 1e-12 && analytic_err <= 1e-12;
  return {pass, fmt("rouge mismatches %d/200, bleu max err %.2e, entropy/confidence max err %.2e", rouge_bad, bleu_err,
                    analytic_err)};
}

// ---- 3: tuning gradients and frozen members --------------------------------

std::shared_ptr<MiniClassifier> random_member(std::shared_ptr<const Encoder> enc, int classes, Rng& rng) {
  return std::make_shared<MiniClassifier>(enc, normal_matrix<double>(rng, classes, enc->width()),
                                          normal_vector<double>(rng, classes));
}

Outcome tuning_gradients() {
  Rng rng(303);
  double worst = 0.0;
  for (int i = 0; i < 20; ++i) {
    const int classes = std::uniform_int_distribution<int>(2, 4)(rng);
    const int dim = std::uniform_int_distribution<int>(3, 8)(rng);
    const int width = std::uniform_int_distribution<int>(4, 10)(rng);
    const int queries = std::uniform_int_distribution<int>(1, 4)(rng);
    auto member = random_member(Encoder::random(dim, width, rng), classes, rng);
    const Eigen::MatrixXd phi = normal_matrix<double>(rng, queries, width);
    const auto meta = MetaClassifier::random(queries * classes, 2, 8, rng);
    worst = std::max(worst, gradient_check(*member, i % 2, phi, meta));
  }

  // Members must come out of training bit-for-bit unchanged.
  int changed = 0;
  int trainings = 0;
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    Rng mrng(seed);
    auto enc = Encoder::random(6, 8, mrng);
    std::vector<FleetMember> fleet;
    std::vector<Eigen::VectorXd> before;
    for (int m = 0; m < 8; ++m) {
      auto model = random_member(enc, 3, mrng);
      before.push_back(model->parameters());
      fleet.push_back({"m" + std::to_string(m), model, m % 2});
    }
    TuningConfig cfg;
    cfg.epochs = 5;
    cfg.seed = seed;
    train_tuned_audit(fleet, 2, cfg);
    ++trainings;
    for (std::size_t m = 0; m < fleet.size(); ++m) {
      const Eigen::VectorXd after = fleet[m].model->parameters();
      if (after.size() != before[m].size() ||
          std::memcmp(after.data(), before[m].data(), sizeof(double) * after.size()) != 0)
        ++changed;
    }
  }
  return {worst <= 1e-4 && changed == 0,
          fmt("max relative error %.2e over 20 instances, %d changed members over %d trainings", worst, changed,
              trainings)};
}

// ---- experiments ------------------------------------------------------------

ExperimentConfig base_config(std::vector<std::string> methods) {
  ExperimentConfig cfg;
  cfg.seed = 0;
  cfg.methods = std::move(methods);
  return cfg;
}

Outcome s1_metric() {
  auto cfg = base_config({"metric_syn"});
  cfg.population.synthetic_sharpness = 2.0;
  cfg.budget = 200;
  cfg.targets = 100;
  const auto start = Clock::now();
  const auto result = run_experiment(cfg);
  const double elapsed = seconds_since(start);
  const auto& s = result.methods.at("metric_syn");
  return {s.mean >= 0.95 && elapsed < 120.0 && s.accuracies.size() == 5,
          fmt("metric_syn %s over %zu seeds, %.1f s", summary_text(s).c_str(), s.accuracies.size(), elapsed)};
}

Outcome s2_ordering() {
  auto cfg = base_config({"metric_syn", "metric_real", "tune"});
  cfg.fleet.kind = ScenarioKind::S2;
  const auto result = run_experiment(cfg);
  const double tune = result.methods.at("tune").mean;
  const double syn = result.methods.at("metric_syn").mean;
  const double real = result.methods.at("metric_real").mean;
  return {tune >= syn && syn >= real,
          fmt("tune %s, metric_syn %s, metric_real %s", summary_text(result.methods.at("tune")).c_str(),
              summary_text(result.methods.at("metric_syn")).c_str(),
              summary_text(result.methods.at("metric_real")).c_str())};
}

bool near_chance(double v) { return v >= 0.4 && v <= 0.6; }

Outcome null_calibration() {
  auto cfg = base_config({"metric_syn", "metric_real", "tune", "flat_params", "plot"});
  cfg.population.synthetic_sharpness = 0.0;
  const auto result = run_experiment(cfg);

  GeneratorExperimentConfig gen;
  gen.fleet.real_rate = 0.1;
  gen.fleet.synthetic_rate = 0.1;
  const auto control = run_generator_experiment(gen);

  bool pass = near_chance(control.mean);
  std::string detail;
  for (const auto& [name, s] : result.methods) {
    pass = pass && near_chance(s.mean);
    detail += name + " " + fmt("%.3f", s.mean) + ", ";
  }
  detail += "generator " + fmt("%.3f", control.mean);
  return {pass, detail};
}

Outcome generator_audit() {
  GeneratorExperimentConfig cfg;
  cfg.fleet.real_rate = 0.1;
  cfg.fleet.synthetic_rate = 0.5;
  const auto separated = run_generator_experiment(cfg);
  cfg.fleet.synthetic_rate = 0.1;
  const auto control = run_generator_experiment(cfg);
  return {separated.mean >= 1.0 && near_chance(control.mean),
          fmt("0.1 vs 0.5: %s, 0.1 vs 0.1: %s", summary_text(separated).c_str(), summary_text(control).c_str())};
}

Outcome plot_audit() {
  auto cfg = base_config({"plot"});
  cfg.population.synthetic_sharpness = 2.0;
  cfg.plot_references = 200;
  cfg.plot_targets = 200;
  const auto result = run_experiment(cfg);
  const auto& s = result.methods.at("plot");

  PopulationConfig pc;
  pc.split_size = 2000;
  pc.test_size = 400;
  pc.seed = 9;
  const auto pop = gen_population(pc);
  PlotSetConfig plots;
  const auto a = make_rasters(pop.test_real, pc.class_count, 6, plots, 55);
  const auto b = make_rasters(pop.test_real, pc.class_count, 6, plots, 55);
  bool identical = a.size() == b.size();
  for (std::size_t i = 0; identical && i < a.size(); ++i) identical = encode_pgm(a[i]) == encode_pgm(b[i]);

  const auto syn = make_rasters(pop.test_synthetic.at(0), pc.class_count, 12, plots, 56);
  const auto real = make_rasters(pop.test_real, pc.class_count, 12, plots, 57);
  PlotTrainConfig tc;
  tc.epochs = 3;
  tc.seed = 58;
  double split_err = 0.0;
  Rng rng(59);
  for (const auto& model : {PlotClassifier::random(rng), train_plot_classifier(syn, real, tc).model}) {
    const auto terms = plot_loss_terms(model, syn, real);
    split_err = std::max(split_err, std::abs(terms.total - (terms.synthetic + terms.real)));
  }

  return {s.mean >= 0.90 && identical && split_err <= 1e-9,
          fmt("plot %s with %d+%d plots, rasters %s, loss split err %.2e", summary_text(s).c_str(),
              cfg.plot_references, cfg.plot_targets, identical ? "identical" : "differ", split_err)};
}

Outcome protocol() {
  const auto& grid = s2_grid();
  bool grid_ok = grid.size() == 10;
  for (std::size_t i = 0; grid_ok && i < grid.size(); ++i)
    grid_ok = grid[i] == static_cast<double>(i + 1) / 10.0;

  const ExperimentConfig defaults;
  const bool sizes_ok = defaults.metric_references == 20 && defaults.tuning_references == 100 &&
                        defaults.runs == 5 && kEvaluationRuns == 5;

  std::vector<std::uint64_t> seen;
  const auto s = evaluate_auditor(
      [&](std::uint64_t run_seed) {
        seen.push_back(run_seed);
        return std::vector<int>{0, 1};
      },
      {0, 1});
  std::sort(seen.begin(), seen.end());
  const bool runs_ok = s.accuracies.size() == 5 && std::unique(seen.begin(), seen.end()) == seen.end();

  // A fleet drawn at every grid point has the requested synthetic share.
  PopulationConfig pc;
  pc.split_size = 2000;
  pc.test_size = 100;
  pc.seed = 3;
  const auto pop = gen_population(pc);
  FleetSpec spec;
  spec.kind = ScenarioKind::S2;
  spec.training.max_epochs = 1;
  spec.training.min_epochs = 1;
  const auto fleet = train_fleet(pop, spec, 20, Side::Reference, 4, 1);
  std::map<double, int> per_point;
  for (const auto& m : fleet.members)
    if (m.label == 1) ++per_point[m.scenario.synthetic_proportion];
  bool fleet_ok = per_point.size() == 10;
  for (double p : grid) fleet_ok = fleet_ok && per_point[p] == 1;

  return {grid_ok && sizes_ok && runs_ok && fleet_ok,
          fmt("grid %s, default fleets %d/%d, %zu evaluation runs, grid coverage %s", grid_ok ? "exact" : "wrong",
              defaults.metric_references, defaults.tuning_references, s.accuracies.size(),
              fleet_ok ? "complete" : "incomplete")};
}

}  // namespace

int main() {
  const std::vector<std::pair<int, std::function<Outcome()>>> criteria = {
      {1, threshold_oracle}, {2, metric_oracles}, {3, tuning_gradients}, {4, s1_metric}, {5, s2_ordering},
      {6, null_calibration}, {7, generator_audit}, {8, plot_audit},      {9, protocol},
  };
  int failed = 0;
  for (const auto& [id, check] : criteria) {
    Outcome out;
    try {
      out = check();
    } catch (const std::exception& e) {
      out = {false, std::string("threw: ") + e.what()};
    }
    failed += !out.pass;
    std::printf("criterion %d: %s  %s\n", id, out.pass ? "PASS" : "FAIL", out.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
