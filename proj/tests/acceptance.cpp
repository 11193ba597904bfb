// Acceptance suite: one line per criterion, nonzero exit on any failure.

#include <Eigen/Dense>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include "gpforecast/experiment.hpp"
#include "gpforecast/kernel.hpp"
#include "gpforecast/personalize.hpp"
#include "gpforecast/synthetic.hpp"

using namespace gpf;
namespace fs = std::filesystem;
using clk = std::chrono::steady_clock;

namespace {

struct CriterionResult {
  bool passed = false;
  std::string detail;
};

NormalizationStats identity_stats(Eigen::Index feature_dim) {
  NormalizationStats stats;
  stats.feature_means = Eigen::VectorXd::Zero(feature_dim);
  stats.feature_stds = Eigen::VectorXd::Ones(feature_dim);
  stats.fitted_on = "identity";
  return stats;
}

PopulationModel make_model(const Hyperparameters& h, const Eigen::MatrixXd& inputs,
                           const Eigen::MatrixXd& targets) {
  const Eigen::MatrixXd k = kernel_matrix(inputs, inputs, h);
  SpdFactor factor = factor_spd(k, h.noise_variance(), "training kernel");
  Eigen::MatrixXd alpha = factor.solve(targets);
  return PopulationModel{h,
                         inputs,
                         std::move(factor),
                         std::move(alpha),
                         identity_stats(inputs.cols() - 1),
                         static_cast<int>(targets.cols()),
                         {}};
}

Eigen::MatrixXd random_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols,
                              double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) {
      m(i, j) = normal(rng);
    }
  }
  return m;
}

// Criterion 1: pGP equals exact joint-GP conditioning on source + history
// within 1e-6 standardized units, on 100+ random instances, in under 1 min.
CriterionResult criterion_pgp_master_oracle() {
  const auto start = clk::now();
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<Eigen::Index> n_dist(2, 60);
  std::uniform_int_distribution<Eigen::Index> m_dist(1, 8);
  std::uniform_int_distribution<Eigen::Index> d_dist(1, 10);
  std::uniform_real_distribution<double> sf(0.3, 2.0);
  std::uniform_real_distribution<double> ell(0.5, 3.0);
  std::uniform_real_distribution<double> noise(0.01, 0.5);

  double worst = 0.0;
  for (int rep = 0; rep < 120; ++rep) {
    const Eigen::Index n = n_dist(rng);
    const Eigen::Index m = m_dist(rng);
    const Eigen::Index d = d_dist(rng);
    const Hyperparameters h(sf(rng), ell(rng), noise(rng));
    const Eigen::MatrixXd x_source = random_matrix(rng, n, d);
    const Eigen::MatrixXd y_source = random_matrix(rng, n, 4);
    const Eigen::MatrixXd x_hist = random_matrix(rng, m, d);
    const Eigen::MatrixXd y_hist = random_matrix(rng, m, 4);
    const Eigen::VectorXd u_star = random_matrix(rng, d, 1).col(0);

    const PopulationModel model = make_model(h, x_source, y_source);
    TargetHistory hist;
    hist.inputs = x_hist;
    hist.targets = y_hist;
    const StdForecast pgp = predict_pgp_std(model, hist, u_star);

    // Independent route: one dense kernel over source+history rows.
    Eigen::MatrixXd x_all(n + m, d);
    x_all.topRows(n) = x_source;
    x_all.bottomRows(m) = x_hist;
    Eigen::MatrixXd y_all(n + m, 4);
    y_all.topRows(n) = y_source;
    y_all.bottomRows(m) = y_hist;
    Eigen::MatrixXd k_all = kernel_matrix(x_all, x_all, h);
    k_all.diagonal().array() += h.noise_variance();
    const Eigen::MatrixXd k_star = kernel_matrix(x_all, u_star.transpose(), h);
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(k_all);
    const Eigen::VectorXd oracle_means = (ldlt.solve(y_all)).transpose() * k_star.col(0);
    const double oracle_var =
        std::max(0.0, h.signal_variance() - k_star.col(0).dot(ldlt.solve(k_star.col(0))));

    for (Eigen::Index c = 0; c < 4; ++c) {
      worst = std::max(worst, std::abs(pgp.means[c] - oracle_means[c]));
    }
    worst = std::max(worst, std::abs(pgp.variance - oracle_var));
  }
  const double elapsed = std::chrono::duration<double>(clk::now() - start).count();

  CriterionResult res;
  res.passed = worst <= 1e-6 && elapsed < 60.0;
  std::ostringstream oss;
  oss << "120 instances, max |pGP - joint conditioning| = " << worst << ", " << elapsed << "s";
  res.detail = oss.str();
  return res;
}

// Criterion 2: analytic NLML gradient vs central finite differences,
// relative error <= 1e-4 per component, 50+ random instances.
CriterionResult criterion_nlml_gradient() {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> size(2, 50);
  std::uniform_int_distribution<int> dims(1, 6);
  std::uniform_int_distribution<int> cols(1, 4);
  std::uniform_real_distribution<double> log_param(std::log(0.2), std::log(5.0));

  double worst = 0.0;
  for (int rep = 0; rep < 60; ++rep) {
    const int n = size(rng);
    TrainingSet ts;
    ts.inputs = random_matrix(rng, n, dims(rng));
    ts.targets = random_matrix(rng, n, cols(rng));
    ts.horizon_count = static_cast<int>(ts.targets.cols());

    const double ls = log_param(rng);
    const double ll = log_param(rng);
    const double ln = log_param(rng);
    const NlmlResult res = nlml(ts, Hyperparameters::from_log(ls, ll, ln));

    const double step = 1e-5;
    const auto value_at = [&](double a, double b, double c) {
      return nlml(ts, Hyperparameters::from_log(a, b, c)).value;
    };
    const double fd[3] = {
        (value_at(ls + step, ll, ln) - value_at(ls - step, ll, ln)) / (2 * step),
        (value_at(ls, ll + step, ln) - value_at(ls, ll - step, ln)) / (2 * step),
        (value_at(ls, ll, ln + step) - value_at(ls, ll, ln - step)) / (2 * step)};
    for (int i = 0; i < 3; ++i) {
      worst = std::max(worst,
                       std::abs(res.gradient[static_cast<std::size_t>(i)] - fd[i]) /
                           std::max(1e-6, std::abs(fd[i])));
    }
  }

  CriterionResult res;
  res.passed = worst <= 1e-4;
  std::ostringstream oss;
  oss << "60 instances, max relative gradient error = " << worst;
  res.detail = oss.str();
  return res;
}

// Criterion 3: refitting data generated from a known GP recovers the
// hyperparameters within 0.3 natural-log units on at least 4 of 5 seeds.
CriterionResult criterion_hyperparameter_recovery() {
  const double true_log[3] = {std::log(1.0), std::log(2.0), std::log(0.1)};
  int recovered = 0;
  std::ostringstream detail;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    std::mt19937_64 rng(seed);
    const int n = 300;
    const Eigen::MatrixXd inputs = random_matrix(rng, n, 3, 3.0);
    const Hyperparameters truth(1.0, 2.0, 0.1);
    Eigen::MatrixXd k = kernel_matrix(inputs, inputs, truth);
    const SpdFactor factor = factor_spd(k, 1e-12);
    const Eigen::MatrixXd latent = factor.matrix_l() * random_matrix(rng, n, 1);
    const Eigen::MatrixXd targets = latent + random_matrix(rng, n, 1, std::sqrt(0.1));

    TrainingSet ts;
    ts.inputs = inputs;
    ts.targets = targets;
    ts.horizon_count = 1;
    OptimizerConfig opt;
    opt.restarts = 5;
    opt.seed = seed;
    const PopulationModel m = fit_population(ts, opt, identity_stats(2));

    const double err[3] = {std::abs(m.hyper.log_signal_variance() - true_log[0]),
                           std::abs(m.hyper.log_lengthscale() - true_log[1]),
                           std::abs(m.hyper.log_noise_variance() - true_log[2])};
    const bool ok = err[0] <= 0.3 && err[1] <= 0.3 && err[2] <= 0.3;
    recovered += ok ? 1 : 0;
    detail << (ok ? "+" : "-");
  }

  CriterionResult res;
  res.passed = recovered >= 4;
  res.detail = std::to_string(recovered) + "/5 seeds within 0.3 log units [" + detail.str() + "]";
  return res;
}

ExperimentResult small_run(std::uint64_t seed) {
  SyntheticConfig synth;
  synth.n_subjects = 30;
  synth.n_visits = 10;
  synth.n_features = 8;
  synth.informative_fraction = 0.5;
  synth.missing_rate = 0.2;
  synth.seed = seed;
  ExperimentConfig cfg;
  cfg.folds = 5;
  cfg.min_visits = 5;
  cfg.restarts = 2;
  cfg.seed_split = seed;
  cfg.seed_opt = seed;
  return run_experiment(generate_synthetic(synth), cfg);
}

// Criterion 4: empty-history fallback is bitwise and personalization never
// inflates the variance, across all records of a full synthetic run.
CriterionResult criterion_fallback_and_dominance() {
  const ExperimentResult run = small_run(4);

  std::map<std::string, std::map<ModelKind, const PredictionRecord*>> by_slot;
  for (const auto& r : run.records) {
    by_slot[r.subject_id + "#" + std::to_string(r.anchor) + "#" + std::to_string(r.horizon)]
           [r.model] = &r;
  }

  long fallback_slots = 0;
  long dominance_slots = 0;
  bool bitwise_ok = true;
  bool dominance_ok = true;
  for (const auto& [key, models] : by_slot) {
    const auto* sgp = models.at(ModelKind::Sgp);
    const auto* pgp = models.at(ModelKind::Pgp);
    // History rows need anchor > horizon; below that the fallback chain must
    // reproduce the population record bit for bit.
    if (sgp->anchor <= run.report.horizon) {
      ++fallback_slots;
      const auto* joint = models.at(ModelKind::Joint);
      const auto* tgp = models.at(ModelKind::Tgp);
      bitwise_ok = bitwise_ok && pgp->mean == sgp->mean && pgp->variance == sgp->variance &&
                   pgp->ci_lower == sgp->ci_lower && pgp->ci_upper == sgp->ci_upper &&
                   joint->mean == pgp->mean && joint->variance == pgp->variance &&
                   tgp->mean == sgp->mean && tgp->variance == sgp->variance;
    }
    ++dominance_slots;
    dominance_ok = dominance_ok && pgp->variance <= sgp->variance + 1e-10;
  }

  CriterionResult res;
  res.passed = bitwise_ok && dominance_ok && fallback_slots > 0;
  std::ostringstream oss;
  oss << dominance_slots << " slots, " << fallback_slots
      << " fallback slots, bitwise=" << (bitwise_ok ? "yes" : "NO")
      << ", variance dominance=" << (dominance_ok ? "yes" : "NO");
  res.detail = oss.str();
  return res;
}

// Criterion 5: WES degenerates to MAE under constant variance, perfect
// predictions score zero, and masked slots cannot move the metrics.
CriterionResult criterion_metric_identities() {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> val(-30.0, 30.0);
  std::vector<PredictionRecord> records;
  for (int i = 0; i < 200; ++i) {
    PredictionRecord r;
    r.subject_id = "S";
    r.anchor = 1 + i % 7;
    r.horizon = 1 + i % 4;
    r.model = ModelKind::Sgp;
    r.mean = val(rng);
    r.variance = 2.75;  // constant
    const double half = kCiHalfWidth * std::sqrt(r.variance);
    r.ci_lower = r.mean - half;
    r.ci_upper = r.mean + half;
    r.truth = val(rng);
    r.truth_observed = (i % 3) != 0;
    records.push_back(r);
  }

  const bool wes_eq_mae = wes(records) == mae(records);

  std::vector<PredictionRecord> perfect = records;
  for (auto& r : perfect) {
    r.mean = r.truth;
  }
  const bool perfect_zero = mae(perfect) == 0.0 && wes(perfect) == 0.0;

  std::vector<PredictionRecord> perturbed = records;
  for (auto& r : perturbed) {
    if (!r.truth_observed) {
      r.mean += 1e6;
    }
  }
  const bool masked = mae(perturbed) == mae(records) && wes(perturbed) == wes(records);

  CriterionResult res;
  res.passed = wes_eq_mae && perfect_zero && masked;
  std::ostringstream oss;
  oss << "wes==mae " << (wes_eq_mae ? "yes" : "NO") << ", perfect->0 "
      << (perfect_zero ? "yes" : "NO") << ", masking invariant " << (masked ? "yes" : "NO");
  res.detail = oss.str();
  return res;
}

// Criterion 6: trend analog on the pinned synthetic cohort, 10 seeds and
// under 10 minutes: the averaged model beats the population model and the
// visit-cap curve does not increase for sgp/pgp/joint.
CriterionResult criterion_trend_analog() {
  const auto start = clk::now();
  int passing = 0;
  std::ostringstream detail;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    SyntheticConfig synth;
    synth.n_subjects = 100;
    synth.n_visits = 12;
    synth.n_features = 20;
    synth.informative_fraction = 0.5;
    synth.missing_rate = 0.2;
    synth.seed = seed;
    ExperimentConfig cfg;
    cfg.folds = 10;
    cfg.restarts = 2;
    cfg.seed_split = seed;
    cfg.seed_opt = seed;
    const ExperimentResult run = run_experiment(generate_synthetic(synth), cfg);

    const auto& pm = run.report.per_model;
    const double sgp_avg = pm.at(ModelKind::Sgp).mae_avg.mean;
    const double joint_avg = pm.at(ModelKind::Joint).mae_avg.mean;
    const auto cap_ok = [&](ModelKind kind) {
      const auto& caps = pm.at(kind).mae_by_visit_cap;
      return caps.at(15).mean <= caps.at(5).mean + 0.05;
    };
    const bool ok = joint_avg < sgp_avg && cap_ok(ModelKind::Sgp) && cap_ok(ModelKind::Pgp) &&
                    cap_ok(ModelKind::Joint);
    passing += ok ? 1 : 0;
    detail << (ok ? "+" : "-");
  }
  const double elapsed = std::chrono::duration<double>(clk::now() - start).count();

  CriterionResult res;
  res.passed = passing >= 8 && elapsed < 600.0;
  std::ostringstream oss;
  oss << passing << "/10 seeds show the trend [" << detail.str() << "], " << elapsed << "s";
  res.detail = oss.str();
  return res;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(GPF_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  return WEXITSTATUS(std::system(cmd.c_str()));
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream oss;
  oss << in.rdbuf();
  return oss.str();
}

// Criterion 7: two cmd_eval runs with identical seeds produce byte-identical
// JSON reports.
CriterionResult criterion_determinism() {
  const fs::path dir = fs::temp_directory_path() / "gpf_acceptance_determinism";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::string cohort = (dir / "cohort.csv").string();

  CriterionResult res;
  if (run_cli("synth --subjects 24 --visits 9 --features 6 --informative-fraction 0.5 "
              "--missing-rate 0.2 --seed 11 --out " +
              cohort) != 0) {
    res.detail = "synth failed";
    return res;
  }
  const std::string eval_args = "eval --data " + cohort +
                                " --folds 4 --min-visits 5 --restarts 2 --seed-split 3 "
                                "--seed-opt 4 --out-dir ";
  if (run_cli(eval_args + (dir / "run1").string()) != 0 ||
      run_cli(eval_args + (dir / "run2").string()) != 0) {
    res.detail = "eval failed";
    return res;
  }
  const std::string a = slurp(dir / "run1" / "report.json");
  const std::string b = slurp(dir / "run2" / "report.json");
  res.passed = !a.empty() && a == b;
  res.detail = "report.json " + std::to_string(a.size()) +
               " bytes, byte-identical: " + (res.passed ? "yes" : "NO");
  fs::remove_all(dir);
  return res;
}

// Criterion 8: every emitted record satisfies ci = mean +/- 0.67 sqrt(V).
CriterionResult criterion_ci_formula() {
  const ExperimentResult run = small_run(8);
  double worst = 0.0;
  for (const auto& r : run.records) {
    const double half = 0.67 * std::sqrt(r.variance);
    worst = std::max(worst, std::abs(r.ci_lower - (r.mean - half)));
    worst = std::max(worst, std::abs(r.ci_upper - (r.mean + half)));
  }
  CriterionResult res;
  res.passed = worst <= 1e-12 && !run.records.empty();
  std::ostringstream oss;
  oss << run.records.size() << " records, max CI deviation = " << worst;
  res.detail = oss.str();
  return res;
}

}  // namespace

int main() {
  const std::pair<const char*, std::function<CriterionResult()>> criteria[] = {
      {"1. pGP master oracle (joint conditioning, 1e-6)", criterion_pgp_master_oracle},
      {"2. NLML gradient vs finite differences (1e-4)", criterion_nlml_gradient},
      {"3. hyperparameter recovery (0.3 log units, 4/5 seeds)",
       criterion_hyperparameter_recovery},
      {"4. fallback bitwise + variance dominance", criterion_fallback_and_dominance},
      {"5. metric identities (WES=MAE, zero, masking)", criterion_metric_identities},
      {"6. trend analog (joint<sgp, caps, 8/10 seeds)", criterion_trend_analog},
      {"7. determinism (byte-identical reports)", criterion_determinism},
      {"8. CI formula (mean +/- 0.67 sqrt(V), 1e-12)", criterion_ci_formula},
  };

  int failures = 0;
  for (const auto& [name, fn] : criteria) {
    CriterionResult result;
    try {
      result = fn();
    } catch (const std::exception& e) {
      result.passed = false;
      result.detail = std::string("exception: ") + e.what();
    }
    std::printf("%s  %s — %s\n", result.passed ? "PASS" : "FAIL", name, result.detail.c_str());
    std::fflush(stdout);
    failures += result.passed ? 0 : 1;
  }
  std::printf("%d/8 acceptance criteria passed\n", 8 - failures);
  return failures == 0 ? 0 : 1;
}
