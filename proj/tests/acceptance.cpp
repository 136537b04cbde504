// Acceptance checks for the shipped experiments. Each criterion trains or
// analyzes at the default protocol (tabular agents, 200k steps, seeds 1-5),
// prints supporting numbers, and ends with exactly one PASS/FAIL line.
// Criteria can be selected by number on the command line; artifacts land
// under acceptance_out/ in the working directory.
//
// Level-crossing comparisons ("reaches L in fewer steps than X") read the
// named baseline X as one number - the first step where X's aggregate mean
// curve reaches L - and count the candidate's per-seed crossings against
// it. Seeds of different algorithms are not coupled runs, so pairing them
// index-by-index would compare unrelated noise.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "adamve/harness.hpp"
#include "helpers.hpp"

namespace fs = std::filesystem;

namespace adamve {
namespace {

constexpr const char* kOutRoot = "acceptance_out";

struct Verdict {
  bool pass = false;
  std::string summary;
};

void note(const std::string& line) { std::cout << "  - " << line << '\n'; }

std::string fmt(double v) { return format_double(v); }

double elapsed_s(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                       start)
      .count();
}

ExperimentConfig base_config(ModelKind model, Algorithm alg,
                             const std::string& out_dir) {
  ExperimentConfig cfg;
  cfg.model = model;
  cfg.agent.algorithm = alg;
  cfg.out_dir = out_dir;
  return cfg;
}

// Runs the experiment and returns the per-seed records; any failed seed is
// reported and turns into an empty result so the criterion fails loudly.
std::vector<RunRecord> run_records(const ExperimentConfig& cfg) {
  const RunSummary summary = run_experiment(cfg);
  std::vector<RunRecord> records;
  for (const SeedOutcome& out : summary.seeds) {
    if (!out.ok) {
      note("seed " + std::to_string(out.seed) + " failed: " + out.error);
      return {};
    }
    records.push_back(out.record);
  }
  return records;
}

double aggregate_final(const std::vector<RunRecord>& records) {
  double sum = 0.0;
  for (const RunRecord& rec : records) sum += rec.rows.back().mean_return;
  return sum / static_cast<double>(records.size());
}

// First step where the mean curve over seeds reaches the level; -1 if never.
std::int64_t aggregate_crossing(const std::vector<RunRecord>& records,
                                double level) {
  const std::size_t rows = records.front().rows.size();
  for (std::size_t i = 0; i < rows; ++i) {
    double mean = 0.0;
    for (const RunRecord& rec : records) mean += rec.rows[i].mean_return;
    mean /= static_cast<double>(records.size());
    if (mean >= level) return records.front().rows[i].step;
  }
  return -1;
}

std::int64_t seed_crossing(const RunRecord& rec, double level) {
  for (const EvalRow& row : rec.rows) {
    if (row.mean_return >= level) return row.step;
  }
  return -1;
}

int count_faster(const std::vector<RunRecord>& records, double level,
                 std::int64_t budget, std::string* detail) {
  int wins = 0;
  std::string steps;
  for (const RunRecord& rec : records) {
    const std::int64_t t = seed_crossing(rec, level);
    if (t >= 0 && t < budget) ++wins;
    if (!steps.empty()) steps += ',';
    steps += (t < 0 ? std::string("never") : std::to_string(t));
  }
  if (detail) *detail = steps;
  return wins;
}

// ---------------------------------------------------------------------------
// 1. With a perfect model the adaptive targets coincide with the uniform
//    mixture, and both beat the one-step baseline to a 0.95 return.

Verdict criterion1() {
  const auto start = std::chrono::steady_clock::now();
  const fs::path dir = fs::path(kOutRoot) / "c1";
  const GridSpec spec = GridSpec::four_room();

  const auto dqn = run_records(
      base_config(ModelKind::Oracle, Algorithm::Dqn, (dir / "dqn").string()));
  const auto ada = run_records(base_config(ModelKind::Oracle,
                                           Algorithm::AdaMve,
                                           (dir / "adamve").string()));
  const auto avg = run_records(base_config(ModelKind::Oracle,
                                           Algorithm::MveAvg,
                                           (dir / "mve_avg").string()));
  if (dqn.empty() || ada.empty() || avg.empty()) {
    return {false, "a training run failed"};
  }

  // Target equivalence on the trained run: with the oracle model the
  // learned errors must stay below 1e-6, and then the adaptive and
  // uniform-mixture bootstrap targets agree to 1e-9 per sample.
  const ErrorFunction errfn =
      load_error_checkpoint(dir / "adamve" / "errors_seed1.ckpt");
  const Approximator q = load_q_checkpoint(dir / "adamve" / "q_seed1.ckpt");
  double max_err = 0.0;
  for (const GridState& s : spec.open_cells()) {
    for (int h = 0; h <= errfn.h_max(); ++h) {
      max_err = std::max(max_err, errfn.eval_state_error(s, h));
    }
  }
  note("trained error ceiling " + fmt(max_err) + " (need < 1e-6)");

  AgentConfig acfg;
  acfg.algorithm = Algorithm::AdaMve;
  Agent adaptive(spec, DynamicsModel::oracle(spec), acfg, 1);
  adaptive.install_error_function(errfn, true);
  acfg.algorithm = Algorithm::MveAvg;
  Agent uniform(spec, DynamicsModel::oracle(spec), acfg, 1);
  adaptive.q() = q;
  adaptive.q_target() = q;
  uniform.q() = q;
  uniform.q_target() = q;

  double max_diff = 0.0;
  for (const Transition& t : collect_uniform_transitions(spec, 2000, 99)) {
    max_diff = std::max(max_diff, std::abs(adaptive.bootstrap_target(t) -
                                           uniform.bootstrap_target(t)));
  }
  note("max per-sample target difference " + fmt(max_diff) +
       " (need <= 1e-9)");

  const std::int64_t dqn_steps = aggregate_crossing(dqn, 0.95);
  std::string ada_steps, avg_steps;
  const int ada_wins = count_faster(ada, 0.95, dqn_steps, &ada_steps);
  const int avg_wins = count_faster(avg, 0.95, dqn_steps, &avg_steps);
  note("baseline aggregate reaches 0.95 at step " +
       std::to_string(dqn_steps));
  note("adaptive seeds cross at " + ada_steps + " -> " +
       std::to_string(ada_wins) + "/5 strictly faster");
  note("uniform-mixture seeds cross at " + avg_steps + " -> " +
       std::to_string(avg_wins) + "/5 strictly faster");
  const double secs = elapsed_s(start);
  note("runtime " + fmt(secs) + " s (budget 600)");

  const bool pass = max_err < 1e-6 && max_diff <= 1e-9 && dqn_steps > 0 &&
                    ada_wins >= 4 && avg_wins >= 4 && secs <= 600.0;
  std::ostringstream os;
  os << "target diff " << fmt(max_diff) << ", adaptive " << ada_wins
     << "/5 and uniform mixture " << avg_wins
     << "/5 seeds faster than the one-step baseline";
  return {pass, os.str()};
}

// ---------------------------------------------------------------------------
// 2. Wrong models: the fixed 5-step expansion should collapse while the
//    adaptive mixture stays at the baseline's level and gets there faster.

Verdict criterion2() {
  const fs::path dir = fs::path(kOutRoot) / "c2";
  bool pass = true;
  std::ostringstream os;
  for (ModelKind model : {ModelKind::ThreeRoom, ModelKind::NoWall}) {
    const std::string name = model_kind_name(model);
    const fs::path mdir = dir / name;

    ExperimentConfig mve5 =
        base_config(model, Algorithm::Mve, (mdir / "mve5").string());
    mve5.agent.mve_h = 5;
    ExperimentConfig mve1 =
        base_config(model, Algorithm::Mve, (mdir / "mve1").string());
    mve1.agent.mve_h = 1;
    ExperimentConfig mve3 =
        base_config(model, Algorithm::Mve, (mdir / "mve3").string());
    mve3.agent.mve_h = 3;

    const auto dqn = run_records(
        base_config(model, Algorithm::Dqn, (mdir / "dqn").string()));
    const auto deep = run_records(mve5);
    const auto shallow = run_records(mve1);
    const auto mid = run_records(mve3);
    const auto ada = run_records(
        base_config(model, Algorithm::AdaMve, (mdir / "adamve").string()));
    if (dqn.empty() || deep.empty() || shallow.empty() || mid.empty() ||
        ada.empty()) {
      return {false, "a training run failed"};
    }

    const double dqn_final = aggregate_final(dqn);
    const double deep_final = aggregate_final(deep);
    const double ada_final = aggregate_final(ada);
    const double h1_final = aggregate_final(shallow);
    const double h3_final = aggregate_final(mid);

    const bool collapse = deep_final <= 0.5 * dqn_final;
    const bool parity = ada_final >= 0.95 * dqn_final;
    const bool ablation = ada_final >= h1_final && ada_final >= h3_final;

    const double level = 0.9 * dqn_final;
    const std::int64_t dqn_steps = aggregate_crossing(dqn, level);
    std::string steps;
    const int wins =
        count_faster(ada, level, (dqn_steps + 1) / 2, &steps);
    const bool speed = dqn_steps > 0 && wins >= 4;

    note(name + ": finals baseline " + fmt(dqn_final) + ", 5-step " +
         fmt(deep_final) + ", adaptive " + fmt(ada_final) + ", 1-step " +
         fmt(h1_final) + ", 3-step " + fmt(h3_final));
    note(name + ": 5-step collapse (<= 0.5x baseline): " +
         (collapse ? "yes" : "NO"));
    note(name + ": adaptive parity (>= 0.95x baseline): " +
         (parity ? "yes" : "NO"));
    note(name + ": baseline reaches " + fmt(level) + " at step " +
         std::to_string(dqn_steps) + "; adaptive seeds " + steps + " -> " +
         std::to_string(wins) + "/5 within half (" +
         (wins >= 4 ? "yes" : "NO") + ")");
    note(name + ": adaptive beats both fixed-horizon ablations: " +
         (ablation ? "yes" : "NO"));

    pass = pass && collapse && parity && ablation && speed;
    if (!os.str().empty()) os << "; ";
    os << name << " collapse=" << (collapse ? "y" : "n")
       << " parity=" << (parity ? "y" : "n") << " speed=" << wins << "/5"
       << " ablations=" << (ablation ? "y" : "n");
  }
  return {pass, os.str()};
}

// ---------------------------------------------------------------------------
// 3. Horizon heatmaps: the mixture retreats to short horizons exactly where
//    the model is wrong.

double chebyshev_to_internal_wall(const GridSpec& spec, GridState s) {
  int best = std::numeric_limits<int>::max();
  for (int y = 0; y < spec.height(); ++y) {
    for (int x = 0; x < spec.width(); ++x) {
      if (!spec.wall(x, y)) continue;
      best = std::min(best, std::max(std::abs(s.x - x), std::abs(s.y - y)));
    }
  }
  return static_cast<double>(best);
}

Verdict criterion3() {
  const fs::path dir = fs::path(kOutRoot) / "c3";
  const GridSpec spec = GridSpec::four_room();
  bool pass = true;
  std::ostringstream os;

  for (ReferenceKind kind : {ReferenceKind::Conservative,
                             ReferenceKind::Greedy, ReferenceKind::Replay}) {
    for (ModelKind model : {ModelKind::ThreeRoom, ModelKind::NoWall}) {
      const std::string panel = std::string(reference_kind_name(kind)) +
                                "/" + model_kind_name(model);
      ExperimentConfig cfg = base_config(
          model, Algorithm::AdaMve,
          (dir / (std::string(reference_kind_name(kind)) + "_" +
                  model_kind_name(model)))
              .string());
      cfg.agent.reference = kind;
      cfg.seeds = {1};
      const auto records = run_records(cfg);
      if (records.empty()) return {false, "a training run failed"};

      const fs::path run(cfg.out_dir);
      const ErrorFunction errfn =
          load_error_checkpoint(run / "errors_seed1.ckpt");
      std::optional<Approximator> qbar;
      if (kind == ReferenceKind::Greedy) {
        qbar = load_q_checkpoint(run / "q_seed1.ckpt");
      }
      const std::vector<double> hm =
          horizon_heatmap(spec, errfn, cfg.agent.tau, qbar ? &*qbar : nullptr);
      const auto region_mean = [&](auto&& keep) {
        double sum = 0.0;
        int n = 0;
        for (const GridState& s : spec.open_cells()) {
          if (!keep(s)) continue;
          sum += hm[static_cast<std::size_t>(spec.cell_index(s))];
          ++n;
        }
        return sum / std::max(1, n);
      };

      bool ok = false;
      if (model == ModelKind::ThreeRoom) {
        const double broken = region_mean(
            [](GridState s) { return s.x < 9 && s.y < 9; });
        const double intact = region_mean(
            [](GridState s) { return s.x != 9 && s.y != 9 &&
                                     !(s.x < 9 && s.y < 9); });
        ok = broken < 0.5 && intact > 3.0 * broken;
        note(panel + ": broken-room mean depth " + fmt(broken) +
             ", other rooms " + fmt(intact) + " (need < 0.5 and > 3x): " +
             (ok ? "yes" : "NO"));
      } else {
        const double near = region_mean([&](GridState s) {
          return chebyshev_to_internal_wall(spec, s) == 1.0;
        });
        const double far = region_mean([&](GridState s) {
          return chebyshev_to_internal_wall(spec, s) >= 3.0;
        });
        ok = near < 0.6 * far;
        note(panel + ": wall-adjacent mean depth " + fmt(near) +
             ", far cells " + fmt(far) + " (need < 0.6x): " +
             (ok ? "yes" : "NO"));
      }
      pass = pass && ok;
      if (!os.str().empty()) os << "; ";
      os << panel << "=" << (ok ? "y" : "n");
    }
  }
  return {pass, os.str()};
}

// ---------------------------------------------------------------------------
// 4. The replay-form TD estimate must land on the exact policy-evaluation
//    values of the error rewards.

Verdict criterion4() {
  const auto start = std::chrono::steady_clock::now();
  const GridSpec spec = GridSpec::four_room();
  bool pass = true;
  std::ostringstream os;
  for (ModelKind kind : {ModelKind::ThreeRoom, ModelKind::NoWall}) {
    const DynamicsModel model = make_model(spec, kind, {}, 1);
    const TdVsDpResult result =
        td_vs_dp(spec, model, 5, 0.98, 2000000, 200000, 64, 0.01, 0.3, 1);
    const double bound = 0.05 * result.max_dp_value;
    const bool ok = result.max_abs_err < bound;
    note(std::string(model_kind_name(kind)) + ": max abs error " +
         fmt(result.max_abs_err) + " vs bound " + fmt(bound) +
         " (0.05 x max value " + fmt(result.max_dp_value) + "): " +
         (ok ? "yes" : "NO"));
    pass = pass && ok;
    if (!os.str().empty()) os << "; ";
    os << model_kind_name(kind) << " err=" << fmt(result.max_abs_err)
       << " bound=" << fmt(bound);
  }
  const double secs = elapsed_s(start);
  note("runtime " + fmt(secs) + " s (budget 60)");
  pass = pass && secs <= 60.0;
  return {pass, os.str() + "; " + fmt(secs) + " s"};
}

// ---------------------------------------------------------------------------
// 5. The value-error bound holds in every shipped configuration, and cells
//    with zero cumulative error have exactly matching values.

Verdict criterion5() {
  const GridSpec spec = GridSpec::four_room();
  const std::vector<double> vbar(static_cast<std::size_t>(spec.num_cells()),
                                 0.0);
  bool pass = true;
  int combos = 0;
  double worst_gap = 0.0;
  std::size_t violations = 0;

  for (ModelKind kind :
       {ModelKind::Oracle, ModelKind::ThreeRoom, ModelKind::NoWall}) {
    const DynamicsModel model = make_model(spec, kind, {}, 1);
    for (const char* policy_name : {"uniform", "always-right"}) {
      const PolicyTable pi = make_policy(spec, policy_name);
      for (int h = 1; h <= 5; ++h) {
        const BoundReport report = value_bound_check(model, pi, vbar, h, 0.98);
        ++combos;
        violations += report.violations.size();
        for (const GridState& s : report.violations) {
          const std::size_t c = static_cast<std::size_t>(spec.cell_index(s));
          note(std::string("bound violated: model ") +
               model_kind_name(kind) + ", policy " + policy_name + ", h " +
               std::to_string(h) + ", cell (" + std::to_string(s.x) + "," +
               std::to_string(s.y) + "), lhs " + fmt(report.lhs[c]) +
               " rhs " + fmt(report.rhs[c]));
          pass = false;
        }
        for (const GridState& s : spec.open_cells()) {
          const std::size_t c = static_cast<std::size_t>(spec.cell_index(s));
          if (report.err_h[c] == 0.0) {
            worst_gap = std::max(worst_gap, report.lhs[c]);
            if (report.lhs[c] > 1e-12) {
              note(std::string("zero-error cell with value gap: model ") +
                   model_kind_name(kind) + ", policy " + policy_name +
                   ", h " + std::to_string(h) + ", cell (" +
                   std::to_string(s.x) + "," + std::to_string(s.y) +
                   "), gap " + fmt(report.lhs[c]));
              pass = false;
            }
          }
        }
      }
    }
  }
  note(std::to_string(combos) +
       " model x policy x horizon configurations audited");
  note("worst value gap on zero-error cells " + fmt(worst_gap) +
       " (need <= 1e-12)");
  std::ostringstream os;
  os << combos << " configurations, " << violations
     << " bound violations, zero-error gap " << fmt(worst_gap);
  return {pass, os.str()};
}

// ---------------------------------------------------------------------------
// 6. Numerical kernels: MLP gradients against central differences, and the
//    softmax weights' normalization and shift invariance.

Verdict criterion6() {
  // Same trial generator as the unit suite: finite differencing is only
  // meaningful away from ReLU kinks, and these pinned seeds are known to
  // keep every checked parameter on a smooth region.
  Rng cfg_rng(2024);
  double worst_grad = 0.0;
  int checked = 0;
  for (int trial = 0; trial < 24; ++trial) {
    const int inputs = 1 + static_cast<int>(cfg_rng.below(6));
    const int outputs = 1 + static_cast<int>(cfg_rng.below(5));
    std::vector<int> hidden;
    const int depth = static_cast<int>(cfg_rng.below(4));
    for (int d = 0; d < depth; ++d) {
      hidden.push_back(1 + static_cast<int>(cfg_rng.below(12)));
    }
    Rng init(1000 + trial);
    Approximator net = Approximator::mlp_raw(inputs, hidden, outputs, init);
    const int batch = 1 + static_cast<int>(cfg_rng.below(4));
    std::vector<double> xs(static_cast<std::size_t>(batch) * inputs);
    std::vector<HeadTarget> ht(batch);
    for (double& v : xs) v = cfg_rng.uniform(-2.0, 2.0);
    for (auto& t : ht) {
      t.head = static_cast<int>(cfg_rng.below(outputs));
      t.target = cfg_rng.uniform(-3.0, 3.0);
    }
    worst_grad =
        std::max(worst_grad, testing::gradcheck_max_rel_err(net, xs, ht));
    ++checked;
  }
  note(std::to_string(checked) + " network configurations, worst gradient " +
       "relative error " + fmt(worst_grad) + " (need < 1e-4)");

  // Errors and shifts live on a 2^-20 grid so that errs + shift is exact in
  // doubles; any deviation then comes from the weight computation itself,
  // not from rounding the test inputs.
  constexpr double kGrid = 1.0 / (1 << 20);
  Rng err_rng(78);
  double worst_sum = 0.0;
  double worst_shift = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const double scale = std::pow(10.0, err_rng.uniform(-3.0, 6.0));
    const std::uint64_t ticks =
        std::max<std::uint64_t>(1, static_cast<std::uint64_t>(scale / kGrid));
    std::vector<double> errs(6);
    for (double& e : errs) {
      e = static_cast<double>(err_rng.below(ticks)) * kGrid;
    }
    const std::vector<double> w = horizon_weights(errs, 0.01);
    double sum = 0.0;
    for (double x : w) sum += x;
    worst_sum = std::max(worst_sum, std::abs(sum - 1.0));

    constexpr std::uint64_t kShiftTicks =
        static_cast<std::uint64_t>(2e6 / kGrid);
    const double shift =
        (static_cast<double>(err_rng.below(kShiftTicks + 1)) -
         static_cast<double>(kShiftTicks / 2)) *
        kGrid;
    std::vector<double> shifted = errs;
    for (double& e : shifted) e += shift;
    const std::vector<double> ws = horizon_weights(shifted, 0.01);
    for (std::size_t h = 0; h < w.size(); ++h) {
      worst_shift = std::max(worst_shift, std::abs(w[h] - ws[h]));
    }
  }
  note("200 weight vectors, shifts up to 1e6: worst |sum-1| " +
       fmt(worst_sum) + ", worst shift deviation " + fmt(worst_shift) +
       " (need <= 1e-12)");

  const bool pass =
      worst_grad < 1e-4 && worst_sum <= 1e-12 && worst_shift <= 1e-12;
  std::ostringstream os;
  os << "gradients " << fmt(worst_grad) << ", weight sum " << fmt(worst_sum)
     << ", shift invariance " << fmt(worst_shift);
  return {pass, os.str()};
}

// ---------------------------------------------------------------------------
// 7. Transferring the trained error function to the moved-goal grid: the
//    thresholded check runs the conservative kind; greedy and replay are
//    reported alongside.

struct TransferOutcome {
  bool ok = false;
  int wins = 0;
  int seeds = 0;
  std::string detail;
};

TransferOutcome run_transfer(ReferenceKind kind,
                             const std::vector<std::uint64_t>& target_seeds,
                             const fs::path& dir) {
  ExperimentConfig source =
      base_config(ModelKind::ThreeRoom, Algorithm::AdaMve, "");
  source.agent.reference = kind;
  source.seeds = {1};

  ExperimentConfig target = source;
  target.env = "fourroom2";
  target.seeds = target_seeds;
  target.out_dir = dir.string();

  const TransferSummary summary = transfer_experiment(source, target);
  TransferOutcome out;
  out.seeds = static_cast<int>(target_seeds.size());
  std::vector<RunRecord> transferred, scratch;
  for (const SeedOutcome& s : summary.transferred.seeds) {
    if (!s.ok) return out;
    transferred.push_back(s.record);
  }
  for (const SeedOutcome& s : summary.scratch.seeds) {
    if (!s.ok) return out;
    scratch.push_back(s.record);
  }

  const double own_level = 0.9 * aggregate_final(transferred);
  const double scratch_level = 0.9 * aggregate_final(scratch);
  const std::int64_t scratch_steps =
      aggregate_crossing(scratch, scratch_level);
  std::string steps;
  out.wins = count_faster(transferred, own_level, scratch_steps, &steps);
  out.ok = scratch_steps > 0;
  out.detail = "transferred seeds cross " + fmt(own_level) + " at " + steps +
               "; from-scratch aggregate needs " +
               std::to_string(scratch_steps) + " steps";
  return out;
}

Verdict criterion7() {
  const fs::path dir = fs::path(kOutRoot) / "c7";

  const TransferOutcome conservative =
      run_transfer(ReferenceKind::Conservative, {1, 2, 3, 4, 5},
                   dir / "conservative");
  if (!conservative.ok) return {false, "conservative transfer run failed"};
  note("conservative: " + conservative.detail + " -> " +
       std::to_string(conservative.wins) + "/5 strictly faster");

  // Reported without a threshold; two seeds keep the runtime in bounds.
  for (ReferenceKind kind : {ReferenceKind::Greedy, ReferenceKind::Replay}) {
    const TransferOutcome out = run_transfer(
        kind, {1, 2}, dir / reference_kind_name(kind));
    if (out.ok) {
      note(std::string(reference_kind_name(kind)) + " (no threshold): " +
           out.detail + " -> " + std::to_string(out.wins) + "/" +
           std::to_string(out.seeds) + " faster");
    } else {
      note(std::string(reference_kind_name(kind)) +
           " (no threshold): run failed");
    }
  }

  const bool pass = conservative.wins >= 4;
  std::ostringstream os;
  os << "conservative transfer faster than from-scratch in "
     << conservative.wins << "/5 seeds";
  return {pass, os.str()};
}

// ---------------------------------------------------------------------------
// 8. A (config, seed) pair reruns to byte-identical files.

std::string file_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

Verdict criterion8() {
  const fs::path dir = fs::path(kOutRoot) / "c8";
  ExperimentConfig cfg =
      base_config(ModelKind::ThreeRoom, Algorithm::AdaMve,
                  (dir / "a").string());
  cfg.seeds = {7};
  cfg.total_steps = 20000;

  ExperimentConfig again = cfg;
  again.out_dir = (dir / "b").string();
  if (run_experiment(cfg).failures > 0 ||
      run_experiment(again).failures > 0) {
    return {false, "a training run failed"};
  }

  bool pass = true;
  for (const char* name :
       {"config.txt", "learning_curve_seed7.csv", "aggregate.csv",
        "q_seed7.ckpt", "errors_seed7.ckpt"}) {
    const bool same =
        file_bytes(dir / "a" / name) == file_bytes(dir / "b" / name);
    note(std::string(name) + ": " + (same ? "identical" : "DIFFERS"));
    pass = pass && same;
  }
  return {pass, pass ? "all five output files byte-identical"
                     : "rerun produced different bytes"};
}

}  // namespace
}  // namespace adamve

int main(int argc, char** argv) {
  using adamve::Verdict;
  struct Entry {
    int number;
    Verdict (*run)();
  };
  const Entry entries[] = {
      {1, adamve::criterion1}, {2, adamve::criterion2},
      {3, adamve::criterion3}, {4, adamve::criterion4},
      {5, adamve::criterion5}, {6, adamve::criterion6},
      {7, adamve::criterion7}, {8, adamve::criterion8},
  };

  std::vector<int> wanted;
  for (int i = 1; i < argc; ++i) {
    try {
      wanted.push_back(std::stoi(argv[i]));
    } catch (const std::exception&) {
      std::cerr << "error: criterion numbers expected, got '" << argv[i]
                << "'\n";
      return 2;
    }
  }

  int failed = 0;
  int ran = 0;
  for (const Entry& entry : entries) {
    if (!wanted.empty() &&
        std::find(wanted.begin(), wanted.end(), entry.number) ==
            wanted.end()) {
      continue;
    }
    ++ran;
    Verdict verdict;
    try {
      verdict = entry.run();
    } catch (const std::exception& e) {
      verdict = {false, std::string("exception: ") + e.what()};
    }
    std::cout << "criterion " << entry.number << ": "
              << (verdict.pass ? "PASS" : "FAIL") << " - " << verdict.summary
              << '\n';
    if (!verdict.pass) ++failed;
  }
  if (ran == 0) {
    std::cerr << "error: no matching criteria\n";
    return 2;
  }
  return failed == 0 ? 0 : 1;
}
