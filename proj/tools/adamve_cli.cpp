#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "adamve/harness.hpp"

namespace {

using namespace adamve;

void apply_overrides(ExperimentConfig& cfg,
                     const std::vector<std::string>& sets) {
  for (const std::string& kv : sets) {
    const std::size_t eq = kv.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("--set expects key=value, got '" + kv +
                                  "'");
    }
    const std::string_view view(kv);
    apply_config_key(cfg, detail::trim(view.substr(0, eq)),
                     detail::trim(view.substr(eq + 1)));
  }
}

ExperimentConfig load_experiment(const std::string& config_path,
                                 const std::vector<std::string>& sets,
                                 const std::string& out_dir) {
  ExperimentConfig cfg;
  if (!config_path.empty()) cfg = load_config_file(config_path);
  apply_overrides(cfg, sets);
  if (!out_dir.empty()) cfg.out_dir = out_dir;
  validate_experiment(cfg);
  return cfg;
}

std::string join_doubles(const std::vector<double>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i > 0) out += ',';
    out += format_double(values[i]);
  }
  return out;
}

int print_run(const std::string& label, const RunSummary& summary,
              const std::string& out_dir) {
  for (const SeedOutcome& out : summary.seeds) {
    std::cout << label << "seed " << out.seed << ": ";
    if (!out.ok) {
      std::cout << "FAILED: " << out.error << '\n';
    } else if (out.record.rows.empty()) {
      std::cout << "ok, no evaluations (total_steps < eval_every)\n";
    } else {
      const EvalRow& last = out.record.rows.back();
      std::cout << "final mean return "
                << format_double(last.mean_return) << " after " << last.step
                << " steps\n";
    }
  }
  if (summary.failures < static_cast<int>(summary.seeds.size())) {
    std::cout << label << "wrote " << out_dir << "/aggregate.csv\n";
  }
  return summary.failures;
}

int cmd_train(const std::string& config_path,
              const std::vector<std::string>& sets,
              const std::string& out_dir) {
  const ExperimentConfig cfg = load_experiment(config_path, sets, out_dir);
  const RunSummary summary = run_experiment(cfg);
  print_run("", summary, cfg.out_dir);
  if (summary.failures > 0) {
    std::cerr << "error: " << summary.failures << " seed run(s) failed\n";
    return 1;
  }
  return 0;
}

int cmd_eval(const std::string& q_path, const std::string& env, int episodes,
             std::uint64_t seed) {
  const GridSpec spec = make_grid_spec(env);
  const Approximator q = load_q_checkpoint(q_path);
  if (q.kind() == Approximator::Kind::Tabular &&
      q.num_params() != static_cast<std::size_t>(spec.num_cells()) *
                            kNumActions) {
    throw std::invalid_argument(
        "eval: checkpoint table does not match the grid size");
  }
  Rng rng = Rng::stream(seed, "eval");
  const EvalResult result = evaluate_greedy(spec, q, episodes, rng);
  std::cout << "mean_return = " << format_double(result.mean_return) << '\n';
  std::cout << "returns = " << join_doubles(result.returns) << '\n';
  return 0;
}

int cmd_heatmap(const std::string& errors_path, const std::string& env,
                double tau, const std::string& out_csv,
                const std::string& pgm_path, const std::string& q_path,
                double vmax) {
  const GridSpec spec = make_grid_spec(env);
  const ErrorFunction errfn = load_error_checkpoint(errors_path);
  std::optional<Approximator> qbar;
  if (!q_path.empty()) qbar = load_q_checkpoint(q_path);
  const std::vector<double> values =
      horizon_heatmap(spec, errfn, tau, qbar ? &*qbar : nullptr);

  std::ofstream csv(out_csv);
  if (!csv) throw std::runtime_error("cannot write " + out_csv);
  write_heatmap_csv(csv, spec, values);
  std::cout << "wrote " << out_csv << '\n';

  if (!pgm_path.empty()) {
    std::ofstream pgm(pgm_path);
    if (!pgm) throw std::runtime_error("cannot write " + pgm_path);
    write_heatmap_pgm(pgm, spec, values,
                      vmax > 0.0 ? vmax : errfn.h_max() / 2.0);
    std::cout << "wrote " << pgm_path << '\n';
  }
  return 0;
}

int cmd_transfer(const std::string& source_path,
                 const std::string& target_path,
                 const std::vector<std::string>& set_source,
                 const std::vector<std::string>& set_target,
                 const std::string& out_dir, bool finetune) {
  const ExperimentConfig source =
      load_experiment(source_path, set_source, "");
  ExperimentConfig target = load_experiment(target_path, set_target, out_dir);
  if (finetune) target.finetune = true;

  const TransferSummary summary = transfer_experiment(source, target);
  int failures = 0;
  failures += print_run("source ", summary.source,
                        target.out_dir + "/source");
  failures += print_run("transferred ", summary.transferred,
                        target.out_dir + "/transferred");
  failures += print_run("scratch ", summary.scratch,
                        target.out_dir + "/scratch");
  failures += print_run("baseline ", summary.baseline,
                        target.out_dir + "/baseline");
  std::cout << "errors checkpoint: " << summary.errors_checkpoint << '\n';
  if (failures > 0) {
    std::cerr << "error: " << failures
              << " seed run(s) failed across transfer arms\n";
    return 1;
  }
  return 0;
}

int cmd_dp_check(const DpCheckConfig& cfg) {
  const DpCheckResult result = run_dp_check(cfg);
  std::cout << "k_hat = " << format_double(result.report.k_hat) << '\n';
  std::cout << "zero_error_cells = " << result.zero_error_cells << '\n';
  std::cout << "max_value_gap_on_zero_error_cells = "
            << format_double(result.max_lhs_on_zero) << '\n';
  std::cout << "violations = " << result.report.violations.size() << '\n';
  if (result.ran_td) {
    std::cout << "td_max_abs_err = " << format_double(result.td_max_abs_err)
              << " (max dp value " << format_double(result.td_max_dp_value)
              << ")\n";
  }
  std::cout << "wrote " << cfg.out_dir << "/bound_report.txt\n";
  if (result.max_lhs_on_zero > 1e-12) {
    std::cerr << "error: zero-error cells show a value gap up to "
              << format_double(result.max_lhs_on_zero) << '\n';
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"FourRoom gridworld experiments with adaptive-horizon value "
               "expansion"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> sets;
  std::string out_dir;
  CLI::App* train = app.add_subcommand(
      "train", "run a seeded experiment from a key = value config");
  train->add_option("--config", config_path, "experiment config file")
      ->check(CLI::ExistingFile);
  train->add_option("--set", sets, "override a config key (key=value)");
  train->add_option("--out", out_dir, "output directory");

  std::string eval_q, eval_env = "fourroom";
  int eval_episodes = 10;
  std::uint64_t eval_seed = 1;
  CLI::App* eval = app.add_subcommand(
      "eval", "run greedy evaluation episodes from a Q checkpoint");
  eval->add_option("--q", eval_q, "Q checkpoint")
      ->required()
      ->check(CLI::ExistingFile);
  eval->add_option("--env", eval_env, "fourroom, fourroom2, or layout file")
      ->capture_default_str();
  eval->add_option("--episodes", eval_episodes, "evaluation episodes")
      ->capture_default_str();
  eval->add_option("--seed", eval_seed, "evaluation rng seed")
      ->capture_default_str();

  std::string hm_errors, hm_env = "fourroom", hm_out = "heatmap.csv";
  std::string hm_pgm, hm_q;
  double hm_tau = 0.01;
  double hm_vmax = 0.0;
  CLI::App* heatmap = app.add_subcommand(
      "heatmap", "export the average planning horizon per cell");
  heatmap->add_option("--errors", hm_errors, "error-function checkpoint")
      ->required()
      ->check(CLI::ExistingFile);
  heatmap->add_option("--env", hm_env, "fourroom, fourroom2, or layout file")
      ->capture_default_str();
  heatmap->add_option("--tau", hm_tau, "softmax temperature")
      ->capture_default_str();
  heatmap->add_option("--out", hm_out, "output CSV path")
      ->capture_default_str();
  heatmap->add_option("--pgm", hm_pgm, "also write a portable graymap here");
  heatmap->add_option("--q", hm_q,
                      "target-Q checkpoint (greedy-kind errors only)")
      ->check(CLI::ExistingFile);
  heatmap->add_option("--vmax", hm_vmax,
                      "graymap saturation value (default h_max/2)");

  std::string tr_source, tr_target, tr_out;
  std::vector<std::string> tr_set_source, tr_set_target;
  bool tr_finetune = false;
  CLI::App* transfer = app.add_subcommand(
      "transfer",
      "train errors on a source grid, reuse them on a target grid");
  transfer->add_option("--source", tr_source, "source experiment config")
      ->required()
      ->check(CLI::ExistingFile);
  transfer->add_option("--target", tr_target, "target experiment config")
      ->required()
      ->check(CLI::ExistingFile);
  transfer->add_option("--set-source", tr_set_source,
                       "override a source config key (key=value)");
  transfer->add_option("--set-target", tr_set_target,
                       "override a target config key (key=value)");
  transfer->add_option("--out", tr_out, "output directory");
  transfer->add_flag("--finetune", tr_finetune,
                     "keep training the transferred errors");

  DpCheckConfig dp;
  dp.h_max = 5;
  std::string dp_model = "nowall";
  bool dp_no_td = false;
  CLI::App* dp_check = app.add_subcommand(
      "dp-check",
      "exact error tables, the value-error bound report, and a TD check");
  dp_check->add_option("--env", dp.env, "fourroom, fourroom2, or layout file")
      ->capture_default_str();
  dp_check->add_option("--model", dp_model, "oracle, threeroom, or nowall")
      ->capture_default_str();
  dp_check->add_option("--policy", dp.policy, "uniform or always-<action>")
      ->capture_default_str();
  dp_check->add_option("--h-max", dp.h_max, "horizon cap")
      ->capture_default_str();
  dp_check->add_option("--gamma", dp.gamma, "discount")
      ->capture_default_str();
  dp_check->add_option("--out", dp.out_dir, "output directory")
      ->capture_default_str();
  dp_check->add_flag("--no-td", dp_no_td, "skip the TD-vs-DP comparison");
  dp_check->add_option("--td-steps", dp.td_buffer_steps,
                       "uniform-policy transitions to collect")
      ->capture_default_str();
  dp_check->add_option("--td-updates", dp.td_updates, "TD updates")
      ->capture_default_str();
  dp_check->add_option("--td-batch", dp.td_batch, "TD batch size")
      ->capture_default_str();
  dp_check->add_option("--td-polyak", dp.td_polyak, "target mix per update")
      ->capture_default_str();
  dp_check->add_option("--td-lr", dp.td_lr, "TD step size")
      ->capture_default_str();
  dp_check->add_option("--seed", dp.seed, "rng seed for the TD leg")
      ->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) return cmd_train(config_path, sets, out_dir);
    if (eval->parsed()) {
      return cmd_eval(eval_q, eval_env, eval_episodes, eval_seed);
    }
    if (heatmap->parsed()) {
      return cmd_heatmap(hm_errors, hm_env, hm_tau, hm_out, hm_pgm, hm_q,
                         hm_vmax);
    }
    if (transfer->parsed()) {
      return cmd_transfer(tr_source, tr_target, tr_set_source, tr_set_target,
                          tr_out, tr_finetune);
    }
    if (dp_check->parsed()) {
      dp.model = parse_model_kind(dp_model);
      dp.with_td = !dp_no_td;
      return cmd_dp_check(dp);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
