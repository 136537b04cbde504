#pragma once

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include "adamve/agent.hpp"
#include "adamve/dp_oracle.hpp"

namespace adamve {

// Shortest decimal string that parses back to exactly the same double;
// keeps config echoes readable and result files reproducible bit-for-bit.
inline std::string format_double(double v) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) {
    s.remove_prefix(1);
  }
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' ||
                        s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

inline bool parse_bool(std::string_view v, std::string_view key) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw std::invalid_argument("config: " + std::string(key) +
                              " expects true/false, got '" + std::string(v) +
                              "'");
}

inline double parse_double(std::string_view v, std::string_view key) {
  double out = 0.0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc{} || res.ptr != v.data() + v.size()) {
    throw std::invalid_argument("config: " + std::string(key) +
                                " expects a number, got '" + std::string(v) +
                                "'");
  }
  return out;
}

template <typename Int>
Int parse_int(std::string_view v, std::string_view key) {
  Int out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc{} || res.ptr != v.data() + v.size()) {
    throw std::invalid_argument("config: " + std::string(key) +
                                " expects an integer, got '" +
                                std::string(v) + "'");
  }
  return out;
}

template <typename Int>
std::vector<Int> parse_int_list(std::string_view v, std::string_view key) {
  std::vector<Int> out;
  std::size_t start = 0;
  while (start <= v.size()) {
    std::size_t comma = v.find(',', start);
    if (comma == std::string_view::npos) comma = v.size();
    const std::string_view item = trim(v.substr(start, comma - start));
    if (!item.empty()) out.push_back(parse_int<Int>(item, key));
    start = comma + 1;
  }
  return out;
}

template <typename T>
std::string join(const std::vector<T>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i > 0) out += ',';
    out += std::to_string(items[i]);
  }
  return out;
}

}  // namespace detail

// One experiment: an environment, a dynamics model, an agent configuration,
// and the evaluation protocol, run once per seed.
struct ExperimentConfig {
  std::string env = "fourroom";  // fourroom, fourroom2, or a layout file
  ModelKind model = ModelKind::Oracle;
  AgentConfig agent;
  std::vector<int> model_hidden = {200, 200, 200};  // learned-model layers
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  std::int64_t total_steps = 200000;
  std::int64_t eval_every = 2000;
  int eval_episodes = 10;
  int workers = 1;  // seeds run concurrently up to this count
  std::string out_dir = "out";
  std::string pretrained_errors;  // checkpoint installed before training
  bool finetune = false;          // keep training the installed errors
};

// Applies one key = value pair; config files and command-line overrides go
// through the same switch so they cannot drift apart.
inline void apply_config_key(ExperimentConfig& cfg, std::string_view key,
                             std::string_view value) {
  using detail::parse_bool;
  using detail::parse_double;
  using detail::parse_int;
  using detail::parse_int_list;
  if (key == "env") {
    cfg.env = std::string(value);
  } else if (key == "model") {
    cfg.model = parse_model_kind(value);
  } else if (key == "algorithm") {
    cfg.agent.algorithm = parse_algorithm(value);
  } else if (key == "reference") {
    cfg.agent.reference = parse_reference_kind(value);
  } else if (key == "representation") {
    if (value == "tabular") {
      cfg.agent.tabular = true;
    } else if (value == "mlp") {
      cfg.agent.tabular = false;
    } else {
      throw std::invalid_argument(
          "config: representation expects tabular or mlp, got '" +
          std::string(value) + "'");
    }
  } else if (key == "hidden") {
    cfg.agent.hidden = parse_int_list<int>(value, key);
  } else if (key == "gamma") {
    cfg.agent.gamma = parse_double(value, key);
  } else if (key == "eps") {
    cfg.agent.eps = parse_double(value, key);
  } else if (key == "tau") {
    cfg.agent.tau = parse_double(value, key);
  } else if (key == "h_max") {
    cfg.agent.h_max = parse_int<int>(value, key);
  } else if (key == "mve_h") {
    cfg.agent.mve_h = parse_int<int>(value, key);
  } else if (key == "batch") {
    cfg.agent.batch = parse_int<int>(value, key);
  } else if (key == "q_lr") {
    cfg.agent.q_lr = parse_double(value, key);
  } else if (key == "err_lr") {
    cfg.agent.err_lr = parse_double(value, key);
  } else if (key == "model_lr") {
    cfg.agent.model_lr = parse_double(value, key);
  } else if (key == "buffer_capacity") {
    cfg.agent.buffer_capacity = parse_int<std::size_t>(value, key);
  } else if (key == "warmup") {
    cfg.agent.warmup = parse_int<std::size_t>(value, key);
  } else if (key == "polyak") {
    cfg.agent.polyak_mix = parse_double(value, key);
  } else if (key == "fit_model") {
    cfg.agent.fit_model = parse_bool(value, key);
  } else if (key == "sml") {
    cfg.agent.sml = parse_bool(value, key);
  } else if (key == "h_sml") {
    cfg.agent.h_sml = parse_int<int>(value, key);
  } else if (key == "sml_percent") {
    cfg.agent.sml_percent = parse_double(value, key);
  } else if (key == "model_hidden") {
    cfg.model_hidden = parse_int_list<int>(value, key);
  } else if (key == "seeds") {
    cfg.seeds = parse_int_list<std::uint64_t>(value, key);
  } else if (key == "total_steps") {
    cfg.total_steps = parse_int<std::int64_t>(value, key);
  } else if (key == "eval_every") {
    cfg.eval_every = parse_int<std::int64_t>(value, key);
  } else if (key == "eval_episodes") {
    cfg.eval_episodes = parse_int<int>(value, key);
  } else if (key == "workers") {
    cfg.workers = parse_int<int>(value, key);
  } else if (key == "out_dir") {
    cfg.out_dir = std::string(value);
  } else if (key == "pretrained_errors") {
    cfg.pretrained_errors = std::string(value);
  } else if (key == "finetune") {
    cfg.finetune = parse_bool(value, key);
  } else {
    throw std::invalid_argument("config: unknown key '" + std::string(key) +
                                "'");
  }
}

// Flat key = value text; '#' starts a comment, blank lines are skipped.
inline ExperimentConfig parse_config_text(std::string_view text) {
  ExperimentConfig cfg;
  std::size_t pos = 0;
  int lineno = 0;
  while (pos <= text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string_view::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw std::invalid_argument("config: line " + std::to_string(lineno) +
                                  " has no '='");
    }
    const std::string_view key = detail::trim(line.substr(0, eq));
    const std::string_view value = detail::trim(line.substr(eq + 1));
    if (key.empty()) {
      throw std::invalid_argument("config: line " + std::to_string(lineno) +
                                  " has an empty key");
    }
    apply_config_key(cfg, key, value);
  }
  return cfg;
}

inline ExperimentConfig load_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open config file: " + path.string());
  }
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config_text(text.str());
}

// Canonical echo of every key except out_dir, so the same experiment run
// into two directories leaves byte-identical files in both.
inline std::string serialize_config(const ExperimentConfig& cfg) {
  std::string out;
  const auto put = [&](std::string_view key, const std::string& value) {
    out += key;
    out += " = ";
    out += value;
    out += '\n';
  };
  put("env", cfg.env);
  put("model", std::string(model_kind_name(cfg.model)));
  put("algorithm", std::string(algorithm_name(cfg.agent.algorithm)));
  put("reference", std::string(reference_kind_name(cfg.agent.reference)));
  put("representation", cfg.agent.tabular ? "tabular" : "mlp");
  put("hidden", detail::join(cfg.agent.hidden));
  put("gamma", format_double(cfg.agent.gamma));
  put("eps", format_double(cfg.agent.eps));
  put("tau", format_double(cfg.agent.tau));
  put("h_max", std::to_string(cfg.agent.h_max));
  put("mve_h", std::to_string(cfg.agent.mve_h));
  put("batch", std::to_string(cfg.agent.batch));
  put("q_lr", format_double(cfg.agent.q_lr));
  put("err_lr", format_double(cfg.agent.err_lr));
  put("model_lr", format_double(cfg.agent.model_lr));
  put("buffer_capacity", std::to_string(cfg.agent.buffer_capacity));
  put("warmup", std::to_string(cfg.agent.warmup));
  put("polyak", format_double(cfg.agent.polyak_mix));
  put("fit_model", cfg.agent.fit_model ? "true" : "false");
  put("sml", cfg.agent.sml ? "true" : "false");
  put("h_sml", std::to_string(cfg.agent.h_sml));
  put("sml_percent", format_double(cfg.agent.sml_percent));
  put("model_hidden", detail::join(cfg.model_hidden));
  put("seeds", detail::join(cfg.seeds));
  put("total_steps", std::to_string(cfg.total_steps));
  put("eval_every", std::to_string(cfg.eval_every));
  put("eval_episodes", std::to_string(cfg.eval_episodes));
  put("workers", std::to_string(cfg.workers));
  put("pretrained_errors", cfg.pretrained_errors);
  put("finetune", cfg.finetune ? "true" : "false");
  return out;
}

// fourroom / fourroom2 by name; anything else is read as a layout file.
inline GridSpec make_grid_spec(const std::string& env) {
  if (env == "fourroom") return GridSpec::four_room();
  if (env == "fourroom2") return GridSpec::four_room2();
  std::ifstream in(env);
  if (!in) {
    throw std::runtime_error("cannot open layout file: " + env);
  }
  std::ostringstream text;
  text << in.rdbuf();
  return GridSpec::from_layout(text.str());
}

inline DynamicsModel make_model(const GridSpec& spec, ModelKind kind,
                                const std::vector<int>& hidden,
                                std::uint64_t seed) {
  switch (kind) {
    case ModelKind::Oracle: return DynamicsModel::oracle(spec);
    case ModelKind::ThreeRoom: return DynamicsModel::three_room(spec);
    case ModelKind::NoWall: return DynamicsModel::no_wall(spec);
    case ModelKind::Learned: {
      Rng init = Rng::stream(seed, "model-init");
      return DynamicsModel::learned(spec, hidden, init);
    }
  }
  throw std::logic_error("model: bad kind enum value");
}

inline void validate_experiment(const ExperimentConfig& cfg) {
  if (cfg.seeds.empty()) {
    throw std::invalid_argument("config: seeds must not be empty");
  }
  std::vector<std::uint64_t> sorted = cfg.seeds;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw std::invalid_argument("config: seeds must be distinct");
  }
  if (cfg.total_steps < 1) {
    throw std::invalid_argument("config: total_steps must be positive");
  }
  if (cfg.eval_every < 1) {
    throw std::invalid_argument("config: eval_every must be positive");
  }
  if (cfg.eval_episodes < 1) {
    throw std::invalid_argument("config: eval_episodes must be positive");
  }
  if (cfg.workers < 1) {
    throw std::invalid_argument("config: workers must be positive");
  }
}

// ---------------------------------------------------------------------------
// Run records and result files

struct EvalRow {
  std::int64_t step = 0;
  double mean_return = 0.0;
  std::vector<double> returns;   // one entry per evaluation episode
  std::vector<double> mean_err;  // mean online error per horizon, open cells
  double mean_depth = 0.0;       // mean weighted-average horizon, open cells
};

struct RunRecord {
  std::uint64_t seed = 0;
  std::vector<EvalRow> rows;
};

// step, mean return, per-episode returns; runs that learn an error function
// also log the per-horizon mean error and the mean expansion depth.
inline void write_learning_curve_csv(std::ostream& os, const RunRecord& rec,
                                     int eval_episodes, int err_h_max) {
  os << "step,mean_return";
  for (int e = 1; e <= eval_episodes; ++e) os << ",return_" << e;
  if (err_h_max >= 0) {
    for (int h = 0; h <= err_h_max; ++h) os << ",err_h" << h;
    os << ",mean_depth";
  }
  os << '\n';
  for (const EvalRow& row : rec.rows) {
    os << row.step << ',' << format_double(row.mean_return);
    for (double r : row.returns) os << ',' << format_double(r);
    if (err_h_max >= 0) {
      for (double e : row.mean_err) os << ',' << format_double(e);
      os << ',' << format_double(row.mean_depth);
    }
    os << '\n';
  }
}

// Per evaluation step: mean of the per-seed mean returns and the standard
// error of that mean (sample standard deviation over sqrt(n); 0 for n = 1).
inline void write_aggregate_csv(std::ostream& os,
                                const std::vector<RunRecord>& records) {
  if (records.empty()) {
    throw std::invalid_argument("aggregate: no run records");
  }
  const std::size_t rows = records.front().rows.size();
  for (const RunRecord& rec : records) {
    if (rec.rows.size() != rows) {
      throw std::invalid_argument("aggregate: seed row counts differ");
    }
  }
  os << "step,mean_return,stderr\n";
  const double n = static_cast<double>(records.size());
  for (std::size_t i = 0; i < rows; ++i) {
    const std::int64_t step = records.front().rows[i].step;
    double mean = 0.0;
    for (const RunRecord& rec : records) {
      if (rec.rows[i].step != step) {
        throw std::invalid_argument("aggregate: seed steps differ");
      }
      mean += rec.rows[i].mean_return;
    }
    mean /= n;
    double var = 0.0;
    for (const RunRecord& rec : records) {
      const double d = rec.rows[i].mean_return - mean;
      var += d * d;
    }
    const double stderr_ =
        records.size() > 1 ? std::sqrt(var / (n - 1.0)) / std::sqrt(n) : 0.0;
    os << step << ',' << format_double(mean) << ',' << format_double(stderr_)
       << '\n';
  }
}

// ---------------------------------------------------------------------------
// Checkpoints

inline void save_error_checkpoint(const std::filesystem::path& path,
                                  const ErrorFunction& errfn) {
  std::ofstream os(path, std::ios::binary);
  if (!os) {
    throw std::runtime_error("cannot write checkpoint: " + path.string());
  }
  errfn.save(os, {{"role", "errors"}});
}

inline ErrorFunction load_error_checkpoint(
    const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) {
    throw std::runtime_error("cannot open checkpoint: " + path.string());
  }
  return ErrorFunction::load(is);
}

inline void save_q_checkpoint(const std::filesystem::path& path,
                              const Approximator& q) {
  std::ofstream os(path, std::ios::binary);
  if (!os) {
    throw std::runtime_error("cannot write checkpoint: " + path.string());
  }
  ApproximatorIo::save(os, q, {{"role", "q"}});
}

inline Approximator load_q_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) {
    throw std::runtime_error("cannot open checkpoint: " + path.string());
  }
  return ApproximatorIo::load(is).approx;
}

// ---------------------------------------------------------------------------
// Experiment execution

struct SeedOutcome {
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  RunRecord record;
};

struct RunSummary {
  std::vector<SeedOutcome> seeds;
  int failures = 0;
};

inline RunRecord run_single_seed(const ExperimentConfig& cfg,
                                 const GridSpec& spec, std::uint64_t seed,
                                 const std::filesystem::path& dir) {
  Agent agent(spec, make_model(spec, cfg.model, cfg.model_hidden, seed),
              cfg.agent, seed);
  if (!cfg.pretrained_errors.empty()) {
    agent.install_error_function(load_error_checkpoint(cfg.pretrained_errors),
                                 !cfg.finetune);
  }
  RunRecord rec;
  rec.seed = seed;
  for (std::int64_t t = 1; t <= cfg.total_steps; ++t) {
    agent.train_step();
    if (t % cfg.eval_every != 0) continue;
    EvalRow row;
    row.step = t;
    EvalResult res = agent.evaluate(
        cfg.eval_episodes, static_cast<std::uint64_t>(t / cfg.eval_every));
    row.mean_return = res.mean_return;
    row.returns = std::move(res.returns);
    if (agent.has_error_function()) {
      const int h_max = cfg.agent.h_max;
      row.mean_err.assign(static_cast<std::size_t>(h_max) + 1, 0.0);
      const auto& open = spec.open_cells();
      for (const GridState& s : open) {
        const std::vector<double> errs = agent.state_errors(s);
        for (int h = 0; h <= h_max; ++h) {
          row.mean_err[static_cast<std::size_t>(h)] +=
              errs[static_cast<std::size_t>(h)];
        }
        row.mean_depth += agent.expected_horizon(s);
      }
      const double count = static_cast<double>(open.size());
      for (double& e : row.mean_err) e /= count;
      row.mean_depth /= count;
    }
    rec.rows.push_back(std::move(row));
  }

  const std::string tag = "_seed" + std::to_string(seed);
  {
    std::ofstream os(dir / ("learning_curve" + tag + ".csv"));
    if (!os) throw std::runtime_error("cannot write learning curve CSV");
    write_learning_curve_csv(os, rec, cfg.eval_episodes,
                             agent.has_error_function() ? cfg.agent.h_max
                                                        : -1);
  }
  save_q_checkpoint(dir / ("q" + tag + ".ckpt"), agent.q());
  if (agent.has_error_function()) {
    save_error_checkpoint(dir / ("errors" + tag + ".ckpt"),
                          agent.error_function());
  }
  return rec;
}

// One run per seed, concurrently up to cfg.workers. A failing seed records
// its diagnostic and the rest proceed; the aggregate covers the seeds that
// finished.
inline RunSummary run_experiment(const ExperimentConfig& cfg) {
  validate_experiment(cfg);
  const GridSpec spec = make_grid_spec(cfg.env);
  const std::filesystem::path dir(cfg.out_dir);
  std::filesystem::create_directories(dir);
  {
    std::ofstream os(dir / "config.txt");
    if (!os) throw std::runtime_error("cannot write config echo");
    os << serialize_config(cfg);
  }

  RunSummary summary;
  summary.seeds.resize(cfg.seeds.size());
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t i = next.fetch_add(1); i < cfg.seeds.size();
         i = next.fetch_add(1)) {
      SeedOutcome& out = summary.seeds[i];
      out.seed = cfg.seeds[i];
      try {
        out.record = run_single_seed(cfg, spec, cfg.seeds[i], dir);
        out.ok = true;
      } catch (const std::exception& e) {
        out.error = e.what();
      }
    }
  };
  const std::size_t nworkers = std::min<std::size_t>(
      static_cast<std::size_t>(cfg.workers), cfg.seeds.size());
  if (nworkers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(nworkers);
    for (std::size_t i = 0; i < nworkers; ++i) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }

  std::vector<RunRecord> finished;
  for (const SeedOutcome& out : summary.seeds) {
    if (out.ok) {
      finished.push_back(out.record);
    } else {
      ++summary.failures;
    }
  }
  if (!finished.empty()) {
    std::ofstream os(dir / "aggregate.csv");
    if (!os) throw std::runtime_error("cannot write aggregate CSV");
    write_aggregate_csv(os, finished);
  }
  return summary;
}

// ---------------------------------------------------------------------------
// Horizon heatmaps

// Weighted-average expansion depth per cell; walls hold NaN. Greedy-kind
// error functions need the target Q they follow.
inline std::vector<double> horizon_heatmap(const GridSpec& spec,
                                           const ErrorFunction& errfn,
                                           double tau,
                                           const Approximator* qbar = nullptr) {
  std::vector<double> out(static_cast<std::size_t>(spec.num_cells()),
                          std::numeric_limits<double>::quiet_NaN());
  std::vector<double> errs(static_cast<std::size_t>(errfn.h_max()) + 1);
  for (const GridState& s : spec.open_cells()) {
    for (int h = 0; h <= errfn.h_max(); ++h) {
      errs[static_cast<std::size_t>(h)] = errfn.eval_state_error(s, h, qbar);
    }
    out[static_cast<std::size_t>(spec.cell_index(s))] =
        weighted_avg_horizon(horizon_weights(errs, tau));
  }
  return out;
}

// x,y,value rows for open cells; wall cells are omitted.
inline void write_heatmap_csv(std::ostream& os, const GridSpec& spec,
                              std::span<const double> values) {
  if (values.size() != static_cast<std::size_t>(spec.num_cells())) {
    throw std::invalid_argument("heatmap: value count does not match grid");
  }
  os << "x,y,value\n";
  for (int y = 0; y < spec.height(); ++y) {
    for (int x = 0; x < spec.width(); ++x) {
      const double v =
          values[static_cast<std::size_t>(spec.cell_index({x, y}))];
      if (!std::isfinite(v)) continue;
      os << x << ',' << y << ',' << format_double(v) << '\n';
    }
  }
}

// Plain-text portable graymap for quick viewing: walls are black, values
// map linearly onto [1, 255] over [0, vmax]. Top image row is the top of
// the grid, matching the layout text.
inline void write_heatmap_pgm(std::ostream& os, const GridSpec& spec,
                              std::span<const double> values, double vmax) {
  if (values.size() != static_cast<std::size_t>(spec.num_cells())) {
    throw std::invalid_argument("heatmap: value count does not match grid");
  }
  if (!(vmax > 0.0)) {
    throw std::invalid_argument("heatmap: vmax must be positive");
  }
  os << "P2\n" << spec.width() << ' ' << spec.height() << "\n255\n";
  for (int y = spec.height() - 1; y >= 0; --y) {
    for (int x = 0; x < spec.width(); ++x) {
      const double v =
          values[static_cast<std::size_t>(spec.cell_index({x, y}))];
      int level = 0;
      if (std::isfinite(v)) {
        const double unit = std::clamp(v / vmax, 0.0, 1.0);
        level = 1 + static_cast<int>(std::lround(unit * 254.0));
      }
      os << level << (x + 1 == spec.width() ? '\n' : ' ');
    }
  }
}

// ---------------------------------------------------------------------------
// Transfer

inline bool same_walls(const GridSpec& a, const GridSpec& b) {
  if (a.width() != b.width() || a.height() != b.height()) return false;
  for (int y = 0; y < a.height(); ++y) {
    for (int x = 0; x < a.width(); ++x) {
      if (a.wall(x, y) != b.wall(x, y)) return false;
    }
  }
  return true;
}

struct TransferSummary {
  RunSummary source;       // trains the error function
  RunSummary transferred;  // target run with the installed errors
  RunSummary scratch;      // target run learning errors from scratch
  RunSummary baseline;     // target run with plain one-step targets
  std::string errors_checkpoint;
};

// Trains the source experiment, then runs the target three ways: with the
// source's error function installed (frozen unless target.finetune), from
// scratch, and as a one-step baseline. The grids must share their walls;
// only the goal may move. The installed checkpoint is the source's first
// seed.
inline TransferSummary transfer_experiment(ExperimentConfig source,
                                           ExperimentConfig target) {
  validate_experiment(source);
  validate_experiment(target);
  if (source.agent.algorithm != Algorithm::AdaMve ||
      target.agent.algorithm != Algorithm::AdaMve) {
    throw std::invalid_argument(
        "transfer: source and target must use the adaptive algorithm");
  }
  if (!same_walls(make_grid_spec(source.env), make_grid_spec(target.env))) {
    throw std::invalid_argument(
        "transfer: source and target grids have different walls");
  }
  const std::filesystem::path base(target.out_dir);

  TransferSummary summary;
  source.out_dir = (base / "source").string();
  summary.source = run_experiment(source);
  if (!summary.source.seeds.front().ok) {
    throw std::runtime_error("transfer: source run failed: " +
                             summary.source.seeds.front().error);
  }
  summary.errors_checkpoint =
      (std::filesystem::path(source.out_dir) /
       ("errors_seed" + std::to_string(source.seeds.front()) + ".ckpt"))
          .string();

  ExperimentConfig transferred = target;
  transferred.out_dir = (base / "transferred").string();
  transferred.pretrained_errors = summary.errors_checkpoint;
  summary.transferred = run_experiment(transferred);

  ExperimentConfig scratch = target;
  scratch.out_dir = (base / "scratch").string();
  scratch.pretrained_errors.clear();
  summary.scratch = run_experiment(scratch);

  ExperimentConfig baseline = target;
  baseline.out_dir = (base / "baseline").string();
  baseline.pretrained_errors.clear();
  baseline.agent.algorithm = Algorithm::Dqn;
  summary.baseline = run_experiment(baseline);
  return summary;
}

// ---------------------------------------------------------------------------
// DP checks

inline std::vector<Transition> collect_uniform_transitions(
    const GridSpec& spec, std::int64_t steps, std::uint64_t seed) {
  std::vector<Transition> out;
  out.reserve(static_cast<std::size_t>(steps));
  GridEnv env(spec);
  Rng reset_rng = Rng::stream(seed, "uniform-reset");
  Rng act_rng = Rng::stream(seed, "uniform-action");
  GridState s = env.reset(reset_rng);
  for (std::int64_t i = 0; i < steps; ++i) {
    const Action a = kAllActions[act_rng.below(kNumActions)];
    const GridEnv::StepResult r = env.step(a);
    out.push_back({s, a, r.reward, r.next, r.entered_goal});
    s = r.done ? env.reset(reset_rng) : r.next;
  }
  return out;
}

struct TdVsDpResult {
  ValueTable dp;                         // exact, uniform-random policy
  std::vector<std::vector<double>> td;   // [cell][h] learned estimates
  double max_abs_err = 0.0;              // over open cells, h in [1, h_max]
  double max_dp_value = 0.0;
};

// Trains a tabular replay-form error function by TD on a uniform-random
// buffer and compares it against exact policy evaluation of the error MDP.
// Plain-gradient TD: per-cell tables need the classic step rule, not Adam,
// whose unit-scaled steps cannot cover the error magnitudes (up to ~60 with
// a room-sized W) inside the update budget.
inline TdVsDpResult td_vs_dp(const GridSpec& spec, const DynamicsModel& model,
                             int h_max, double gamma,
                             std::int64_t buffer_steps, std::int64_t updates,
                             int batch, double polyak_mix, double td_lr,
                             std::uint64_t seed) {
  const std::vector<Transition> data =
      collect_uniform_transitions(spec, buffer_steps, seed);
  ErrorFunction errfn =
      ErrorFunction::tabular(spec, ReferenceKind::Replay, h_max, gamma);
  Rng batch_rng = Rng::stream(seed, "td-batch");
  std::vector<Transition> scratch(static_cast<std::size_t>(batch));
  for (std::int64_t u = 0; u < updates; ++u) {
    // Full step for the first 60%, then a linear anneal: the iterate
    // equilibrates early and the shrinking step squeezes out the
    // stationary jitter around the fixed point.
    const double frac = static_cast<double>(u) / static_cast<double>(updates);
    const double lr =
        td_lr * (frac < 0.6 ? 1.0 : std::max(0.05, (1.0 - frac) / 0.4));
    errfn.online().set_optimizer({OptimConfig::Kind::PlainGradient, lr});
    for (Transition& t : scratch) t = data[batch_rng.below(data.size())];
    errfn.td_update(scratch, model);
    errfn.polyak(polyak_mix);
  }

  TdVsDpResult result{
      exact_model_error(model, PolicyTable::uniform_random(spec), h_max,
                        gamma),
      {},
      0.0,
      0.0};
  result.td.assign(static_cast<std::size_t>(spec.num_cells()),
                   std::vector<double>(static_cast<std::size_t>(h_max) + 1,
                                       0.0));
  for (const GridState& s : spec.open_cells()) {
    for (int h = 1; h <= h_max; ++h) {
      const double learned = errfn.eval_state_error(s, h);
      const double exact = result.dp.at(s, h);
      result.td[static_cast<std::size_t>(spec.cell_index(s))]
               [static_cast<std::size_t>(h)] = learned;
      result.max_abs_err =
          std::max(result.max_abs_err, std::abs(learned - exact));
      result.max_dp_value = std::max(result.max_dp_value, std::abs(exact));
    }
  }
  return result;
}

struct DpCheckConfig {
  std::string env = "fourroom";
  ModelKind model = ModelKind::NoWall;
  std::string policy = "uniform";  // uniform, or always-<action name>
  int h_max = 3;
  double gamma = 0.98;
  std::string out_dir = "dp_check";
  bool with_td = true;  // TD comparison runs for the uniform policy only
  std::int64_t td_buffer_steps = 2000000;
  std::int64_t td_updates = 200000;
  int td_batch = 64;
  double td_polyak = 0.01;
  double td_lr = 0.3;
  std::uint64_t seed = 1;
};

struct DpCheckResult {
  BoundReport report;
  int zero_error_cells = 0;       // open cells with exact error 0 at h_max
  double max_lhs_on_zero = 0.0;   // largest value gap among those cells
  bool ran_td = false;
  double td_max_abs_err = 0.0;
  double td_max_dp_value = 0.0;
};

inline PolicyTable make_policy(const GridSpec& spec,
                               const std::string& name) {
  if (name == "uniform") return PolicyTable::uniform_random(spec);
  for (Action a : kAllActions) {
    if (name == "always-" + std::string(action_name(a))) {
      return PolicyTable::always(spec, a);
    }
  }
  throw std::invalid_argument(
      "policy: expected uniform or always-<action>, got '" + name + "'");
}

// Writes the value-error bound report, the exact per-state errors, and
// (uniform policy) the TD-vs-DP comparison, one row per open cell.
inline DpCheckResult run_dp_check(const DpCheckConfig& cfg) {
  const GridSpec spec = make_grid_spec(cfg.env);
  if (cfg.model == ModelKind::Learned) {
    throw std::invalid_argument("dp-check needs an enumerable model");
  }
  const DynamicsModel model = make_model(spec, cfg.model, {}, cfg.seed);
  const PolicyTable pi = make_policy(spec, cfg.policy);
  const std::vector<double> vbar(
      static_cast<std::size_t>(spec.num_cells()), 0.0);

  const std::filesystem::path dir(cfg.out_dir);
  std::filesystem::create_directories(dir);

  DpCheckResult result{
      value_bound_check(model, pi, vbar, cfg.h_max, cfg.gamma), 0, 0.0, false,
      0.0, 0.0};
  const ValueTable exact =
      exact_model_error(model, pi, cfg.h_max, cfg.gamma);
  for (const GridState& s : spec.open_cells()) {
    const int c = spec.cell_index(s);
    if (result.report.err_h[static_cast<std::size_t>(c)] == 0.0) {
      ++result.zero_error_cells;
      result.max_lhs_on_zero =
          std::max(result.max_lhs_on_zero,
                   result.report.lhs[static_cast<std::size_t>(c)]);
    }
  }

  {
    std::ofstream os(dir / "exact_errors.csv");
    if (!os) throw std::runtime_error("cannot write exact_errors.csv");
    os << "x,y";
    for (int h = 0; h <= cfg.h_max; ++h) os << ",err_h" << h;
    os << '\n';
    for (int y = 0; y < spec.height(); ++y) {
      for (int x = 0; x < spec.width(); ++x) {
        if (!spec.open({x, y})) continue;
        os << x << ',' << y;
        for (int h = 0; h <= cfg.h_max; ++h) {
          os << ',' << format_double(exact.at({x, y}, h));
        }
        os << '\n';
      }
    }
  }

  if (cfg.with_td && cfg.policy == "uniform") {
    const TdVsDpResult td =
        td_vs_dp(spec, model, cfg.h_max, cfg.gamma, cfg.td_buffer_steps,
                 cfg.td_updates, cfg.td_batch, cfg.td_polyak, cfg.td_lr,
                 cfg.seed);
    result.ran_td = true;
    result.td_max_abs_err = td.max_abs_err;
    result.td_max_dp_value = td.max_dp_value;
    std::ofstream os(dir / "td_vs_dp.csv");
    if (!os) throw std::runtime_error("cannot write td_vs_dp.csv");
    os << "x,y";
    for (int h = 1; h <= cfg.h_max; ++h) os << ",dp_h" << h << ",td_h" << h;
    os << '\n';
    for (int y = 0; y < spec.height(); ++y) {
      for (int x = 0; x < spec.width(); ++x) {
        if (!spec.open({x, y})) continue;
        os << x << ',' << y;
        for (int h = 1; h <= cfg.h_max; ++h) {
          os << ',' << format_double(td.dp.at({x, y}, h)) << ','
             << format_double(
                    td.td[static_cast<std::size_t>(spec.cell_index({x, y}))]
                         [static_cast<std::size_t>(h)]);
        }
        os << '\n';
      }
    }
  }

  {
    std::ofstream os(dir / "bound_report.txt");
    if (!os) throw std::runtime_error("cannot write bound_report.txt");
    os << "env = " << cfg.env << '\n';
    os << "model = " << model_kind_name(cfg.model) << '\n';
    os << "policy = " << cfg.policy << '\n';
    os << "h_max = " << cfg.h_max << '\n';
    os << "gamma = " << format_double(cfg.gamma) << '\n';
    os << "k_hat = " << format_double(result.report.k_hat) << '\n';
    os << "zero_error_cells = " << result.zero_error_cells << '\n';
    os << "max_value_gap_on_zero_error_cells = "
       << format_double(result.max_lhs_on_zero) << '\n';
    os << "violations = " << result.report.violations.size() << '\n';
    for (const GridState& s : result.report.violations) {
      const std::size_t c = static_cast<std::size_t>(spec.cell_index(s));
      os << "violation x=" << s.x << " y=" << s.y
         << " lhs=" << format_double(result.report.lhs[c])
         << " rhs=" << format_double(result.report.rhs[c]) << '\n';
    }
    if (result.ran_td) {
      os << "td_max_abs_err = " << format_double(result.td_max_abs_err)
         << '\n';
      os << "td_max_dp_value = " << format_double(result.td_max_dp_value)
         << '\n';
    }
  }
  return result;
}

}  // namespace adamve
