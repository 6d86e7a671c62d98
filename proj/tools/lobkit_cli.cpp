#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "lobkit/lobkit.hpp"

namespace fs = std::filesystem;
using namespace lobkit;

namespace {

// Exit codes: 0 success, 1 analysis-level failure (failed validation,
// unsolvable chain, rate explosion), 2 usage or configuration errors.
constexpr int kOk = 0;
constexpr int kAnalysisFailure = 1;
constexpr int kUsageError = 2;

bool verbose() {
  const char* v = std::getenv("LOBKIT_VERBOSE");
  return v != nullptr && std::string(v) != "0";
}

void note(const std::string& msg) {
  if (verbose()) std::cerr << "lobkit: " << msg << "\n";
}

nlohmann::json load_json(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file " + path);
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config " + path + " is not valid JSON: " + e.what());
  }
  return j;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  os << text;
}

void write_manifest(const fs::path& dir, RunManifest m, const WallClock& clock) {
  m.wall_seconds = clock.seconds();
  std::ofstream os(dir / "manifest.json");
  os << m.to_json().dump(2) << "\n";
}

struct StageError {
  std::string stage;
  std::string what;
};

int run_simulate(const std::string& config_path, const std::string& output_dir,
                 std::optional<std::uint64_t> seed_override) {
  const WallClock clock;
  SimConfig cfg = sim_config_from_json(load_json(config_path));
  if (seed_override.has_value()) cfg.seed = *seed_override;
  fs::create_directories(output_dir);

  note("simulating model '" + cfg.model.id + "' with seed " + std::to_string(cfg.seed));
  EventLog log;
  try {
    log = simulate(cfg);
  } catch (const SimulationError& e) {
    std::cerr << "lobkit simulate: " << e.what() << "\n";
    return kAnalysisFailure;
  }
  const fs::path out = fs::path(output_dir) / "events.log";
  write_event_log(out.string(), log);
  std::cout << "wrote " << out.string() << " (" << log.records.size() << " events, horizon "
            << log.meta.horizon << " s)\n";

  RunManifest man;
  man.command = "simulate";
  man.config_path = config_path;
  man.inputs = {config_path};
  man.outputs = {out.string()};
  man.seed = cfg.seed;
  write_manifest(output_dir, man, clock);
  return kOk;
}

int run_validate(const std::string& config_path, double z0, int c_bound, double delta) {
  const nlohmann::json j = load_json(config_path);
  const IntensityModel model = model_from_json(j.contains("model") ? j.at("model") : j);
  DriftOptions opt;
  opt.z0 = z0;
  opt.c_bound = c_bound;
  opt.delta = delta;
  const StabilityReport rep = validate_model(model, opt);
  std::cout << rep.render();
  return rep.pass ? kOk : kAnalysisFailure;
}

int run_pipeline(const std::string& config_path, const std::string& input_path,
                 const std::string& output_dir, const std::string& format, bool no_rank,
                 std::optional<int> qmax, std::optional<int> smax, std::optional<int> k,
                 std::optional<int> spread_filter) {
  const WallClock clock;
  PipelineConfig cfg = pipeline_config_from_json(load_json(config_path));
  if (qmax.has_value()) cfg.map.q_cap = *qmax;
  if (smax.has_value()) cfg.map.s_cap = *smax;
  if (k.has_value()) cfg.k = *k;
  if (spread_filter.has_value()) cfg.scope.spread_filter = *spread_filter;
  if (no_rank) cfg.rank = false;
  fs::create_directories(output_dir);
  const fs::path dir(output_dir);
  std::vector<std::string> outputs;
  std::string stage = "ingest";

  try {
    // --- ingest ---------------------------------------------------------
    EventLog log;
    if (cfg.input_kind == "market_csv") {
      const auto res = read_market_csv(input_path, cfg.tick_size, cfg.scope);
      log = res.log;
      note("ingested " + std::to_string(res.stats.rows) + " rows -> " +
           std::to_string(log.records.size()) + " events (" +
           std::to_string(res.stats.rejected_parse + res.stats.rejected_nonmonotone) +
           " rejected)");
    } else {
      log = read_event_log(input_path);
      note("read " + std::to_string(log.records.size()) + " events");
    }
    if (log.records.empty()) throw std::invalid_argument("input contains no usable events");

    // --- estimate -------------------------------------------------------
    stage = "estimate";
    EstimateOptions eopt;
    eopt.scope = cfg.scope;
    eopt.ci_lags = cfg.ci_lags;
    eopt.compute_ci = cfg.compute_ci;
    const GeneratorEstimate est = estimate_generator(log, cfg.map, eopt);
    if (est.cells.empty())
      throw std::invalid_argument("no in-scope transitions after filtering");
    {
      std::ofstream os(dir / "generator.txt");
      write_generator_estimate(os, est);
      outputs.push_back((dir / "generator.txt").string());
    }
    // The per-queue intensity table always comes from the pooled view.
    StateMapSpec pooled = cfg.map;
    pooled.kind = StateMapKind::PooledQueue;
    EstimateOptions pooled_opt = eopt;
    pooled_opt.compute_ci = false;
    const GeneratorEstimate pooled_est =
        cfg.map.kind == StateMapKind::PooledQueue ? est
                                                  : estimate_generator(log, pooled, pooled_opt);
    if (format != "json") {
      std::ofstream os(dir / "intensity_by_queue.csv");
      write_intensity_csv(os, pooled_est);
      outputs.push_back((dir / "intensity_by_queue.csv").string());
    }

    // --- stationary -----------------------------------------------------
    stage = "stationary";
    const auto bridge = generator_from_estimate(est);
    ReportOptions ropt;
    ropt.k = cfg.k;
    ropt.tick_size = cfg.tick_size;
    ropt.imbalance = cfg.imbalance;
    StationaryReport rep = build_stationary_report(bridge.generator, ropt);
    nlohmann::json rj = stationary_report_to_json(rep);
    rj["log_time_average_spread_ticks"] = time_average_spread(log, cfg.scope);
    rj["mean_interarrival_seconds"] = estimate_mean_interarrival(log).value;
    rj["dropped_events"] = est.dropped_events;
    rj["dangling_transitions"] = bridge.dangling_transitions;
    write_text((dir / "stationary.json").string(), rj.dump(2) + "\n");
    outputs.push_back((dir / "stationary.json").string());
    if (format != "json") {
      std::ofstream os(dir / "pi.csv");
      write_pi_csv(os, rep);
      outputs.push_back((dir / "pi.csv").string());
    }
    std::cout << "sigma2_G = " << rep.sigma2_g_tick2_per_event
              << " tick^2/event, sigma2_M_" << cfg.k << " = " << rep.sigma2_m_tick2_per_event
              << " tick^2/event, per-second = " << rep.sigma2_per_second << "\n";

    // --- rank -----------------------------------------------------------
    if (cfg.rank) {
      stage = "rank";
      RankOptions rko;
      rko.k = cfg.k;
      RankingReport ranking = rank_market_makers(est, cfg.rank_agents, rko);
      ranking.asset = fs::path(input_path).stem().string();
      std::vector<RankingReport> reports{ranking};
      apply_star_counts(reports);
      if (format != "json") {
        std::ofstream os(dir / "ranking.csv");
        ranking_to_csv(os, reports[0]);
        outputs.push_back((dir / "ranking.csv").string());
      }
      write_text((dir / "ranking.json").string(), ranking_to_json(reports[0]).dump(2) + "\n");
      outputs.push_back((dir / "ranking.json").string());
      std::ostringstream table;
      ranking_table(table, reports);
      write_text((dir / "ranking.txt").string(), table.str());
      outputs.push_back((dir / "ranking.txt").string());
      std::cout << table.str();
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "lobkit pipeline [" << stage << "]: " << e.what() << "\n";
    return kAnalysisFailure;
  } catch (const std::runtime_error& e) {
    std::cerr << "lobkit pipeline [" << stage << "]: " << e.what() << "\n";
    return kAnalysisFailure;
  }

  RunManifest man;
  man.command = "pipeline";
  man.config_path = config_path;
  man.inputs = {config_path, input_path};
  man.outputs = outputs;
  write_manifest(output_dir, man, clock);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"order-book event-flow toolkit: simulate, validate, estimate, rank"};
  app.require_subcommand(1);

  // simulate
  auto* sim = app.add_subcommand("simulate", "simulate an event log from a model config");
  std::string sim_config, sim_out = ".";
  std::uint64_t sim_seed = 0;
  bool sim_seed_set = false;
  sim->add_option("--config", sim_config, "simulation config (lobkit-sim/1)")->required();
  sim->add_option("--output-dir", sim_out, "output directory");
  sim->add_option("--seed", sim_seed, "override the config seed")->each([&](const std::string&) {
    sim_seed_set = true;
  });

  // validate
  auto* val = app.add_subcommand("validate", "check the stability assumptions of a model");
  std::string val_config;
  double val_z0 = 1.2, val_delta = 0.0;
  int val_cbound = 8;
  val->add_option("--config", val_config, "model config (lobkit-model/1)")->required();
  val->add_option("--z0", val_z0, "geometric drift rate (> 1)");
  val->add_option("--cbound", val_cbound, "drift threshold on queue/spread");
  val->add_option("--delta", val_delta, "required drift slack");

  // pipeline
  auto* pipe = app.add_subcommand("pipeline",
                                  "estimate a generator from a log, solve it and rank agents");
  std::string pipe_config, pipe_input, pipe_out = ".", pipe_format = "csv";
  bool pipe_no_rank = false;
  int pipe_qmax = -1, pipe_smax = -1, pipe_k = -1, pipe_spread = -1;
  pipe->add_option("--config", pipe_config, "pipeline config (lobkit-pipeline/1)")->required();
  pipe->add_option("--input", pipe_input, "event log or raw market CSV")->required();
  pipe->add_option("--output-dir", pipe_out, "output directory");
  pipe->add_option("--format", pipe_format, "artifact format")->check(CLI::IsMember({"csv", "json"}));
  pipe->add_flag("--no-rank", pipe_no_rank, "stop after the stationary report");
  pipe->add_option("--qmax", pipe_qmax, "override the queue cap");
  pipe->add_option("--smax", pipe_smax, "override the spread cap");
  pipe->add_option("--k", pipe_k, "override the volatility lag depth");
  pipe->add_option("--spread-filter", pipe_spread, "override the spread filter (0 disables)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsageError;
  }

  try {
    if (sim->parsed())
      return run_simulate(sim_config, sim_out,
                          sim_seed_set ? std::optional<std::uint64_t>(sim_seed) : std::nullopt);
    if (val->parsed()) return run_validate(val_config, val_z0, val_cbound, val_delta);
    if (pipe->parsed())
      return run_pipeline(pipe_config, pipe_input, pipe_out, pipe_format, pipe_no_rank,
                          pipe_qmax >= 0 ? std::optional<int>(pipe_qmax) : std::nullopt,
                          pipe_smax >= 0 ? std::optional<int>(pipe_smax) : std::nullopt,
                          pipe_k >= 0 ? std::optional<int>(pipe_k) : std::nullopt,
                          pipe_spread >= 0 ? std::optional<int>(pipe_spread) : std::nullopt);
  } catch (const ConfigError& e) {
    std::cerr << "lobkit: " << e.what() << "\n";
    return kUsageError;
  } catch (const std::exception& e) {
    std::cerr << "lobkit: " << e.what() << "\n";
    return kAnalysisFailure;
  }
  return kUsageError;
}
