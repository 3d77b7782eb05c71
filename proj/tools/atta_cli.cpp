// Command-line runner: train | stream | report | all.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "atta/harness/report.hpp"

namespace fs = std::filesystem;
using namespace atta;

namespace {

struct Flags {
  std::string config_file;
  std::string scenario;
  std::vector<std::string> faults;
  std::vector<std::uint64_t> seeds;
  std::string out;
  std::string checkpoint_dir;
  std::string metrics_file;
  bool quiet = false;

  // scenario shaping
  double steady_seconds = 0;
  double ramp_seconds = 0;
  double snr_db = 0;
  double fault_severity = 0;
  double transition_disturbance = 0;
  std::uint64_t rig_seed = 0;

  // offline
  std::size_t epochs = 0;
  std::size_t batch_size = 0;
  double lr = 0;
  double lambda_warmup = 0;
  double lambda_constant = 0;
  std::size_t anchors = 0;

  // online
  double tau = 0;
  double eta_f = 0;
  double eta_y = 0;
  std::size_t steps = 0;
  std::size_t refresh_period = 0;
  std::string bn_policy;
  std::string update_rule;
  std::string refresh_unit;
  std::size_t block_size = 0;
  bool trace = false;
};

struct Registered {
  std::vector<std::pair<std::string, CLI::Option*>> opts;
  bool set(const std::string& name) const {
    for (const auto& [n, o] : opts)
      if (n == name) return o->count() > 0;
    return false;
  }
};

Registered add_flags(CLI::App* cmd, Flags& f) {
  Registered r;
  auto add = [&](const std::string& name, auto& var, const std::string& help) {
    r.opts.emplace_back(name, cmd->add_option("--" + name, var, help));
  };
  add("config", f.config_file, "JSON experiment config; flags override it");
  add("scenario", f.scenario, "I, II, or a scenario JSON file");
  r.opts.emplace_back("fault", cmd->add_option("--fault", f.faults, "fault under test (repeatable)"));
  r.opts.emplace_back("seed", cmd->add_option("--seed", f.seeds, "experiment seed (repeatable)"));
  add("out", f.out, "output directory");
  add("steady-seconds", f.steady_seconds, "duration of each steady recording");
  add("ramp-seconds", f.ramp_seconds, "duration of the transitional recording");
  add("snr-db", f.snr_db, "synthetic noise level");
  add("fault-severity", f.fault_severity, "synthetic fault signature gain");
  add("transition-disturbance", f.transition_disturbance, "extra disturbance during ramps");
  add("rig-seed", f.rig_seed, "seed of the synthetic rig's fixed transfer paths");
  add("epochs", f.epochs, "offline epochs");
  add("batch-size", f.batch_size, "offline mini-batch size");
  add("lr", f.lr, "offline Adam learning rate");
  add("lambda-warmup", f.lambda_warmup, "fraction of training over which lambda ramps 0 -> 1");
  add("lambda-constant", f.lambda_constant, "fixed lambda instead of the ramp");
  add("anchors", f.anchors, "anchors per class");
  add("tau", f.tau, "prototype softmax temperature");
  add("eta-f", f.eta_f, "extractor step size");
  add("eta-y", f.eta_y, "classifier step size");
  add("steps", f.steps, "inner steps per block");
  add("refresh-period", f.refresh_period, "prototype re-projection period");
  add("bn-policy", f.bn_policy, "frozen | batch");
  add("update-rule", f.update_rule, "sgd | adam");
  add("refresh-unit", f.refresh_unit, "blocks | steps");
  add("block-size", f.block_size, "samples per stream block");
  r.opts.emplace_back("trace", cmd->add_flag("--trace", f.trace, "write per-block JSON-lines traces"));
  r.opts.emplace_back("quiet", cmd->add_flag("--quiet,-q", f.quiet, "no progress output"));
  return r;
}

nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("'" + path + "': " + e.what());
  }
}

ExperimentConfig build_config(const Flags& f, const Registered& r) {
  ExperimentConfig c;
  if (r.set("config")) c = experiment_from_json(read_json(f.config_file));

  if (r.set("scenario") || r.set("steady-seconds") || r.set("ramp-seconds")) {
    const std::string id = r.set("scenario") ? f.scenario : c.scenario.name;
    SynthConfig keep = c.scenario.synth;
    if (id == "I" || id == "II") {
      const double steady = r.set("steady-seconds") ? f.steady_seconds : 1.0;
      const double ramp = r.set("ramp-seconds") ? f.ramp_seconds : (id == "I" ? 0.5 : 0.9);
      c.scenario = id == "I" ? scenario_one(steady, ramp) : scenario_two(steady, ramp);
      c.scenario.synth = keep;
    } else if (r.set("scenario")) {
      c.scenario = scenario_from_json(read_json(f.scenario));
    }
  }
  auto& sy = c.scenario.synth;
  if (r.set("snr-db")) sy.snr_db = f.snr_db;
  if (r.set("fault-severity")) sy.fault_severity = f.fault_severity;
  if (r.set("transition-disturbance")) sy.transition_disturbance = f.transition_disturbance;
  if (r.set("rig-seed")) sy.rig_seed = f.rig_seed;

  if (r.set("fault")) c.faults = f.faults;
  if (r.set("seed")) c.seeds = f.seeds;
  if (r.set("out")) c.out_dir = f.out;

  auto& o = c.offline;
  if (r.set("epochs")) o.epochs = f.epochs;
  if (r.set("batch-size")) o.batch_size = f.batch_size;
  if (r.set("lr")) o.lr = f.lr;
  if (r.set("lambda-warmup")) o.lambda.warmup_fraction = f.lambda_warmup;
  if (r.set("lambda-constant")) o.lambda.constant = f.lambda_constant;
  if (r.set("anchors")) o.anchors_per_class = f.anchors;

  auto& n = c.online;
  if (r.set("tau")) n.tau = f.tau;
  if (r.set("eta-f")) n.eta_f = f.eta_f;
  if (r.set("eta-y")) n.eta_y = f.eta_y;
  if (r.set("steps")) n.steps = f.steps;
  if (r.set("refresh-period")) n.refresh_period = f.refresh_period;
  if (r.set("bn-policy")) n.bn_policy = bn_policy_from(f.bn_policy);
  if (r.set("update-rule")) n.update_rule = update_rule_from(f.update_rule);
  if (r.set("refresh-unit")) n.refresh_unit = refresh_unit_from(f.refresh_unit);
  if (r.set("block-size")) c.block_size = f.block_size;
  if (r.set("trace")) c.trace = f.trace;
  c.validate();
  return c;
}

ProgressFn progress_printer(bool quiet) {
  if (quiet) return {};
  const auto start = std::chrono::steady_clock::now();
  return [start](const std::string& msg) {
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::fprintf(stderr, "[%7.1fs] %s\n", s, msg.c_str());
  };
}

void save_config(const ExperimentConfig& c) {
  fs::create_directories(c.out_dir);
  std::ofstream(fs::path(c.out_dir) / "config.json") << to_json(c).dump(2) << '\n';
}

void print_summary(const std::vector<RunMetrics>& runs) {
  for (const RunGroup& g : group_runs(runs)) {
    std::printf("%-4s %-16s %-9s %.4f\n", g.scenario.c_str(), g.fault.c_str(), g.adapter.c_str(),
                mean_final_accuracy(g));
  }
}

int cmd_train(const ExperimentConfig& c, const ProgressFn& progress) {
  save_config(c);
  for (std::uint64_t seed : c.seeds) {
    const ScenarioData data = materialize_for(c, seed);
    const SeedModel m = train_seed(c, data, seed, progress);
    const fs::path path = fs::path(c.out_dir) / checkpoint_name(c.scenario.name, seed);
    staged("checkpoint", [&] { write_checkpoint(path.string(), to_checkpoint(m.artifact)); });
    std::printf("wrote %s\n", path.string().c_str());
  }
  return 0;
}

int cmd_stream(const ExperimentConfig& c, const std::string& ckpt_dir, const ProgressFn& progress) {
  std::vector<RunMetrics> all;
  for (std::uint64_t seed : c.seeds) {
    const ScenarioData data = materialize_for(c, seed);
    const fs::path path = fs::path(ckpt_dir) / checkpoint_name(c.scenario.name, seed);
    const Checkpoint ckpt = staged("checkpoint", [&] { return read_checkpoint(path.string()); });
    const SeedModel m = load_seed(ckpt, data);
    for (const auto& fault : c.fault_list()) {
      auto runs = run_fault(c, data, m, fault, progress);
      all.insert(all.end(), runs.begin(), runs.end());
    }
  }
  emit_report(all, c.out_dir);
  print_summary(all);
  return 0;
}

int cmd_report(const std::string& metrics, const std::string& out) {
  const auto runs = staged("report", [&] { return load_metrics(metrics); });
  staged("report", [&] {
    fs::create_directories(out);
    std::ofstream s(fs::path(out) / "summary.csv");
    write_summary_csv(runs, s);
    std::set<std::pair<std::string, std::string>> done;
    for (const RunMetrics& m : runs) {
      if (!done.insert({m.scenario, m.fault}).second) continue;
      std::ofstream f(fs::path(out) / svg_name(m.scenario, m.fault));
      write_svg(runs, m.scenario, m.fault, f);
    }
  });
  print_summary(runs);
  return 0;
}

int cmd_all(const ExperimentConfig& c, const ProgressFn& progress) {
  save_config(c);
  const auto runs = run_experiment(c, progress);
  emit_report(runs, c.out_dir);
  print_summary(runs);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Asymmetric test-time adaptation experiments"};
  app.require_subcommand(1);

  Flags f;
  auto* train = app.add_subcommand("train", "offline training only; writes one checkpoint per seed");
  auto* stream = app.add_subcommand("stream", "run the adapters from saved checkpoints");
  auto* report = app.add_subcommand("report", "regenerate summary.csv and SVGs from metrics.csv");
  auto* all = app.add_subcommand("all", "full pipeline");
  const Registered r_train = add_flags(train, f);
  const Registered r_stream = add_flags(stream, f);
  stream->add_option("--checkpoints", f.checkpoint_dir, "directory holding the checkpoints (default: --out)");
  const Registered r_all = add_flags(all, f);
  report->add_option("--metrics", f.metrics_file, "metrics.csv to read")->required();
  report->add_option("--out", f.out, "output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (report->parsed()) return cmd_report(f.metrics_file, f.out);
    const Registered& r = train->parsed() ? r_train : stream->parsed() ? r_stream : r_all;
    const ExperimentConfig c = staged("config", [&] { return build_config(f, r); });
    const ProgressFn progress = progress_printer(f.quiet);
    if (train->parsed()) return cmd_train(c, progress);
    if (stream->parsed()) return cmd_stream(c, f.checkpoint_dir.empty() ? c.out_dir : f.checkpoint_dir, progress);
    return cmd_all(c, progress);
  } catch (const StageError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: [cli] %s\n", e.what());
    return 1;
  }
}
