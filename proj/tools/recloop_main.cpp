// recloop command-line tool: build semi-synthetic ground truths, run closed
// feedback-loop simulations, validate the ranking assumption and aggregate
// trace files.
//
// Exit codes: 0 success, 2 usage/argument error, 3 config or input parse
// error, 4 data error, 5 numeric (training) failure.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "recloop/recloop.hpp"

namespace fs = std::filesystem;
using namespace recloop;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitParse = 3;
constexpr int kExitData = 4;
constexpr int kExitNumeric = 5;

struct CommonFlags {
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> runs;
  std::optional<std::uint64_t> iterations;
  std::optional<double> epsilon;
  std::optional<std::string> policy;
  std::optional<std::string> feedback;
  std::optional<double> theta;
};

ConfigMap load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw DataError("cannot open config file: " + path);
  }
  return parse_config(in);
}

void apply_overrides(ConfigMap& cfg, const CommonFlags& flags) {
  if (!flags.out_dir.empty()) {
    cfg["out"] = flags.out_dir;
  }
  if (flags.seed) {
    cfg["seed"] = std::to_string(*flags.seed);
  }
  if (flags.runs) {
    cfg["runs"] = std::to_string(*flags.runs);
  }
  if (flags.iterations) {
    cfg["iterations"] = std::to_string(*flags.iterations);
  }
  if (flags.epsilon) {
    cfg["epsilon"] = format_double(*flags.epsilon);
  }
  if (flags.policy) {
    cfg["policy"] = *flags.policy;
  }
  if (flags.feedback) {
    cfg["feedback"] = *flags.feedback;
  }
  if (flags.theta) {
    cfg["theta"] = format_double(*flags.theta);
  }
}

Hyperparams hyperparams_from(const ConfigMap& cfg) {
  Hyperparams hp;
  hp.learning_rate = config_double(cfg, "learning_rate", hp.learning_rate);
  hp.latent_dim = config_uint(cfg, "latent_dim", hp.latent_dim);
  hp.l2_coeff = config_double(cfg, "l2_coeff", hp.l2_coeff);
  hp.epochs = config_uint(cfg, "epochs", hp.epochs);
  hp.validate();
  return hp;
}

RatingDataset load_ratings_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw DataError("cannot open ratings file: " + path);
  }
  return parse_ratings(in);
}

GroupMapping load_groups_file(const std::string& path,
                              const ItemIndex& index) {
  std::ifstream in(path);
  if (!in) {
    throw DataError("cannot open groups file: " + path);
  }
  return parse_item_groups(in, index);
}

fs::path resolve_out(const ConfigMap& cfg) {
  fs::path out = config_string(cfg, "out", ".");
  fs::create_directories(out);
  return out;
}

void write_text_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw DataError("cannot write file: " + path.string());
  }
  out << content;
}

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(
               std::chrono::steady_clock::now() - start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_ =
      std::chrono::steady_clock::now();
};

void finish_manifest(RunManifest& m, const ConfigMap& cfg,
                     const Stopwatch& watch, const fs::path& out_dir) {
  m.config_snapshot = serialize_config(cfg);
  m.duration_seconds = watch.seconds();
  write_text_file(out_dir / "manifest.json", manifest_to_json(m));
}

int cmd_complete(const CommonFlags& flags) {
  Stopwatch watch;
  ConfigMap cfg = load_config_file(flags.config_path);
  apply_overrides(cfg, flags);
  fs::path out_dir = resolve_out(cfg);

  const std::string ratings_path = config_required(cfg, "ratings");
  const std::string groups_path = config_required(cfg, "groups");
  const std::uint64_t master_seed = config_uint(cfg, "seed", 0);

  RatingDataset dataset = load_ratings_file(ratings_path);
  GroupMapping mapping = load_groups_file(groups_path, dataset.item_index());
  std::cout << "parsed " << dataset.observations.size() << " ratings, "
            << dataset.num_users << " users, " << dataset.num_items
            << " items, " << mapping.num_groups << " groups\n";

  Hyperparams hp = hyperparams_from(cfg);
  hp.seed = derive_seed(master_seed, {seed_stream::kTruth});
  GroundTruth truth = build_semisynthetic(dataset, hp);

  fs::path truth_path = out_dir / "ground_truth.bin";
  {
    std::ofstream out(truth_path, std::ios::binary);
    if (!out) {
      throw DataError("cannot write file: " + truth_path.string());
    }
    save_ground_truth(truth, hp, out);
  }
  std::cout << "wrote " << truth_path.string() << " (" << truth.num_users
            << " x " << truth.num_items << ")\n";

  RunManifest manifest;
  manifest.command = "complete";
  manifest.master_seed = master_seed;
  manifest.run_seeds = {hp.seed};
  manifest.inputs = {digest_file(ratings_path), digest_file(groups_path)};
  manifest.outputs = {truth_path.string()};

  if (auto it = cfg.find("vocab_out"); it != cfg.end()) {
    fs::path vocab_path = fs::path(it->second).is_absolute()
                              ? fs::path(it->second)
                              : out_dir / it->second;
    std::ostringstream vocab;
    mapping.write_vocabulary(vocab);
    write_text_file(vocab_path, vocab.str());
    manifest.outputs.push_back(vocab_path.string());
  }

  finish_manifest(manifest, cfg, watch, out_dir);
  return 0;
}

struct SimulationInputs {
  RatingDataset dataset;
  GroupMapping mapping;
  GroundTruth truth;
  std::vector<InputDigest> digests;
};

SimulationInputs load_simulation_inputs(const ConfigMap& cfg,
                                        std::uint64_t master_seed,
                                        const Hyperparams& hp) {
  SimulationInputs inputs;
  if (config_bool(cfg, "synthetic", false)) {
    SyntheticWorldConfig world_cfg;
    world_cfg.num_users = config_uint(cfg, "synthetic_users", 200);
    world_cfg.num_items = config_uint(cfg, "synthetic_items", 500);
    world_cfg.num_groups = config_uint(cfg, "synthetic_groups", 10);
    world_cfg.rank = config_uint(cfg, "synthetic_rank", 3);
    world_cfg.noise = config_double(cfg, "synthetic_noise", 0.15);
    world_cfg.home_groups = config_uint(cfg, "synthetic_home_groups", 2);
    world_cfg.rated_per_user =
        config_uint(cfg, "synthetic_rated_per_user", 20);
    world_cfg.group_size_decay =
        config_double(cfg, "synthetic_group_decay", 1.0);
    world_cfg.home_weight_power =
        config_double(cfg, "synthetic_home_weight_power", 1.0);
    world_cfg.seed = derive_seed(master_seed, {seed_stream::kTruth});
    SyntheticWorld world = make_synthetic_world(world_cfg);
    inputs.dataset = std::move(world.dataset);
    inputs.mapping = std::move(world.mapping);
    inputs.truth = std::move(world.truth);
    return inputs;
  }

  const std::string ratings_path = config_required(cfg, "ratings");
  const std::string groups_path = config_required(cfg, "groups");
  inputs.dataset = load_ratings_file(ratings_path);
  inputs.mapping =
      load_groups_file(groups_path, inputs.dataset.item_index());
  inputs.digests.push_back(digest_file(ratings_path));
  inputs.digests.push_back(digest_file(groups_path));

  if (auto it = cfg.find("truth"); it != cfg.end()) {
    std::ifstream in(it->second, std::ios::binary);
    if (!in) {
      throw DataError("cannot open ground-truth file: " + it->second);
    }
    inputs.truth = load_ground_truth(in).first;
    inputs.digests.push_back(digest_file(it->second));
  } else {
    Hyperparams truth_hp = hp;
    truth_hp.seed = derive_seed(master_seed, {seed_stream::kTruth});
    inputs.truth = build_semisynthetic(inputs.dataset, truth_hp);
  }
  return inputs;
}

SimulationConfig simulation_config_from(const ConfigMap& cfg,
                                        std::uint64_t master_seed,
                                        const Hyperparams& hp) {
  SimulationConfig sim;
  sim.iterations = config_uint(cfg, "iterations", 30);
  sim.runs = config_uint(cfg, "runs", 10);
  sim.master_seed = master_seed;
  sim.hyperparams = hp;
  sim.relevance_threshold =
      static_cast<int>(config_uint(cfg, "relevance_threshold", 4));
  sim.collect_user_detail = config_bool(cfg, "collect_user_detail", true);

  const std::string policy = config_string(cfg, "policy", "exploit");
  if (policy == "exploit") {
    sim.policy.epsilon = 0.0;
  } else if (policy == "epsilon_greedy") {
    sim.policy.epsilon = parse_double(config_required(cfg, "epsilon"));
  } else {
    throw ParseError("policy must be exploit or epsilon_greedy, got '" +
                     policy + "'");
  }
  sim.policy.rec_len = config_uint(cfg, "rec_len", 10);

  const std::string feedback = config_string(cfg, "feedback", "perfect");
  if (feedback == "perfect") {
    sim.feedback.kind = FeedbackKind::perfect;
  } else if (feedback == "rank_dependent") {
    sim.feedback.kind = FeedbackKind::rank_dependent;
    sim.feedback.theta = config_double(cfg, "theta", 0.8);
  } else {
    throw ParseError("feedback must be perfect or rank_dependent, got '" +
                     feedback + "'");
  }

  const std::string retrain = config_string(cfg, "retrain", "from_scratch");
  if (retrain == "from_scratch") {
    sim.retrain = RetrainMode::from_scratch;
  } else if (retrain == "warm_start") {
    sim.retrain = RetrainMode::warm_start;
  } else {
    throw ParseError("retrain must be from_scratch or warm_start, got '" +
                     retrain + "'");
  }

  const std::string seen = config_string(cfg, "seen_update", "recommended");
  if (seen == "recommended") {
    sim.seen_update = SeenUpdate::recommended;
  } else if (seen == "rated") {
    sim.seen_update = SeenUpdate::rated_only;
  } else {
    throw ParseError("seen_update must be recommended or rated, got '" +
                     seen + "'");
  }
  sim.validate();
  return sim;
}

int cmd_simulate(const CommonFlags& flags) {
  Stopwatch watch;
  ConfigMap cfg = load_config_file(flags.config_path);
  apply_overrides(cfg, flags);
  fs::path out_dir = resolve_out(cfg);

  const std::uint64_t master_seed = config_uint(cfg, "seed", 0);
  Hyperparams hp = hyperparams_from(cfg);
  SimulationConfig sim = simulation_config_from(cfg, master_seed, hp);
  SimulationInputs inputs = load_simulation_inputs(cfg, master_seed, hp);

  fs::path trace_path = out_dir / "trace.csv";
  RunManifest manifest;
  manifest.command = "simulate";
  manifest.master_seed = master_seed;
  for (std::size_t r = 1; r <= sim.runs; ++r) {
    manifest.run_seeds.push_back(derive_seed(master_seed, {r}));
  }
  manifest.inputs = inputs.digests;
  manifest.outputs = {trace_path.string()};

  SimulationTrace partial;
  SimulationTrace trace;
  try {
    trace = run_simulation(sim, inputs.dataset, inputs.mapping, inputs.truth,
                           &partial);
  } catch (const TrainingError&) {
    std::ostringstream body;
    write_trace_csv(partial, body);
    write_text_file(trace_path, body.str());
    finish_manifest(manifest, cfg, watch, out_dir);
    throw;
  }

  std::ostringstream body;
  write_trace_csv(trace, body);
  write_text_file(trace_path, body.str());
  std::cout << "wrote " << trace_path.string() << " (" << trace.rows.size()
            << " rows, " << sim.runs << " runs x " << sim.iterations
            << " iterations)\n";

  finish_manifest(manifest, cfg, watch, out_dir);
  return 0;
}

std::string ranking_report_csv(const std::vector<RankingTestReport>& reps,
                               const RankingTestReport& pooled) {
  std::ostringstream out;
  out << "repetition,mean_seen,mean_unseen,var_seen,var_unseen,t_stat,"
         "p_value,n_seen,n_unseen,resampled_users\n";
  auto row = [&out](const std::string& label, const RankingTestReport& r) {
    out << label << ',' << format_double(r.mean_seen) << ','
        << format_double(r.mean_unseen) << ',' << format_double(r.var_seen)
        << ',' << format_double(r.var_unseen) << ','
        << format_double(r.t_stat) << ',' << format_double(r.p_value) << ','
        << r.n_seen << ',' << r.n_unseen << ',' << r.resampled_users << '\n';
  };
  for (std::size_t i = 0; i < reps.size(); ++i) {
    row(std::to_string(i + 1), reps[i]);
  }
  row("pooled", pooled);
  return out.str();
}

std::string ranking_report_text(const std::vector<RankingTestReport>& reps,
                                const RankingTestReport& pooled) {
  std::ostringstream out;
  out << "ranking-assumption check: " << reps.size()
      << " repetition(s), " << pooled.n_seen << " pooled user samples\n";
  std::size_t significant = 0;
  for (const auto& r : reps) {
    if (r.mean_seen > r.mean_unseen && r.p_value < 0.01) {
      ++significant;
    }
  }
  out << "repetitions with mean_seen > mean_unseen at p < 0.01: "
      << significant << "/" << reps.size() << "\n";
  out << "pooled: mean_seen = " << format_double(pooled.mean_seen)
      << ", mean_unseen = " << format_double(pooled.mean_unseen)
      << ", t = " << format_double(pooled.t_stat)
      << ", p = " << format_double(pooled.p_value) << "\n";
  return out.str();
}

int cmd_validate_ranking(const CommonFlags& flags) {
  Stopwatch watch;
  ConfigMap cfg = load_config_file(flags.config_path);
  apply_overrides(cfg, flags);
  fs::path out_dir = resolve_out(cfg);

  const std::uint64_t master_seed = config_uint(cfg, "seed", 0);
  const std::size_t repetitions = config_uint(cfg, "repetitions", 10);
  const std::size_t sample_users = config_uint(cfg, "sample_users", 30);
  if (repetitions < 1) {
    throw ArgumentError("repetitions must be >= 1");
  }

  RunManifest manifest;
  manifest.command = "validate-ranking";
  manifest.master_seed = master_seed;

  std::vector<RankingTestReport> reports;
  if (config_bool(cfg, "planted", false)) {
    PlantedConfig planted;
    planted.num_users = config_uint(cfg, "planted_users", planted.num_users);
    planted.num_items = config_uint(cfg, "planted_items", planted.num_items);
    planted.num_groups =
        config_uint(cfg, "planted_groups", planted.num_groups);
    planted.latent_dim = config_uint(cfg, "planted_dim", planted.latent_dim);
    planted.scale = config_double(cfg, "planted_scale", planted.scale);
    planted.rated_per_user =
        config_uint(cfg, "planted_rated_per_user", planted.rated_per_user);
    for (std::size_t rep = 1; rep <= repetitions; ++rep) {
      planted.seed = derive_seed(master_seed, {seed_stream::kSample, rep});
      manifest.run_seeds.push_back(planted.seed);
      PlantedInstance inst = make_planted_instance(planted);
      Rng rng(derive_seed(master_seed, {seed_stream::kSample, rep, 1}));
      reports.push_back(ranking_assumption_test(
          inst.model, inst.dataset, inst.mapping, sample_users, rng));
    }
  } else {
    const std::string ratings_path = config_required(cfg, "ratings");
    const std::string groups_path = config_required(cfg, "groups");
    RatingDataset dataset = load_ratings_file(ratings_path);
    GroupMapping mapping =
        load_groups_file(groups_path, dataset.item_index());
    manifest.inputs = {digest_file(ratings_path), digest_file(groups_path)};
    Hyperparams hp = hyperparams_from(cfg);
    for (std::size_t rep = 1; rep <= repetitions; ++rep) {
      hp.seed = derive_seed(master_seed, {seed_stream::kTrain, rep});
      manifest.run_seeds.push_back(hp.seed);
      FactorModel model = init_model(dataset.num_users, dataset.num_items, hp);
      train(model, dataset, hp);
      Rng rng(derive_seed(master_seed, {seed_stream::kSample, rep}));
      reports.push_back(ranking_assumption_test(model, dataset, mapping,
                                                sample_users, rng));
      std::cout << "repetition " << rep << ": mean_seen = "
                << format_double(reports.back().mean_seen)
                << ", mean_unseen = "
                << format_double(reports.back().mean_unseen)
                << ", p = " << format_double(reports.back().p_value) << "\n";
    }
  }

  RankingTestReport pooled = pool_reports(reports);
  fs::path csv_path = out_dir / "ranking_report.csv";
  fs::path text_path = out_dir / "ranking_report.txt";
  write_text_file(csv_path, ranking_report_csv(reports, pooled));
  write_text_file(text_path, ranking_report_text(reports, pooled));
  std::cout << "wrote " << csv_path.string() << " and " << text_path.string()
            << "\n";

  manifest.outputs = {csv_path.string(), text_path.string()};
  finish_manifest(manifest, cfg, watch, out_dir);
  return 0;
}

int cmd_report(const std::vector<std::string>& trace_paths,
               const std::vector<double>& deltas,
               const std::string& out_dir_arg) {
  Stopwatch watch;
  if (trace_paths.empty()) {
    throw ArgumentError("report needs at least one trace file");
  }
  fs::path out_dir = out_dir_arg.empty() ? "." : out_dir_arg;
  fs::create_directories(out_dir);

  RunManifest manifest;
  manifest.command = "report";

  std::vector<SimulationTrace> traces;
  for (const auto& path : trace_paths) {
    std::ifstream in(path);
    if (!in) {
      throw DataError("cannot open trace file: " + path);
    }
    traces.push_back(read_trace_csv(in));
    manifest.inputs.push_back(digest_file(path));
  }

  std::vector<AggregateRow> rows = aggregate_traces(traces);
  std::vector<double> effective_deltas =
      deltas.empty() ? std::vector<double>{0.05, 0.01} : deltas;
  for (double d : effective_deltas) {
    if (!(d > 0.0 && d <= 1.0)) {
      throw ArgumentError("delta must lie in (0, 1]");
    }
  }

  std::ostringstream agg_body;
  write_aggregate_csv(rows, agg_body);
  std::ostringstream summary_body;
  write_summary(traces, rows, effective_deltas, summary_body);

  fs::path agg_path = out_dir / "aggregate.csv";
  fs::path summary_path = out_dir / "summary.txt";
  write_text_file(agg_path, agg_body.str());
  write_text_file(summary_path, summary_body.str());
  std::cout << summary_body.str();

  manifest.outputs = {agg_path.string(), summary_path.string()};
  ConfigMap empty_cfg;
  finish_manifest(manifest, empty_cfg, watch, out_dir);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Closed feedback-loop recommender simulation toolkit"};
  app.set_version_flag("--version", std::string(kToolVersion));
  app.require_subcommand(1);

  CommonFlags flags;
  auto add_common = [&flags](CLI::App* cmd, bool sim_flags) {
    cmd->add_option("--config", flags.config_path, "flat key = value config")
        ->required();
    cmd->add_option("--out", flags.out_dir, "output directory");
    cmd->add_option("--seed", flags.seed, "master seed override");
    if (sim_flags) {
      cmd->add_option("--runs", flags.runs, "number of runs");
      cmd->add_option("--iterations", flags.iterations,
                      "loop iterations per run");
      cmd->add_option("--epsilon", flags.epsilon, "exploration proportion");
      cmd->add_option("--policy", flags.policy,
                      "exploit | epsilon_greedy");
      cmd->add_option("--feedback", flags.feedback,
                      "perfect | rank_dependent");
      cmd->add_option("--theta", flags.theta, "rank-feedback decay");
    }
  };

  CLI::App* complete =
      app.add_subcommand("complete", "build the semi-synthetic ground truth");
  add_common(complete, false);

  CLI::App* simulate =
      app.add_subcommand("simulate", "run the closed feedback loop");
  add_common(simulate, true);

  CLI::App* validate = app.add_subcommand(
      "validate-ranking", "test the ranking assumption (Welch t-test)");
  add_common(validate, false);

  std::vector<std::string> trace_paths;
  std::vector<double> deltas;
  std::string report_out;
  CLI::App* report =
      app.add_subcommand("report", "aggregate trace files into a report");
  report->add_option("traces", trace_paths, "trace CSV files")->required();
  report->add_option("--delta", deltas, "bound confidence levels");
  report->add_option("--out", report_out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (complete->parsed()) {
      return cmd_complete(flags);
    }
    if (simulate->parsed()) {
      return cmd_simulate(flags);
    }
    if (validate->parsed()) {
      return cmd_validate_ranking(flags);
    }
    if (report->parsed()) {
      return cmd_report(trace_paths, deltas, report_out);
    }
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return kExitParse;
  } catch (const TrainingError& e) {
    std::cerr << "training error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const ArgumentError& e) {
    std::cerr << "argument error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 70;
  }
  return kExitUsage;
}
