#include <catch2/catch_amalgamated.hpp>

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "recloop/manifest.hpp"
#include "recloop/trace.hpp"

namespace fs = std::filesystem;
using namespace recloop;

namespace {

struct CliResult {
  int exit_code;
  std::string output;  // stdout + stderr
};

CliResult run_cli(const std::string& args, const fs::path& dir) {
  fs::path log = dir / "cli_output.log";
  std::string cmd = std::string(RECLOOP_CLI_PATH) + " " + args + " > " +
                    log.string() + " 2>&1";
  int status = std::system(cmd.c_str());
  CliResult res;
  res.exit_code = WEXITSTATUS(status);
  res.output = fs::exists(log) ? read_file(log.string()) : "";
  fs::remove(log);
  return res;
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("recloop_test_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter()++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  static int& counter() {
    static int c = 0;
    return c;
  }
};

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

const char* kTinyRatings =
    "1::1::5::100\n1::2::3::100\n2::2::4::100\n2::3::2::100\n"
    "3::1::4::100\n3::3::5::100\n";
const char* kTinyGroups =
    "1::Movie A::Comedy|Drama\n2::Movie B::Comedy\n3::Movie C::Horror\n";

std::string synthetic_config(const std::string& extra) {
  return "synthetic = true\n"
         "synthetic_users = 12\n"
         "synthetic_items = 40\n"
         "synthetic_groups = 5\n"
         "synthetic_rank = 2\n"
         "synthetic_home_groups = 2\n"
         "synthetic_rated_per_user = 5\n"
         "iterations = 3\n"
         "runs = 2\n"
         "rec_len = 5\n"
         "epochs = 6\n"
         "learning_rate = 0.02\n"
         "latent_dim = 4\n"
         "seed = 7\n" +
         extra;
}

}  // namespace

TEST_CASE("usage errors exit with code 2", "[cli]") {
  TempDir tmp;
  CHECK(run_cli("", tmp.path).exit_code == 2);
  CHECK(run_cli("frobnicate", tmp.path).exit_code == 2);
  CHECK(run_cli("simulate", tmp.path).exit_code == 2);  // missing --config
  CHECK(run_cli("--version", tmp.path).exit_code == 0);
  CHECK(run_cli("--help", tmp.path).exit_code == 0);
}

TEST_CASE("missing input files exit with the data code and name the path",
          "[cli]") {
  TempDir tmp;
  fs::path cfg = tmp.path / "c.cfg";
  write_file(cfg, "ratings = /nonexistent/r.dat\ngroups = /nonexistent/g.dat\n"
                  "out = " + (tmp.path / "out").string() + "\n");
  CliResult res = run_cli("complete --config " + cfg.string(), tmp.path);
  CHECK(res.exit_code == 4);
  CHECK(res.output.find("/nonexistent/r.dat") != std::string::npos);

  CliResult no_cfg =
      run_cli("complete --config " + (tmp.path / "absent.cfg").string(),
              tmp.path);
  CHECK(no_cfg.exit_code == 4);
}

TEST_CASE("malformed config exits with the parse code", "[cli]") {
  TempDir tmp;
  fs::path cfg = tmp.path / "bad.cfg";
  write_file(cfg, "nonsense_key = 1\n");
  CHECK(run_cli("simulate --config " + cfg.string(), tmp.path).exit_code ==
        3);

  fs::path bad_ratings_cfg = tmp.path / "bad2.cfg";
  write_file(tmp.path / "r.dat", "1::2::9::0\n");  // rating out of range
  write_file(tmp.path / "g.dat", kTinyGroups);
  write_file(bad_ratings_cfg,
             "ratings = " + (tmp.path / "r.dat").string() + "\n" +
                 "groups = " + (tmp.path / "g.dat").string() + "\n" +
                 "out = " + (tmp.path / "out").string() + "\n");
  CHECK(run_cli("complete --config " + bad_ratings_cfg.string(), tmp.path)
            .exit_code == 3);
}

TEST_CASE("complete writes a ground truth and manifest deterministically",
          "[cli]") {
  TempDir tmp;
  write_file(tmp.path / "r.dat", kTinyRatings);
  write_file(tmp.path / "g.dat", kTinyGroups);
  fs::path cfg = tmp.path / "c.cfg";
  write_file(cfg, "ratings = " + (tmp.path / "r.dat").string() + "\n" +
                      "groups = " + (tmp.path / "g.dat").string() + "\n" +
                      "epochs = 10\nlatent_dim = 3\nseed = 5\n" +
                      "vocab_out = groups.tsv\n");

  fs::path out1 = tmp.path / "out1";
  fs::path out2 = tmp.path / "out2";
  CliResult a = run_cli("complete --config " + cfg.string() + " --out " +
                            out1.string(),
                        tmp.path);
  REQUIRE(a.exit_code == 0);
  CHECK(fs::exists(out1 / "ground_truth.bin"));
  CHECK(fs::exists(out1 / "manifest.json"));
  CHECK(read_file((out1 / "groups.tsv").string()) ==
        "0\tComedy\n1\tDrama\n2\tHorror\n");

  CliResult b = run_cli("complete --config " + cfg.string() + " --out " +
                            out2.string(),
                        tmp.path);
  REQUIRE(b.exit_code == 0);
  CHECK(read_file((out1 / "ground_truth.bin").string()) ==
        read_file((out2 / "ground_truth.bin").string()));

  // the manifest snapshot re-parses and echoes the effective config
  RunManifest m =
      manifest_from_json(read_file((out1 / "manifest.json").string()));
  CHECK(m.command == "complete");
  CHECK(m.inputs.size() == 2);
  CHECK(m.config_snapshot.find("epochs = 10") != std::string::npos);
}

TEST_CASE("simulate emits one row per (run, iteration) and reruns "
          "byte-identically", "[cli]") {
  TempDir tmp;
  fs::path cfg = tmp.path / "sim.cfg";
  write_file(cfg, synthetic_config(""));

  fs::path out1 = tmp.path / "a";
  fs::path out2 = tmp.path / "b";
  CliResult r1 = run_cli("simulate --config " + cfg.string() + " --out " +
                             out1.string(),
                         tmp.path);
  REQUIRE(r1.exit_code == 0);
  CliResult r2 = run_cli("simulate --config " + cfg.string() + " --out " +
                             out2.string(),
                         tmp.path);
  REQUIRE(r2.exit_code == 0);

  std::string trace1 = read_file((out1 / "trace.csv").string());
  CHECK(trace1 == read_file((out2 / "trace.csv").string()));

  std::istringstream in(trace1);
  SimulationTrace trace = read_trace_csv(in);
  CHECK(trace.rows.size() == 2 * 3);  // runs x iterations
  CHECK(trace.echo_value("rec_len") == std::string("5"));
}

TEST_CASE("policy flag changes only policy-dependent columns and echo",
          "[cli]") {
  TempDir tmp;
  fs::path cfg = tmp.path / "sim.cfg";
  write_file(cfg, synthetic_config(""));

  fs::path exploit_dir = tmp.path / "exploit";
  fs::path greedy_dir = tmp.path / "greedy";
  REQUIRE(run_cli("simulate --config " + cfg.string() + " --out " +
                      exploit_dir.string(),
                  tmp.path)
              .exit_code == 0);
  REQUIRE(run_cli("simulate --config " + cfg.string() +
                      " --policy epsilon_greedy --epsilon 0.4 --out " +
                      greedy_dir.string(),
                  tmp.path)
              .exit_code == 0);

  std::istringstream in1(read_file((exploit_dir / "trace.csv").string()));
  std::istringstream in2(read_file((greedy_dir / "trace.csv").string()));
  SimulationTrace exploit = read_trace_csv(in1);
  SimulationTrace greedy = read_trace_csv(in2);
  REQUIRE(exploit.rows.size() == greedy.rows.size());
  for (std::size_t i = 0; i < exploit.rows.size(); ++i) {
    CHECK(exploit.rows[i].run == greedy.rows[i].run);
    CHECK(exploit.rows[i].iteration == greedy.rows[i].iteration);
    CHECK(exploit.rows[i].bound_d05 == greedy.rows[i].bound_d05);
    CHECK(exploit.rows[i].bound_d01 == greedy.rows[i].bound_d01);
  }
  CHECK(exploit.echo_value("policy") == std::string("exploit"));
  CHECK(greedy.echo_value("policy") == std::string("epsilon_greedy"));
  CHECK(greedy.echo_value("epsilon") == std::string("0.4"));
  for (const auto& [key, value] : exploit.config_echo) {
    if (key != "policy" && key != "epsilon") {
      CHECK(greedy.echo_value(key) == value);
    }
  }
}

TEST_CASE("validate-ranking on a planted instance finds the signal", "[cli]") {
  TempDir tmp;
  fs::path cfg = tmp.path / "vr.cfg";
  write_file(cfg,
             "planted = true\nplanted_users = 40\nplanted_items = 120\n"
             "sample_users = 20\nrepetitions = 3\nseed = 13\n");
  fs::path out = tmp.path / "out";
  CliResult res = run_cli("validate-ranking --config " + cfg.string() +
                              " --out " + out.string(),
                          tmp.path);
  REQUIRE(res.exit_code == 0);

  std::string csv = read_file((out / "ranking_report.csv").string());
  // repetitions + pooled row + header
  std::size_t lines = std::count(csv.begin(), csv.end(), '\n');
  CHECK(lines == 3 + 1 + 1);
  CHECK(csv.find("pooled") != std::string::npos);

  // identical rerun gives identical reports
  fs::path out2 = tmp.path / "out2";
  REQUIRE(run_cli("validate-ranking --config " + cfg.string() + " --out " +
                      out2.string(),
                  tmp.path)
              .exit_code == 0);
  CHECK(csv == read_file((out2 / "ranking_report.csv").string()));

  std::string text = read_file((out / "ranking_report.txt").string());
  CHECK(text.find("3/3") != std::string::npos);
}

TEST_CASE("training divergence flushes a truncated trace", "[cli]") {
  TempDir tmp;
  fs::path cfg = tmp.path / "diverge.cfg";
  write_file(cfg, synthetic_config("l2_coeff = 1e12\n"));
  // override the learning rate into divergence territory
  std::string text = read_file(cfg.string());
  text.replace(text.find("learning_rate = 0.02"),
               std::string("learning_rate = 0.02").size(),
               "learning_rate = 1e12");
  write_file(cfg, text);

  fs::path out = tmp.path / "out";
  CliResult res = run_cli("simulate --config " + cfg.string() + " --out " +
                              out.string(),
                          tmp.path);
  CHECK(res.exit_code == 5);
  CHECK(res.output.find("epoch") != std::string::npos);
  REQUIRE(fs::exists(out / "trace.csv"));
  std::istringstream in(read_file((out / "trace.csv").string()));
  SimulationTrace partial = read_trace_csv(in);
  CHECK(partial.truncated);
}

TEST_CASE("report aggregates traces", "[cli]") {
  TempDir tmp;
  fs::path cfg = tmp.path / "sim.cfg";
  write_file(cfg, synthetic_config(""));
  fs::path sim_out = tmp.path / "sim";
  REQUIRE(run_cli("simulate --config " + cfg.string() + " --out " +
                      sim_out.string(),
                  tmp.path)
              .exit_code == 0);

  fs::path rep_out = tmp.path / "rep";
  CliResult res = run_cli("report " + (sim_out / "trace.csv").string() +
                              " --delta 0.05 --delta 0.01 --out " +
                              rep_out.string(),
                          tmp.path);
  REQUIRE(res.exit_code == 0);
  CHECK(fs::exists(rep_out / "aggregate.csv"));
  CHECK(fs::exists(rep_out / "summary.txt"));
  std::string agg = read_file((rep_out / "aggregate.csv").string());
  CHECK(agg.find("iteration,runs,seen_count") == 0);
  // 3 iterations of data
  CHECK(std::count(agg.begin(), agg.end(), '\n') == 4);

  // schema mismatch is a data error naming the column
  fs::path broken = tmp.path / "broken.csv";
  write_file(broken,
             "run,iteration,seen_count,blind_spot,delta_s,delta_b,"
             "avg_discovery,avg_blind_decrease,wrong_name,bound_d05,"
             "bound_d01\n");
  CliResult bad =
      run_cli("report " + broken.string() + " --out " +
                  (tmp.path / "rep2").string(),
              tmp.path);
  CHECK(bad.exit_code == 4);
  CHECK(bad.output.find("error_e") != std::string::npos);
}
