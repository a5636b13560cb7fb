// Batch driver: trajectory | train | probe | verify | ledger.
//
// Exit codes: 0 ok, 2 config error, 3 numeric failure, 4 verification failure.

#include <CLI11.hpp>

#include <atomic>
#include <cstdio>
#include <iostream>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "xsam/harness/runs.hpp"

namespace {

using namespace xsam;
using namespace xsam::harness;

enum Exit { kOk = 0, kConfig = 2, kNumeric = 3, kVerification = 4 };

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  int jobs = 1;
  bool quiet = false;
};

std::mutex log_mutex;

void log(const Options& o, const std::string& msg) {
  if (o.quiet) return;
  std::lock_guard lock(log_mutex);
  std::cerr << msg << '\n';
}

void error(const std::string& msg) {
  std::lock_guard lock(log_mutex);
  std::cerr << "error: " << msg << '\n';
}

// Output directory of run i: --out (or the config's output_dir), with the
// experiment name appended when the batch holds several runs.
std::string run_dir(const Options& o, const ExperimentConfig& c, std::size_t batch_size) {
  fs::path base = o.out.empty() ? fs::path(c.output_dir) : fs::path(o.out);
  if (batch_size > 1) base /= c.name;
  return base.string();
}

int run_one(const std::string& command, const Options& o, ExperimentConfig c, std::size_t batch_size, int inner_jobs) {
  if (o.seed) c.seed = *o.seed;
  const std::string dir = run_dir(o, c, batch_size);
  try {
    if (command == "trajectory") {
      const auto r = run_trajectory(c, dir);
      const auto& end = r.endpoint();
      std::string pos;
      for (Eigen::Index i = 0; i < end.size(); ++i) pos += (i ? ", " : "") + csv::format(end[i]);
      log(o, c.name + ": endpoint (" + pos + ") loss " + csv::format(r.losses.back()) + " in " +
                 std::to_string(r.ledger.wall_time_ms) + " ms");
    } else if (command == "train") {
      const auto r = run_training(c, dir);
      const auto& last = r.metrics.back();
      log(o, c.name + ": epoch " + std::to_string(last.epoch) + " loss " + csv::format(last.train_loss) + " acc " +
                 csv::format(last.train_acc));
    } else if (command == "probe") {
      const auto r = run_probe(c, dir);
      for (const auto& n : r.notes) log(o, c.name + ": " + n);
      for (const auto& f : r.files) log(o, c.name + ": wrote " + f);
    } else if (command == "verify") {
      const auto rep = run_oracle(c, inner_jobs);
      write_json(rep.json, prepare_output_dir(dir) / "oracle_report.json");
      log(o, c.name + ": " + std::to_string(rep.passed) + "/" + std::to_string(rep.trials - rep.rejected) +
                 " trials verified, " + std::to_string(rep.rejected) + " rejected");
      if (rep.failed > 0) {
        error(c.name + ": " + std::to_string(rep.failed) + " trial(s) failed verification");
        return kVerification;
      }
    } else if (command == "ledger") {
      const auto rep = run_overhead(c, dir);
      log(o, c.name + ": extra forwards " + std::to_string(rep.extra_forwards) + ", overhead " +
                 csv::format(rep.measured_ratio) + " (predicted " + csv::format(rep.predicted_ratio) + ")");
      if (!rep.sam_exact) {
        error(c.name + ": SAM pass counts do not match (k+1) per iteration");
        return kVerification;
      }
    }
  } catch (const ConfigError& e) {
    error(c.name + ": " + e.what());
    return kConfig;
  } catch (const VerificationFailure& e) {
    error(c.name + ": " + e.what());
    return kVerification;
  } catch (const NumericError& e) {
    error(c.name + ": " + e.what());
    return kNumeric;
  } catch (const DegenerateGradient& e) {
    error(c.name + ": " + e.what());
    return kNumeric;
  } catch (const Error& e) {
    error(c.name + ": " + e.what());
    return kNumeric;
  }
  return kOk;
}

int dispatch(const std::string& command, const Options& o) {
  std::vector<ExperimentConfig> batch;
  try {
    batch = load_experiments(o.config);
  } catch (const ConfigError& e) {
    error(e.what());
    return kConfig;
  }
  if (batch.empty()) {
    error(o.config + ": empty batch");
    return kConfig;
  }
  // A single run gets the worker slots for its own inner parallelism.
  const int inner = batch.size() == 1 ? o.jobs : 1;
  std::vector<int> codes(batch.size(), kOk);
  parallel_for(batch.size(), o.jobs, [&](std::size_t i) { codes[i] = run_one(command, o, batch[i], batch.size(), inner); });
  int worst = kOk;
  for (int c : codes) worst = std::max(worst, c);
  return worst;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sharpness-aware optimization experiments"};
  app.require_subcommand(1);
  Options opts;
  const std::vector<std::pair<std::string, std::string>> commands{
      {"trajectory", "Optimizer path on a surface (trajectory.csv, ledger.json)"},
      {"train", "Epoch training (metrics.csv, checkpoint.txt, ledger.json)"},
      {"probe", "Loss-surface probes around a checkpoint or start point"},
      {"verify", "Batch check of the quadratic-model claims (oracle_report.json)"},
      {"ledger", "XSAM vs SAM pass-count overhead (overhead.json)"},
  };
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", opts.config, "Experiment JSON (object or array of objects)")->required();
    sub->add_option("--seed", opts.seed, "Override the config seed");
    sub->add_option("--out", opts.out, "Override the output directory");
    sub->add_option("--jobs", opts.jobs, "Worker threads")->check(CLI::PositiveNumber);
    sub->add_flag("--quiet", opts.quiet, "Only report errors");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }
  for (const auto& [name, help] : commands) {
    if (app.got_subcommand(name)) return dispatch(name, opts);
  }
  return kConfig;
}
