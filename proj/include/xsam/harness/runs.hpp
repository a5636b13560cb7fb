#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <memory>
#include <map>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "xsam/autodiff/mlp.hpp"
#include "xsam/csv.hpp"
#include "xsam/harness/checkpoint.hpp"
#include "xsam/harness/config.hpp"
#include "xsam/harness/ledger.hpp"
#include "xsam/landscapes/blobs.hpp"
#include "xsam/landscapes/mixture.hpp"
#include "xsam/landscapes/quadratic.hpp"
#include "xsam/optimizers/step.hpp"
#include "xsam/oracle/prop1.hpp"
#include "xsam/probes/directional.hpp"
#include "xsam/probes/flatness.hpp"
#include "xsam/probes/plane.hpp"

namespace xsam::harness {

namespace fs = std::filesystem;

/// Runs fn(i) for i in [0, n) on up to `jobs` threads. The first exception
/// (lowest index) is rethrown after all workers finish.
inline void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, jobs)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

// ---------------------------------------------------------------- surfaces

struct BuiltSurface {
  std::unique_ptr<LossSurface> surface;
  const MlpSurface* mlp = nullptr;  // set when the surface is an MLP
  ParamVector start;
};

inline Matrix matrix_from_rows(const std::vector<std::vector<double>>& rows, const char* what) {
  const auto n = static_cast<Eigen::Index>(rows.size());
  Matrix m(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (static_cast<Eigen::Index>(rows[static_cast<std::size_t>(i)].size()) != n) {
      throw ConfigError(std::string(what) + " must be square");
    }
    for (Eigen::Index j = 0; j < n; ++j) m(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  }
  return m;
}

inline ParamVector vector_from(const std::vector<double>& v) {
  return Eigen::Map<const ParamVector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline BuiltSurface build_surface(const ExperimentConfig& c) {
  BuiltSurface out;
  const SurfaceConfig& s = c.surface;
  if (s.type == "mixture") {
    out.surface = std::make_unique<MixtureSurface>(Gauss2Mixture{}, s.sigma_floor);
    out.start = ParamVector(2);
    out.start << -6.0, 10.0;
  } else if (s.type == "quadratic") {
    QuadraticSpec q;
    if (!s.hessian.empty()) {
      q.hessian = matrix_from_rows(s.hessian, "surface.hessian");
    } else {
      q.hessian = make_quadratic(s.dim, s.eig_range.first, s.eig_range.second, s.quad_seed).spec.hessian;
    }
    const Eigen::Index n = q.hessian.rows();
    q.center = s.center.empty() ? ParamVector::Zero(n) : vector_from(s.center);
    if (q.center.size() != n) throw ConfigError("surface.center has the wrong length");
    q.offset = s.offset;
    out.surface = std::make_unique<QuadraticSurface>(q);
    out.start = ParamVector::Zero(n);
  } else if (s.type == "mlp") {
    SyntheticDataset ds = s.dataset_csv.empty()
                              ? make_blobs(s.classes, s.features, s.samples, s.spread, s.data_seed, s.batch_size)
                              : read_dataset_csv(s.dataset_csv, s.batch_size);
    if (s.mlp.layer_widths.front() != ds.dims()) {
      throw ConfigError("surface.mlp input width " + std::to_string(s.mlp.layer_widths.front()) +
                        " does not match dataset features " + std::to_string(ds.dims()));
    }
    auto mlp = std::make_unique<MlpSurface>(s.mlp, ds.to_mlp_data(), ds.batch_size);
    out.start = s.mlp.init(c.seed);
    out.mlp = mlp.get();
    out.surface = std::move(mlp);
  } else {
    throw ConfigError("unknown surface type '" + s.type + "'");
  }
  if (!c.start.empty()) {
    if (static_cast<Eigen::Index>(c.start.size()) != out.surface->dim()) {
      throw ConfigError("start has " + std::to_string(c.start.size()) + " entries, surface dimension is " +
                        std::to_string(out.surface->dim()));
    }
    out.start = vector_from(c.start);
  }
  return out;
}

// ---------------------------------------------------------------- optimizer loop

/// Thrown when a run diverges; carries the last finite parameters.
class Divergence : public NumericError {
 public:
  Divergence(const std::string& what, ParamVector last, std::int64_t iter)
      : NumericError(what), last_(std::move(last)), iter_(iter) {}
  const ParamVector& last_finite() const { return last_; }
  std::int64_t iter() const { return iter_; }

 private:
  ParamVector last_;
  std::int64_t iter_;
};

struct StepEvent {
  const IterationInfo& info;
  const StepResult& step;
  const ParamVector& before;
  const ParamVector& after;
  double lr;
};
using StepHook = std::function<void(const StepEvent&)>;

/// Runs `total` iterations, cycling batches; epoch = iter / batch_count.
/// On a non-finite loss, gradient or update throws Divergence holding the
/// last finite θ.
inline ParamVector optimize(LossSurface& surface, ParamVector theta, const OptimizerConfig& config,
                            std::int64_t total, RunLedger& ledger, const StepHook& hook = {}) {
  SharpnessOptimizer opt(config, surface.dim());
  const std::int64_t batches = surface.batch_count();
  for (std::int64_t t = 0; t < total; ++t) {
    const IterationInfo info{t, t / batches, t % batches == 0};
    surface.set_batch(t % batches);
    const double lr = lr_at(config.lr_schedule, config.lr0, t, total);
    StepResult step;
    ParamVector next;
    try {
      step = opt.step(surface, theta, info, ledger.passes);
      next = opt.apply(theta, step, lr);
    } catch (const NumericError& e) {
      throw Divergence(std::string(e.what()) + " at iteration " + std::to_string(t), theta, t);
    }
    IterationRecord rec{t, info.epoch, step.loss_at_theta, step.alpha_star, step.trail.grads.front().norm(), lr, 0};
    if (surface.project(next)) rec.clamps_triggered = 1;
    ledger.per_iteration.push_back(rec);
    ledger.sgd_fallbacks += step.sgd_fallback;
    ledger.degenerate_frames += step.frame_degenerate;
    ledger.probe_failures += step.probe_failed;
    ledger.alpha_refreshes += step.alpha_refreshed;
    if (hook) hook(StepEvent{info, step, theta, next, lr});
    theta = std::move(next);
  }
  return theta;
}

// ---------------------------------------------------------------- outputs

inline fs::path prepare_output_dir(const std::string& dir) {
  fs::path p(dir.empty() ? "." : dir);
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec || !fs::is_directory(p)) throw ConfigError("output directory '" + dir + "' is not writable");
  return p;
}

inline void write_json(const nlohmann::json& j, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

inline Checkpoint make_checkpoint(const ExperimentConfig& c, const ParamVector& theta) {
  Checkpoint ck;
  ck.values = theta;
  if (c.surface.type == "mlp") ck.layer_widths = c.surface.mlp.layer_widths;
  ck.seed = c.seed;
  ck.rule = to_string(c.optimizer.rule);
  return ck;
}

inline std::string optional_cell(const std::optional<double>& v) {
  return v ? csv::format(*v) : std::string();
}

// ---------------------------------------------------------------- trajectory

struct TrajectoryResult {
  std::vector<ParamVector> thetas;  // θ_0 .. θ_T
  std::vector<double> losses;       // L(θ_t)
  RunLedger ledger;

  const ParamVector& endpoint() const { return thetas.back(); }
};

inline void write_trajectory_csv(const TrajectoryResult& r, const std::string& surface_type, const fs::path& path) {
  const Eigen::Index dim = r.thetas.front().size();
  std::vector<std::string> header{"iter"};
  if (surface_type == "mixture") {
    header.insert(header.end(), {"mu", "sigma"});
  } else {
    for (Eigen::Index i = 0; i < dim; ++i) header.push_back("x" + std::to_string(i));
  }
  header.push_back("loss");
  csv::Writer w(path.string(), header);
  for (std::size_t t = 0; t < r.losses.size(); ++t) {
    std::vector<double> row{static_cast<double>(t)};
    for (Eigen::Index i = 0; i < dim; ++i) row.push_back(r.thetas[t][i]);
    row.push_back(r.losses[t]);
    w.row_values(row);
  }
}

/// Optimizer path from the configured start for `iterations` steps. Writes
/// trajectory.csv and ledger.json when `out_dir` is non-empty; a divergence
/// additionally leaves divergence_checkpoint.txt before rethrowing.
inline TrajectoryResult run_trajectory(const ExperimentConfig& c, const std::string& out_dir = "") {
  c.optimizer.validate();
  if (c.iterations < 0) throw ConfigError("iterations must be >= 0");
  BuiltSurface built = build_surface(c);
  LossSurface& surface = *built.surface;
  const fs::path dir = out_dir.empty() ? fs::path() : prepare_output_dir(out_dir);

  TrajectoryResult r;
  Stopwatch clock;
  ParamVector theta = built.start;
  surface.project(theta);
  r.thetas.push_back(theta);
  auto flush = [&] {
    r.ledger.wall_time_ms = clock.elapsed_ms();
    if (dir.empty()) return;
    write_trajectory_csv(r, c.surface.type, dir / "trajectory.csv");
    write_json(to_json(r.ledger), dir / "ledger.json");
  };
  try {
    optimize(surface, theta, c.optimizer, c.iterations, r.ledger, [&](const StepEvent& e) {
      r.losses.push_back(e.step.loss_at_theta);
      r.thetas.push_back(e.after);
    });
  } catch (const Divergence& e) {
    r.thetas.resize(r.losses.size());
    flush();
    if (!dir.empty()) write_checkpoint(make_checkpoint(c, e.last_finite()), (dir / "divergence_checkpoint.txt").string());
    throw;
  }
  surface.set_batch(0);
  r.losses.push_back(surface.value(r.thetas.back()));
  flush();
  return r;
}

// ---------------------------------------------------------------- training

struct MetricsRow {
  std::int64_t epoch = 0;
  double train_loss = 0.0;
  double train_acc = std::numeric_limits<double>::quiet_NaN();
  std::optional<double> alpha_star;
  double lr = 0.0;
};

struct AlphaRow {
  std::int64_t epoch;
  double alpha;
  double loss;
};

struct TrainingResult {
  std::vector<MetricsRow> metrics;
  std::vector<AlphaRow> alpha_rows;  // probe curve at every α* refresh
  ParamVector theta;
  RunLedger ledger;
};

inline void write_metrics_csv(const std::vector<MetricsRow>& rows, const fs::path& path) {
  csv::Writer w(path.string(), {"epoch", "train_loss", "train_acc", "alpha_star", "lr"});
  for (const auto& m : rows) {
    w.row(std::to_string(m.epoch), csv::format(m.train_loss), csv::format(m.train_acc), optional_cell(m.alpha_star),
          csv::format(m.lr));
  }
}

inline void write_alpha_csv(const std::vector<AlphaRow>& rows, const fs::path& path) {
  csv::Writer w(path.string(), {"epoch", "alpha", "loss"});
  for (const auto& a : rows) w.row(std::to_string(a.epoch), csv::format(a.alpha), csv::format(a.loss));
}

/// `epochs` passes over every batch. Per-epoch metrics use the whole dataset
/// (MLP) or the surface itself (analytic, accuracy NaN).
inline TrainingResult run_training(const ExperimentConfig& c, const std::string& out_dir = "") {
  c.optimizer.validate();
  if (c.epochs < 1) throw ConfigError("epochs must be >= 1");
  if (c.snapshot_every < 0) throw ConfigError("snapshot_every must be >= 0");
  BuiltSurface built = build_surface(c);
  LossSurface& surface = *built.surface;
  const fs::path dir = out_dir.empty() ? fs::path() : prepare_output_dir(out_dir);
  const std::int64_t batches = surface.batch_count();

  TrainingResult r;
  Stopwatch clock;
  ParamVector theta = built.start;
  surface.project(theta);
  auto epoch_metrics = [&](std::int64_t epoch, const ParamVector& p, std::optional<double> alpha, double lr) {
    MetricsRow m{epoch, 0.0, std::numeric_limits<double>::quiet_NaN(), alpha, lr};
    if (built.mlp) {
      m.train_loss = built.mlp->dataset_loss(p);
      m.train_acc = built.mlp->dataset_accuracy(p);
    } else {
      m.train_loss = surface.value(p);
    }
    return m;
  };
  auto flush = [&] {
    r.ledger.wall_time_ms = clock.elapsed_ms();
    if (dir.empty()) return;
    write_metrics_csv(r.metrics, dir / "metrics.csv");
    if (c.alpha_landscape) write_alpha_csv(r.alpha_rows, dir / "alpha.csv");
    write_json(to_json(r.ledger), dir / "ledger.json");
  };
  try {
    r.theta = optimize(surface, theta, c.optimizer, c.epochs * batches, r.ledger, [&](const StepEvent& e) {
      if (c.alpha_landscape && e.step.search) {
        for (std::size_t i = 0; i < e.step.search->alphas.size(); ++i) {
          r.alpha_rows.push_back({e.info.epoch, e.step.search->alphas[i], e.step.search->losses[i]});
        }
      }
      if ((e.info.iter + 1) % batches != 0) return;
      const MetricsRow m = epoch_metrics(e.info.epoch, e.after, e.step.alpha_star, e.lr);
      if (!std::isfinite(m.train_loss)) {
        throw Divergence("non-finite training loss at epoch " + std::to_string(e.info.epoch), e.before, e.info.iter);
      }
      r.metrics.push_back(m);
      if (!dir.empty() && c.snapshot_every > 0 && (e.info.epoch + 1) % c.snapshot_every == 0) {
        write_checkpoint(make_checkpoint(c, e.after),
                         (dir / ("checkpoint_epoch_" + std::to_string(e.info.epoch) + ".txt")).string());
      }
    });
  } catch (const Divergence& e) {
    r.theta = e.last_finite();
    flush();
    if (!dir.empty()) write_checkpoint(make_checkpoint(c, e.last_finite()), (dir / "divergence_checkpoint.txt").string());
    throw;
  }
  flush();
  if (!dir.empty()) write_checkpoint(make_checkpoint(c, r.theta), (dir / "checkpoint.txt").string());
  return r;
}

// ---------------------------------------------------------------- probes

struct ProbeOutcome {
  std::vector<std::string> files;
  std::vector<std::string> notes;  // degenerate frames and other non-fatal issues
  PassCount passes;
};

/// Probes around θ (checkpoint if given, else the configured start). g₁ is
/// the gradient after one ascent step of radius optimizer.rho along g₀.
inline ProbeOutcome run_probe(const ExperimentConfig& c, const std::string& out_dir) {
  if (c.probes.empty()) throw ConfigError("probe: no probe requests");
  BuiltSurface built = build_surface(c);
  LossSurface& surface = *built.surface;
  const fs::path dir = prepare_output_dir(out_dir);
  ParamVector theta = built.start;
  if (!c.checkpoint.empty()) {
    theta = read_checkpoint(c.checkpoint).values;
    require_dim(theta, surface.dim(), "checkpoint");
  }
  surface.set_batch(0);

  ProbeOutcome out;
  PassCount& count = out.passes;
  const double rho = c.optimizer.rho, rho_m = c.optimizer.rho_m;
  const AscentTrail trail = ascend(surface, theta, 1, rho, count);
  const GradVector& g0 = trail.grads.front();
  const GradVector& g1 = trail.grads.back();

  std::map<std::string, int> seen;
  auto file_for = [&](const std::string& type) {
    const int n = seen[type]++;
    const fs::path p = dir / (n == 0 ? type + ".csv" : type + "_" + std::to_string(n) + ".csv");
    out.files.push_back(p.string());
    return p;
  };

  for (const ProbeRequest& req : c.probes) {
    try {
      if (req.type == "grid") {
        const PlaneBasis basis = plane_basis(theta, g0, g1);
        const auto xr = req.x_range.value_or(std::pair{-2.0 * rho_m, 2.0 * rho_m});
        const auto yr = req.y_range.value_or(std::pair{-2.0 * rho_m, 2.0 * rho_m});
        const SurfaceGrid g = surface_grid(surface, basis, xr, yr, req.resolution, count);
        csv::Writer w(file_for("grid").string(), {"x", "y", "loss"});
        for (int i = 0; i < req.resolution.first; ++i) {
          for (int j = 0; j < req.resolution.second; ++j) w.row_values({g.xs[i], g.ys[j], g.losses(i, j)});
        }
        if (g.nonfinite_cells > 0) out.notes.push_back("grid: " + std::to_string(g.nonfinite_cells) + " non-finite cells");
      } else if (req.type == "gap") {
        const std::vector<double> radii =
            req.rho_m_list.empty() ? std::vector<double>{rho_m} : req.rho_m_list;
        const auto gaps = directional_loss_gap(surface, theta, g0, g1, radii, count);
        csv::Writer w(file_for("gap").string(), {"rho_m", "gap"});
        for (const auto& p : gaps) w.row_values({p.rho_m, p.gap});
      } else if (req.type == "alpha") {
        const SlerpFrame frame = make_frame(trail.points.back() - trail.origin(), g1);
        if (frame.degenerate()) throw DegenerateFrame("alpha: ascent step parallel to g1");
        const AlphaLandscape l = alpha_landscape(surface, theta, frame, rho_m, c.optimizer.alpha_range_a,
                                                 c.optimizer.alpha_samples, count, req.normalize);
        csv::Writer w(file_for("alpha").string(), {"epoch", "alpha", "loss"});
        for (std::size_t i = 0; i < l.alphas.size(); ++i) w.row("0", csv::format(l.alphas[i]), csv::format(l.losses[i]));
      } else if (req.type == "sharpness") {
        if (req.radii.empty()) throw ConfigError("sharpness probe needs radii");
        const auto curve = average_sharpness(surface, theta, req.radii, req.n_directions, req.mode, c.seed, count);
        csv::Writer w(file_for("sharpness").string(), {"radius", "mean_delta", "mode", "n_directions"});
        for (const auto& p : curve) {
          w.row(csv::format(p.radius), csv::format(p.mean_delta_loss), to_string(req.mode),
                std::to_string(req.n_directions));
        }
      } else if (req.type == "spectrum") {
        const auto top = hessian_spectrum(surface, theta, req.top_k);
        csv::Writer w(file_for("spectrum").string(), {"index", "eigenvalue"});
        for (std::size_t i = 0; i < top.size(); ++i) w.row(std::to_string(i + 1), csv::format(top[i]));
      } else {
        throw ConfigError("unknown probe type '" + req.type + "'");
      }
    } catch (const DegenerateFrame& e) {
      out.notes.push_back(req.type + ": " + e.what());
    }
  }
  return out;
}

// ---------------------------------------------------------------- oracle

/// Per-trial seed derived from the batch seed (splitmix64 finalizer).
inline std::uint64_t trial_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline nlohmann::json matrix_json(const Matrix& m) {
  auto rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    auto row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

inline nlohmann::json vector_json(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

struct OracleReport {
  nlohmann::json json;
  std::size_t trials = 0;
  std::size_t rejected = 0;
  std::size_t passed = 0;
  std::size_t failed = 0;
};

/// Explicit trials first, then `oracle.trials` seeded random ones.
inline OracleReport run_oracle(const ExperimentConfig& c, int jobs = 1) {
  const OracleConfig& o = c.oracle;
  if (o.trials < 0) throw ConfigError("oracle.trials must be >= 0");
  if (o.dim_min < 2 || o.dim_max < o.dim_min) throw ConfigError("oracle: need 2 <= dim_min <= dim_max");
  if (!(o.eig_min > 0.0) || o.eig_max < o.eig_min) throw ConfigError("oracle: need 0 < eig_min <= eig_max");
  if (!(o.rho_lo > 0.0) || o.rho_hi < o.rho_lo) throw ConfigError("oracle: need 0 < rho_lo <= rho_hi");

  std::vector<oracle::TrialInputs> inputs;
  for (const auto& e : o.explicit_trials) {
    const Matrix h = matrix_from_rows(e.hessian, "oracle.explicit_trials.hessian");
    if (static_cast<Eigen::Index>(e.g0.size()) != h.rows()) throw ConfigError("oracle: g0 length does not match H");
    inputs.push_back({h, vector_from(e.g0), e.rho});
  }
  const oracle::RandomTrialSpec spec{o.dim_min, o.dim_max, o.eig_min, o.eig_max, o.rho_lo, o.rho_hi};
  for (int i = 0; i < o.trials; ++i) inputs.push_back(oracle::random_trial(spec, trial_seed(c.seed, i)));

  Stopwatch clock;
  std::vector<oracle::TrialOutcome> outcomes(inputs.size());
  parallel_for(inputs.size(), jobs, [&](std::size_t i) {
    outcomes[i] = oracle::evaluate_trial(i, inputs[i].H, inputs[i].g0, inputs[i].rho);
  });

  OracleReport rep;
  rep.trials = inputs.size();
  auto failures = nlohmann::json::array();
  auto rejections = nlohmann::json::array();
  std::size_t p1_ok = 0, p2_ok = 0, signs_ok = 0;
  std::vector<double> crossings;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    const auto& t = outcomes[i];
    if (t.rejected) {
      ++rep.rejected;
      rejections.push_back({{"index", i}, {"reason", t.reject_reason}});
      continue;
    }
    p1_ok += t.part1.verified;
    p2_ok += t.part2.alpha_witness.has_value();
    signs_ok += t.signs.holds();
    if (t.part1.rho0) crossings.push_back(*t.part1.rho0);
    if (t.passed()) {
      ++rep.passed;
      continue;
    }
    ++rep.failed;
    nlohmann::json f;
    f["index"] = i;
    f["hessian"] = matrix_json(inputs[i].H);
    f["g0"] = vector_json(inputs[i].g0);
    f["rho"] = inputs[i].rho;
    f["part1_verified"] = t.part1.verified;
    f["rho0"] = t.part1.rho0 ? nlohmann::json(*t.part1.rho0) : nlohmann::json(nullptr);
    f["part2_witness"] = t.part2.alpha_witness ? nlohmann::json(*t.part2.alpha_witness) : nlohmann::json(nullptr);
    f["cauchy_schwarz_gap"] = t.signs.cauchy_schwarz_gap;
    f["chebyshev_gap_1"] = t.signs.chebyshev_gap_1;
    f["chebyshev_gap_2"] = t.signs.chebyshev_gap_2;
    failures.push_back(f);
  }
  nlohmann::json& j = rep.json;
  j["seed"] = c.seed;
  j["trials"] = rep.trials;
  j["rejected"] = rep.rejected;
  j["evaluated"] = rep.trials - rep.rejected;
  j["passed"] = rep.passed;
  j["failed"] = rep.failed;
  j["part1_verified"] = p1_ok;
  j["part2_witnessed"] = p2_ok;
  j["sign_terms_hold"] = signs_ok;
  if (!crossings.empty()) {
    std::sort(crossings.begin(), crossings.end());
    j["crossing_radius"] = {{"min", crossings.front()},
                            {"median", crossings[crossings.size() / 2]},
                            {"max", crossings.back()}};
  }
  j["failures"] = failures;
  j["rejections"] = rejections;
  j["wall_time_ms"] = clock.elapsed_ms();
  return rep;
}

// ---------------------------------------------------------------- overhead

struct OverheadReport {
  RunLedger xsam;
  RunLedger sam;
  std::int64_t iterations = 0;
  std::int64_t extra_forwards = 0;
  double measured_ratio = 0.0;
  double predicted_ratio = 0.0;
  bool sam_exact = false;  // SAM forwards = backwards = (k+1)·iterations (+ slope_m forwards)

  nlohmann::json to_json() const {
    return {{"iterations", iterations},
            {"xsam", {{"forwards", xsam.passes.forwards}, {"backwards", xsam.passes.backwards},
                      {"alpha_refreshes", xsam.alpha_refreshes}}},
            {"sam", {{"forwards", sam.passes.forwards}, {"backwards", sam.passes.backwards}}},
            {"extra_forwards", extra_forwards},
            {"measured_ratio", measured_ratio},
            {"predicted_ratio", predicted_ratio},
            {"sam_exact", sam_exact}};
  }
};

/// Runs the configured XSAM and the same setup under SAM, then compares
/// pass counts. MLP surfaces run epochs × batches iterations, analytic ones
/// `iterations`.
inline OverheadReport run_overhead(const ExperimentConfig& c, const std::string& out_dir = "") {
  if (c.optimizer.rule != Rule::xsam) throw ConfigError("ledger: optimizer.rule must be xsam");
  c.optimizer.validate();
  BuiltSurface built = build_surface(c);
  LossSurface& surface = *built.surface;
  const std::int64_t total = c.surface.type == "mlp" ? c.epochs * surface.batch_count() : c.iterations;
  if (total < 1) throw ConfigError("ledger: need at least one iteration");

  OverheadReport rep;
  rep.iterations = total;
  OptimizerConfig sam = c.optimizer;
  sam.rule = Rule::sam;
  ParamVector start = built.start;
  surface.project(start);
  Stopwatch clock;
  optimize(surface, start, c.optimizer, total, rep.xsam);
  rep.xsam.wall_time_ms = clock.elapsed_ms();
  Stopwatch clock2;
  optimize(surface, start, sam, total, rep.sam);
  rep.sam.wall_time_ms = clock2.elapsed_ms();

  const std::int64_t k1 = c.optimizer.k + 1;
  const std::int64_t slope_fwd = c.optimizer.scale_strategy == ScaleStrategy::slope_m ? total : 0;
  rep.sam_exact = rep.sam.passes.forwards == k1 * total + slope_fwd && rep.sam.passes.backwards == k1 * total;
  rep.extra_forwards = rep.xsam.passes.forwards - rep.sam.passes.forwards;
  rep.measured_ratio = static_cast<double>(rep.extra_forwards) /
                       static_cast<double>(rep.sam.passes.forwards + rep.sam.passes.backwards);
  rep.predicted_ratio = static_cast<double>(rep.xsam.alpha_refreshes * c.optimizer.alpha_samples) /
                        static_cast<double>(total * 2 * k1);
  if (!out_dir.empty()) write_json(rep.to_json(), prepare_output_dir(out_dir) / "overhead.json");
  return rep;
}

}  // namespace xsam::harness
