#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <vector>

#include "json.hpp"
#include "xsam/autodiff/surface.hpp"

namespace xsam::harness {

struct IterationRecord {
  std::int64_t iter = 0;
  std::int64_t epoch = 0;
  double loss = 0.0;
  std::optional<double> alpha_star;
  double grad_norm = 0.0;
  double lr = 0.0;
  int clamps_triggered = 0;
};

/// Pass counts and per-iteration history of one run.
struct RunLedger {
  PassCount passes;
  std::vector<IterationRecord> per_iteration;
  std::int64_t wall_time_ms = 0;
  std::int64_t sgd_fallbacks = 0;
  std::int64_t degenerate_frames = 0;
  std::int64_t probe_failures = 0;
  std::int64_t alpha_refreshes = 0;

  std::int64_t total_passes() const { return passes.forwards + passes.backwards; }
};

inline nlohmann::json to_json(const RunLedger& l, bool with_iterations = true) {
  nlohmann::json j;
  j["forwards"] = l.passes.forwards;
  j["backwards"] = l.passes.backwards;
  j["iterations"] = l.per_iteration.size();
  j["wall_time_ms"] = l.wall_time_ms;
  j["sgd_fallbacks"] = l.sgd_fallbacks;
  j["degenerate_frames"] = l.degenerate_frames;
  j["probe_failures"] = l.probe_failures;
  j["alpha_refreshes"] = l.alpha_refreshes;
  if (with_iterations) {
    auto& rows = j["per_iteration"] = nlohmann::json::array();
    for (const auto& r : l.per_iteration) {
      rows.push_back({{"iter", r.iter},
                      {"epoch", r.epoch},
                      {"loss", r.loss},
                      {"alpha_star", r.alpha_star ? nlohmann::json(*r.alpha_star) : nlohmann::json(nullptr)},
                      {"grad_norm", r.grad_norm},
                      {"lr", r.lr},
                      {"clamps_triggered", r.clamps_triggered}});
    }
  }
  return j;
}

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  std::int64_t elapsed_ms() const {
    return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

}  // namespace xsam::harness
