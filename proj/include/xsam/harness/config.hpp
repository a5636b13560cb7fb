#pragma once

// Experiment configuration: one JSON document per experiment.
//
// Parsing is strict: unknown keys and wrong types are ConfigErrors naming the
// JSON pointer of the offending field. to_json() writes every field, so
// to_json(parse(x)) is the canonical form of x.

#include <cctype>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "xsam/autodiff/mlp.hpp"
#include "xsam/optimizers/config.hpp"
#include "xsam/probes/flatness.hpp"

namespace xsam::harness {

using nlohmann::json;

struct SurfaceConfig {
  std::string type = "mixture";  // mixture | quadratic | mlp
  // mixture
  double sigma_floor = 0.5;
  // quadratic: explicit H or a random instance
  std::vector<std::vector<double>> hessian;
  int dim = 2;
  std::pair<double, double> eig_range{1.0, 1.0};
  std::uint64_t quad_seed = 0;
  std::vector<double> center;
  double offset = 0.0;
  // mlp
  MlpSpec mlp{{2, 16, 2}, Activation::tanh, MlpLoss::cross_entropy};
  int classes = 2;
  int features = 2;
  int samples = 256;
  double spread = 0.5;
  std::uint64_t data_seed = 0;
  std::string dataset_csv;
  int batch_size = 32;

  friend bool operator==(const SurfaceConfig&, const SurfaceConfig&) = default;
};

struct ProbeRequest {
  std::string type;  // grid | gap | alpha | sharpness | spectrum
  std::pair<int, int> resolution{101, 101};
  std::optional<std::pair<double, double>> x_range;  // default ±2ρ_m
  std::optional<std::pair<double, double>> y_range;
  std::vector<double> rho_m_list;
  bool normalize = false;
  std::vector<double> radii;
  int n_directions = 250;
  PerturbationMode mode = PerturbationMode::element_wise;
  int top_k = 5;

  friend bool operator==(const ProbeRequest&, const ProbeRequest&) = default;
};

struct OracleConfig {
  int trials = 1000;
  int dim_min = 2;
  int dim_max = 10;
  double eig_min = 0.1;
  double eig_max = 10.0;
  double rho_lo = 1e-3;
  double rho_hi = 1.0;
  struct Explicit {
    std::vector<std::vector<double>> hessian;
    std::vector<double> g0;
    double rho = 0.1;
    friend bool operator==(const Explicit&, const Explicit&) = default;
  };
  std::vector<Explicit> explicit_trials;

  friend bool operator==(const OracleConfig&, const OracleConfig&) = default;
};

struct ExperimentConfig {
  std::string name = "experiment";
  std::uint64_t seed = 0;
  std::string output_dir = "out";
  SurfaceConfig surface;
  OptimizerConfig optimizer;
  std::vector<double> start;  // empty: origin (analytic) or seeded init (mlp)
  std::string checkpoint;     // probe: load θ from here when set
  std::int64_t iterations = 400;
  std::int64_t epochs = 1;
  std::int64_t snapshot_every = 0;
  bool alpha_landscape = false;  // training: dump the α probe curve at each refresh
  std::vector<ProbeRequest> probes;
  OracleConfig oracle;
};

inline bool operator==(const OptimizerConfig& a, const OptimizerConfig& b) {
  return a.rule == b.rule && a.k == b.k && a.rho == b.rho && a.rho_m == b.rho_m &&
         a.alpha_range_a == b.alpha_range_a && a.alpha_samples == b.alpha_samples && a.t_alpha == b.t_alpha &&
         a.initial_alpha == b.initial_alpha && a.fixed_alpha == b.fixed_alpha &&
         a.scale_strategy == b.scale_strategy && a.lr_schedule == b.lr_schedule && a.lr0 == b.lr0 &&
         a.momentum == b.momentum && a.weight_decay == b.weight_decay && a.seed == b.seed;
}

inline bool operator==(const ExperimentConfig& a, const ExperimentConfig& b) {
  return a.name == b.name && a.seed == b.seed && a.output_dir == b.output_dir && a.surface == b.surface &&
         a.optimizer == b.optimizer && a.start == b.start && a.checkpoint == b.checkpoint &&
         a.iterations == b.iterations && a.epochs == b.epochs && a.snapshot_every == b.snapshot_every &&
         a.alpha_landscape == b.alpha_landscape && a.probes == b.probes && a.oracle == b.oracle;
}

namespace detail {

// Reads fields of one JSON object, tracking its pointer path and rejecting
// keys that were never consumed.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + ": expected an object");
  }

  std::string where(const std::string& key = "") const {
    const std::string p = key.empty() ? path_ : path_ + "/" + key;
    return p.empty() ? "/" : p;
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  template <typename T>
  void read(const std::string& key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(where(key) + ": " + e.what());
    }
  }

  void mark(const std::string& key) { seen_.insert(key); }

  const json& child(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError(where(it.key()) + ": unknown key");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

template <typename Fn>
auto guarded(const std::string& path, Fn&& fn) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    if (msg.rfind("/", 0) == 0) throw;
    throw ConfigError(path + ": " + msg);
  }
}

inline std::string refresh_to_string(const AlphaRefresh& r) {
  switch (r.kind) {
    case AlphaRefresh::Kind::per_epoch:
      return "epoch";
    case AlphaRefresh::Kind::never:
      return "never";
    case AlphaRefresh::Kind::every:
      break;
  }
  return std::to_string(r.period);
}

}  // namespace detail

inline OptimizerConfig parse_optimizer(const json& j, const std::string& path) {
  OptimizerConfig c;
  detail::ObjectReader r(j, path);
  std::string rule = to_string(c.rule), scale = to_string(c.scale_strategy), sched = to_string(c.lr_schedule);
  r.read("rule", rule);
  r.read("k", c.k);
  r.read("rho", c.rho);
  r.read("rho_m", c.rho_m);
  r.read("alpha_range_a", c.alpha_range_a);
  r.read("alpha_samples", c.alpha_samples);
  if (r.has("t_alpha")) {
    const json& t = r.child("t_alpha");
    if (t.is_string() && t == "epoch") {
      c.t_alpha = AlphaRefresh::per_epoch();
    } else if (t.is_string() && t == "never") {
      c.t_alpha = AlphaRefresh::never();
    } else if (t.is_number_integer() && t.get<std::int64_t>() >= 1) {
      c.t_alpha = AlphaRefresh::every(t.get<std::int64_t>());
    } else {
      throw ConfigError(r.where("t_alpha") + ": expected \"epoch\", \"never\" or a positive integer");
    }
  }
  if (r.has("initial_alpha") && !j.at("initial_alpha").is_null()) {
    double a = 0.0;
    r.read("initial_alpha", a);
    c.initial_alpha = a;
  } else {
    r.mark("initial_alpha");
  }
  r.read("fixed_alpha", c.fixed_alpha);
  r.read("scale_strategy", scale);
  r.read("lr_schedule", sched);
  r.read("lr0", c.lr0);
  r.read("momentum", c.momentum);
  r.read("weight_decay", c.weight_decay);
  r.read("seed", c.seed);
  r.finish();
  detail::guarded(r.where("rule"), [&] { c.rule = parse_rule(rule); });
  detail::guarded(r.where("scale_strategy"), [&] { c.scale_strategy = parse_scale(scale); });
  detail::guarded(r.where("lr_schedule"), [&] { c.lr_schedule = parse_schedule(sched); });
  detail::guarded(r.where(), [&] { c.validate(); });
  return c;
}

inline json to_json(const OptimizerConfig& c) {
  json j;
  j["rule"] = to_string(c.rule);
  j["k"] = c.k;
  j["rho"] = c.rho;
  j["rho_m"] = c.rho_m;
  j["alpha_range_a"] = c.alpha_range_a;
  j["alpha_samples"] = c.alpha_samples;
  if (c.t_alpha.kind == AlphaRefresh::Kind::every) {
    j["t_alpha"] = c.t_alpha.period;
  } else {
    j["t_alpha"] = detail::refresh_to_string(c.t_alpha);
  }
  j["initial_alpha"] = c.initial_alpha ? json(*c.initial_alpha) : json(nullptr);
  j["fixed_alpha"] = c.fixed_alpha;
  j["scale_strategy"] = to_string(c.scale_strategy);
  j["lr_schedule"] = to_string(c.lr_schedule);
  j["lr0"] = c.lr0;
  j["momentum"] = c.momentum;
  j["weight_decay"] = c.weight_decay;
  j["seed"] = c.seed;
  return j;
}

inline SurfaceConfig parse_surface(const json& j, const std::string& path) {
  SurfaceConfig s;
  detail::ObjectReader r(j, path);
  r.read("type", s.type);
  if (s.type == "mixture") {
    r.read("sigma_floor", s.sigma_floor);
  } else if (s.type == "quadratic") {
    r.read("hessian", s.hessian);
    r.read("dim", s.dim);
    r.read("eig_range", s.eig_range);
    r.read("seed", s.quad_seed);
    r.read("center", s.center);
    r.read("offset", s.offset);
    if (s.hessian.empty() && s.dim < 2) throw ConfigError(r.where("dim") + ": must be >= 2");
  } else if (s.type == "mlp") {
    std::string act = to_string(s.mlp.activation), loss = to_string(s.mlp.loss);
    r.read("layer_widths", s.mlp.layer_widths);
    r.read("activation", act);
    r.read("loss", loss);
    r.read("classes", s.classes);
    r.read("features", s.features);
    r.read("samples", s.samples);
    r.read("spread", s.spread);
    r.read("data_seed", s.data_seed);
    r.read("dataset_csv", s.dataset_csv);
    r.read("batch_size", s.batch_size);
    if (act == "tanh") {
      s.mlp.activation = Activation::tanh;
    } else if (act == "relu") {
      s.mlp.activation = Activation::relu;
    } else {
      throw ConfigError(r.where("activation") + ": expected tanh or relu");
    }
    if (loss == "cross_entropy") {
      s.mlp.loss = MlpLoss::cross_entropy;
    } else if (loss == "mse") {
      s.mlp.loss = MlpLoss::mse;
    } else {
      throw ConfigError(r.where("loss") + ": expected cross_entropy or mse");
    }
    detail::guarded(r.where("layer_widths"), [&] { s.mlp.validate(); });
    if (s.batch_size < 1) throw ConfigError(r.where("batch_size") + ": must be positive");
    if (s.dataset_csv.empty() && s.samples % s.batch_size != 0) {
      throw ConfigError(r.where("batch_size") + ": must divide samples");
    }
  } else {
    throw ConfigError(r.where("type") + ": unknown surface '" + s.type + "' (mixture, quadratic, mlp)");
  }
  r.finish();
  return s;
}

inline json to_json(const SurfaceConfig& s) {
  json j;
  j["type"] = s.type;
  if (s.type == "mixture") {
    j["sigma_floor"] = s.sigma_floor;
  } else if (s.type == "quadratic") {
    j["hessian"] = s.hessian;
    j["dim"] = s.dim;
    j["eig_range"] = s.eig_range;
    j["seed"] = s.quad_seed;
    j["center"] = s.center;
    j["offset"] = s.offset;
  } else {
    j["layer_widths"] = s.mlp.layer_widths;
    j["activation"] = to_string(s.mlp.activation);
    j["loss"] = to_string(s.mlp.loss);
    j["classes"] = s.classes;
    j["features"] = s.features;
    j["samples"] = s.samples;
    j["spread"] = s.spread;
    j["data_seed"] = s.data_seed;
    j["dataset_csv"] = s.dataset_csv;
    j["batch_size"] = s.batch_size;
  }
  return j;
}

inline ProbeRequest parse_probe(const json& j, const std::string& path) {
  ProbeRequest p;
  detail::ObjectReader r(j, path);
  r.read("type", p.type);
  if (p.type == "grid") {
    r.read("resolution", p.resolution);
    if (r.has("x_range")) {
      std::pair<double, double> v;
      r.read("x_range", v);
      p.x_range = v;
    }
    if (r.has("y_range")) {
      std::pair<double, double> v;
      r.read("y_range", v);
      p.y_range = v;
    }
    if (p.resolution.first < 2 || p.resolution.second < 2) {
      throw ConfigError(r.where("resolution") + ": must be at least [2, 2]");
    }
  } else if (p.type == "gap") {
    r.read("rho_m", p.rho_m_list);
  } else if (p.type == "alpha") {
    r.read("normalize", p.normalize);
  } else if (p.type == "sharpness") {
    std::string mode = to_string(p.mode);
    r.read("radii", p.radii);
    r.read("n_directions", p.n_directions);
    r.read("mode", mode);
    detail::guarded(r.where("mode"), [&] { p.mode = parse_perturbation_mode(mode); });
    if (p.n_directions < 1) throw ConfigError(r.where("n_directions") + ": must be >= 1");
  } else if (p.type == "spectrum") {
    r.read("top_k", p.top_k);
  } else {
    throw ConfigError(r.where("type") + ": unknown probe '" + p.type + "' (grid, gap, alpha, sharpness, spectrum)");
  }
  r.finish();
  return p;
}

inline json to_json(const ProbeRequest& p) {
  json j;
  j["type"] = p.type;
  if (p.type == "grid") {
    j["resolution"] = p.resolution;
    if (p.x_range) j["x_range"] = *p.x_range;
    if (p.y_range) j["y_range"] = *p.y_range;
  } else if (p.type == "gap") {
    j["rho_m"] = p.rho_m_list;
  } else if (p.type == "alpha") {
    j["normalize"] = p.normalize;
  } else if (p.type == "sharpness") {
    j["radii"] = p.radii;
    j["n_directions"] = p.n_directions;
    j["mode"] = to_string(p.mode);
  } else if (p.type == "spectrum") {
    j["top_k"] = p.top_k;
  }
  return j;
}

inline OracleConfig parse_oracle(const json& j, const std::string& path) {
  OracleConfig o;
  detail::ObjectReader r(j, path);
  r.read("trials", o.trials);
  r.read("dim_min", o.dim_min);
  r.read("dim_max", o.dim_max);
  r.read("eig_min", o.eig_min);
  r.read("eig_max", o.eig_max);
  r.read("rho_lo", o.rho_lo);
  r.read("rho_hi", o.rho_hi);
  if (r.has("explicit_trials")) {
    const json& list = r.child("explicit_trials");
    if (!list.is_array()) throw ConfigError(r.where("explicit_trials") + ": expected an array");
    for (std::size_t i = 0; i < list.size(); ++i) {
      detail::ObjectReader t(list[i], r.where("explicit_trials") + "/" + std::to_string(i));
      OracleConfig::Explicit e;
      t.read("hessian", e.hessian);
      t.read("g0", e.g0);
      t.read("rho", e.rho);
      t.finish();
      o.explicit_trials.push_back(std::move(e));
    }
  }
  r.finish();
  if (o.trials < 0) throw ConfigError(r.where("trials") + ": must be >= 0");
  if (o.dim_min < 2 || o.dim_max < o.dim_min) throw ConfigError(r.where("dim_min") + ": need 2 <= dim_min <= dim_max");
  if (!(o.eig_min > 0.0) || o.eig_max < o.eig_min) throw ConfigError(r.where("eig_min") + ": need 0 < eig_min <= eig_max");
  if (!(o.rho_lo > 0.0) || o.rho_hi < o.rho_lo) throw ConfigError(r.where("rho_lo") + ": need 0 < rho_lo <= rho_hi");
  return o;
}

inline json to_json(const OracleConfig& o) {
  json j;
  j["trials"] = o.trials;
  j["dim_min"] = o.dim_min;
  j["dim_max"] = o.dim_max;
  j["eig_min"] = o.eig_min;
  j["eig_max"] = o.eig_max;
  j["rho_lo"] = o.rho_lo;
  j["rho_hi"] = o.rho_hi;
  j["explicit_trials"] = json::array();
  for (const auto& e : o.explicit_trials) {
    j["explicit_trials"].push_back({{"hessian", e.hessian}, {"g0", e.g0}, {"rho", e.rho}});
  }
  return j;
}

inline ExperimentConfig parse_experiment(const json& j, const std::string& path = "") {
  ExperimentConfig c;
  detail::ObjectReader r(j, path);
  r.read("name", c.name);
  r.read("seed", c.seed);
  r.read("output_dir", c.output_dir);
  if (r.has("surface")) c.surface = parse_surface(r.child("surface"), r.where("surface"));
  if (r.has("optimizer")) c.optimizer = parse_optimizer(r.child("optimizer"), r.where("optimizer"));
  r.read("start", c.start);
  r.read("checkpoint", c.checkpoint);
  r.read("iterations", c.iterations);
  r.read("epochs", c.epochs);
  r.read("snapshot_every", c.snapshot_every);
  r.read("alpha_landscape", c.alpha_landscape);
  if (r.has("probes")) {
    const json& list = r.child("probes");
    if (!list.is_array()) throw ConfigError(r.where("probes") + ": expected an array");
    for (std::size_t i = 0; i < list.size(); ++i) {
      c.probes.push_back(parse_probe(list[i], r.where("probes") + "/" + std::to_string(i)));
    }
  }
  if (r.has("oracle")) c.oracle = parse_oracle(r.child("oracle"), r.where("oracle"));
  r.finish();
  if (c.iterations < 0) throw ConfigError(r.where("iterations") + ": must be >= 0");
  if (c.epochs < 0) throw ConfigError(r.where("epochs") + ": must be >= 0");
  return c;
}

inline json to_json(const ExperimentConfig& c) {
  json j;
  j["name"] = c.name;
  j["seed"] = c.seed;
  j["output_dir"] = c.output_dir;
  j["surface"] = to_json(c.surface);
  j["optimizer"] = to_json(c.optimizer);
  j["start"] = c.start;
  j["checkpoint"] = c.checkpoint;
  j["iterations"] = c.iterations;
  j["epochs"] = c.epochs;
  j["snapshot_every"] = c.snapshot_every;
  j["alpha_landscape"] = c.alpha_landscape;
  j["probes"] = json::array();
  for (const auto& p : c.probes) j["probes"].push_back(to_json(p));
  j["oracle"] = to_json(c.oracle);
  return j;
}

/// Parses JSON text; syntax errors carry nlohmann's line/column position.
inline json parse_json_text(const std::string& text, const std::string& origin) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(origin + ": " + e.what());
  }
}

inline json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_json_text(ss.str(), path);
}

namespace detail {

// Source line of every JSON pointer in `text` (keys: the line of the key;
// array elements: the line where the element starts). Assumes valid JSON.
inline std::map<std::string, int> pointer_lines(const std::string& text) {
  struct Frame {
    bool object;
    std::string path;
    std::size_t index = 0;
    std::string member;  // object: pointer of the member being read
    bool element_seen = false;
  };
  std::map<std::string, int> lines{{"", 1}};
  std::vector<Frame> stack;
  std::string last_string;
  int line = 1;
  auto start_value = [&]() -> std::string {
    if (stack.empty()) return "";
    Frame& top = stack.back();
    if (top.object) return top.member;
    const std::string p = top.path + "/" + std::to_string(top.index);
    if (!top.element_seen) {
      lines.emplace(p, line);
      top.element_seen = true;
    }
    return p;
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (c == '\n') {
      ++line;
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c))) continue;
    if (c == '"') {
      std::string str;
      for (++i; i < text.size() && text[i] != '"'; ++i) {
        if (text[i] == '\\' && i + 1 < text.size()) ++i;
        str += text[i];
      }
      if (!stack.empty() && !stack.back().object) start_value();
      last_string = std::move(str);
      continue;
    }
    if (c == ':' && !stack.empty() && stack.back().object) {
      Frame& top = stack.back();
      top.member = top.path + "/" + last_string;
      lines.emplace(top.member, line);
      continue;
    }
    if (c == '{' || c == '[') {
      const std::string p = start_value();
      lines.emplace(p, line);
      stack.push_back(Frame{c == '{', p, 0, {}, false});
      continue;
    }
    if (c == '}' || c == ']') {
      if (!stack.empty()) stack.pop_back();
      continue;
    }
    if (c == ',') {
      if (!stack.empty() && !stack.back().object) {
        ++stack.back().index;
        stack.back().element_seen = false;
      }
      continue;
    }
    if (!stack.empty() && !stack.back().object) start_value();
  }
  return lines;
}

// Line for the longest recorded prefix of `pointer`.
inline int line_of(const std::map<std::string, int>& lines, std::string pointer) {
  if (pointer == "/") pointer.clear();
  while (true) {
    if (auto it = lines.find(pointer); it != lines.end()) return it->second;
    const auto cut = pointer.rfind('/');
    if (cut == std::string::npos) return 1;
    pointer.erase(cut);
  }
}

}  // namespace detail

/// A config file holds one experiment object or an array of them. Semantic
/// errors are reported as "<file>:<line>: <pointer>: <message>".
inline std::vector<ExperimentConfig> load_experiments(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();
  const json j = parse_json_text(text, path);
  std::vector<ExperimentConfig> out;
  try {
    if (j.is_array()) {
      for (std::size_t i = 0; i < j.size(); ++i) out.push_back(parse_experiment(j[i], "/" + std::to_string(i)));
    } else {
      out.push_back(parse_experiment(j));
    }
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    std::string pointer;
    if (msg.rfind("/", 0) == 0) pointer = msg.substr(0, msg.find(": "));
    const int line = detail::line_of(detail::pointer_lines(text), pointer);
    throw ConfigError(path + ":" + std::to_string(line) + ": " + msg);
  }
  return out;
}

}  // namespace xsam::harness
