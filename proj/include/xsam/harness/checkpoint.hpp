#pragma once

// Text checkpoint:
//   xsam-checkpoint 1
//   dim <n>
//   layer_widths <w0> <w1> ...   ("-" when not an MLP)
//   seed <s>
//   rule <rule>
//   values
//   <one parameter per line, shortest round-trip decimal>

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "xsam/csv.hpp"
#include "xsam/types.hpp"

namespace xsam::harness {

struct Checkpoint {
  ParamVector values;
  std::vector<int> layer_widths;
  std::uint64_t seed = 0;
  std::string rule;
};

inline void write_checkpoint(const Checkpoint& c, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("checkpoint: cannot write " + path);
  out << "xsam-checkpoint 1\n";
  out << "dim " << c.values.size() << '\n';
  out << "layer_widths";
  if (c.layer_widths.empty()) out << " -";
  for (int w : c.layer_widths) out << ' ' << w;
  out << "\nseed " << c.seed << "\nrule " << (c.rule.empty() ? "-" : c.rule) << "\nvalues\n";
  for (Eigen::Index i = 0; i < c.values.size(); ++i) out << csv::format(c.values[i]) << '\n';
}

inline Checkpoint read_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("checkpoint: cannot open " + path);
  auto expect_line = [&](const std::string& key) {
    std::string line;
    if (!std::getline(in, line)) throw ConfigError("checkpoint " + path + ": truncated header");
    std::istringstream ls(line);
    std::string k;
    ls >> k;
    if (k != key) throw ConfigError("checkpoint " + path + ": expected '" + key + "'");
    std::string rest;
    std::getline(ls, rest);
    if (!rest.empty() && rest.front() == ' ') rest.erase(0, 1);
    return rest;
  };
  if (expect_line("xsam-checkpoint") != "1") throw ConfigError("checkpoint " + path + ": unsupported version");
  Checkpoint c;
  const long long dim = csv::parse_int(expect_line("dim"));
  {
    std::istringstream ws(expect_line("layer_widths"));
    std::string tok;
    while (ws >> tok) {
      if (tok != "-") c.layer_widths.push_back(static_cast<int>(csv::parse_int(tok)));
    }
  }
  c.seed = static_cast<std::uint64_t>(std::stoull(expect_line("seed")));
  c.rule = expect_line("rule");
  if (c.rule == "-") c.rule.clear();
  expect_line("values");
  c.values.resize(dim);
  std::string line;
  for (long long i = 0; i < dim; ++i) {
    if (!std::getline(in, line)) throw ConfigError("checkpoint " + path + ": expected " + std::to_string(dim) + " values");
    c.values[i] = csv::parse_double(line);
  }
  return c;
}

}  // namespace xsam::harness
