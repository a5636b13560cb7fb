#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "xsam/autodiff/mlp.hpp"
#include "xsam/csv.hpp"

namespace xsam {

struct SyntheticDataset {
  Matrix features;  // samples x dims
  std::vector<int> labels;
  int num_classes = 0;
  Eigen::Index batch_size = 1;
  std::uint64_t seed = 0;

  Eigen::Index samples() const { return features.rows(); }
  Eigen::Index dims() const { return features.cols(); }

  void validate() const {
    if (static_cast<Eigen::Index>(labels.size()) != samples()) throw ConfigError("dataset: label count");
    for (int y : labels) {
      if (y < 0 || y >= num_classes) throw ConfigError("dataset: label out of range");
    }
    if (batch_size <= 0 || samples() % batch_size != 0) {
      throw ConfigError("dataset: batch size must divide the sample count");
    }
  }

  MlpData to_mlp_data() const { return MlpData{features, labels, Matrix()}; }
};

/// Gaussian class clusters. Labels cycle 0,1,..,classes-1 so every contiguous
/// batch is stratified; centers are drawn N(0, 4·I).
inline SyntheticDataset make_blobs(int classes, int dims, int samples, double spread,
                                   std::uint64_t seed, Eigen::Index batch_size = 0) {
  if (classes < 2) throw ConfigError("make_blobs: need at least two classes");
  if (dims < 1 || samples < classes) throw ConfigError("make_blobs: invalid sizes");
  if (spread < 0.0) throw ConfigError("make_blobs: spread must be non-negative");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Matrix centers(classes, dims);
  for (int c = 0; c < classes; ++c) {
    for (int d = 0; d < dims; ++d) centers(c, d) = 2.0 * normal(rng);
  }
  SyntheticDataset ds;
  ds.features.resize(samples, dims);
  ds.labels.resize(static_cast<std::size_t>(samples));
  ds.num_classes = classes;
  ds.seed = seed;
  ds.batch_size = batch_size > 0 ? batch_size : samples;
  for (int i = 0; i < samples; ++i) {
    const int y = i % classes;
    ds.labels[static_cast<std::size_t>(i)] = y;
    for (int d = 0; d < dims; ++d) ds.features(i, d) = centers(y, d) + spread * normal(rng);
  }
  ds.validate();
  return ds;
}

/// Writes header f0..f{d-1},label then one row per sample.
inline void write_dataset_csv(const SyntheticDataset& ds, const std::string& path) {
  std::vector<std::string> header;
  for (Eigen::Index d = 0; d < ds.dims(); ++d) header.push_back("f" + std::to_string(d));
  header.emplace_back("label");
  csv::Writer w(path, header);
  std::vector<std::string> cells(header.size());
  for (Eigen::Index i = 0; i < ds.samples(); ++i) {
    for (Eigen::Index d = 0; d < ds.dims(); ++d) cells[static_cast<std::size_t>(d)] = csv::format(ds.features(i, d));
    cells.back() = std::to_string(ds.labels[static_cast<std::size_t>(i)]);
    w.row_values(cells);
  }
}

inline SyntheticDataset read_dataset_csv(const std::string& path, Eigen::Index batch_size = 0) {
  const csv::Table t = csv::read(path);
  if (t.header.size() < 2 || t.header.back() != "label") throw ConfigError("dataset csv: last column must be 'label'");
  const Eigen::Index dims = static_cast<Eigen::Index>(t.header.size()) - 1;
  for (Eigen::Index d = 0; d < dims; ++d) {
    if (t.header[static_cast<std::size_t>(d)] != "f" + std::to_string(d)) throw ConfigError("dataset csv: bad header");
  }
  SyntheticDataset ds;
  ds.features.resize(static_cast<Eigen::Index>(t.rows.size()), dims);
  ds.labels.resize(t.rows.size());
  int max_label = -1;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    for (Eigen::Index d = 0; d < dims; ++d) {
      ds.features(static_cast<Eigen::Index>(i), d) = csv::parse_double(t.rows[i][static_cast<std::size_t>(d)]);
    }
    ds.labels[i] = static_cast<int>(csv::parse_int(t.rows[i].back()));
    max_label = std::max(max_label, ds.labels[i]);
  }
  ds.num_classes = max_label + 1;
  ds.batch_size = batch_size > 0 ? batch_size : ds.samples();
  ds.validate();
  return ds;
}

}  // namespace xsam
