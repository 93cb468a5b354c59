#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "mmscope/sample_model.hpp"

namespace mmscope {

struct ProbeRow {
  std::string sample_id;
  std::string label;
  std::vector<double> vec;
};

struct ProbeDataset {
  std::vector<ProbeRow> rows;  // canonically sorted by sample_id

  std::size_t dim() const { return rows.empty() ? 0 : rows[0].vec.size(); }
  std::map<std::string, std::size_t> class_counts() const;
};

struct SplitResult {
  ProbeDataset train;
  ProbeDataset test;
  std::vector<std::string> warnings;  // e.g. single-row classes
};

// Flattened binary decision tree; leaves carry class indices.
struct TreeNode {
  int feature = -1;           // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;              // feature value <= threshold
  int right = -1;
  int leaf_class = -1;
};

struct DecisionTree {
  std::vector<TreeNode> nodes;
  int predict(std::span<const double> x) const;
};

struct ForestModel {
  std::vector<DecisionTree> trees;
  std::vector<std::string> classes;  // sorted; vote ties -> smallest index
  std::size_t dim = 0;
  int n_trees = 0;
  std::size_t max_features = 0;
  std::uint64_t seed = 0;

  const std::string& predict(std::span<const double> x) const;
};

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;
};

struct F1Report {
  double micro_f1 = 0.0;
  double macro_f1 = 0.0;
  double weighted_f1 = 0.0;
  std::map<std::string, ClassMetrics> per_class;
};

// Element-wise arithmetic mean of equally sized vectors.
std::vector<double> pool_mean(
    std::span<const std::vector<double>> vectors);

// Builds rows from records carrying scene_type + pooled_vector; classes
// above `cap` are downsampled without replacement, seeded.
ProbeDataset build_probe_dataset(std::span<const SampleRecord> records,
                                 std::size_t cap, std::uint64_t seed);

// Stratified split: each class contributes round(count * test_fraction)
// test rows after a seeded shuffle. Single-row classes go to train with
// a warning.
SplitResult split(const ProbeDataset& d, double test_fraction,
                  std::uint64_t seed);

// Gini-grown trees on bootstrap resamples; sqrt(D) candidate features
// per split from a per-tree substream; grown until pure or below two
// samples. max_features = 0 selects ceil(sqrt(D)).
ForestModel train_forest(const ProbeDataset& train, int n_trees = 100,
                         std::uint64_t seed = 0,
                         std::size_t max_features = 0);

// Per-class precision/recall/F1 with 0/0 defined as 0; micro over global
// counts, macro unweighted, weighted by support.
F1Report compute_f1(std::span<const std::string> truth,
                    std::span<const std::string> predicted);

F1Report evaluate(const ForestModel& model, const ProbeDataset& test);

// Uniform random labels over the test set's classes, then compute_f1.
F1Report random_baseline(const ProbeDataset& test, std::uint64_t seed);

}  // namespace mmscope
