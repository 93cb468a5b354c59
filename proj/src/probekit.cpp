#include "mmscope/probekit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "mmscope/errors.hpp"
#include "mmscope/rng.hpp"

namespace mmscope {

std::map<std::string, std::size_t> ProbeDataset::class_counts() const {
  std::map<std::string, std::size_t> counts;
  for (const ProbeRow& r : rows) ++counts[r.label];
  return counts;
}

std::vector<double> pool_mean(
    std::span<const std::vector<double>> vectors) {
  if (vectors.empty()) fail(errc::empty_input, "pool_mean: no vectors");
  const std::size_t dim = vectors[0].size();
  std::vector<double> out(dim, 0.0);
  for (const std::vector<double>& v : vectors) {
    if (v.size() != dim) {
      fail(errc::dim_mismatch,
           "pool_mean: vector of dim " + std::to_string(v.size()) +
               " among dim " + std::to_string(dim));
    }
    for (std::size_t i = 0; i < dim; ++i) out[i] += v[i];
  }
  const double inv = 1.0 / static_cast<double>(vectors.size());
  for (double& x : out) x *= inv;
  return out;
}

ProbeDataset build_probe_dataset(std::span<const SampleRecord> records,
                                 std::size_t cap, std::uint64_t seed) {
  ProbeDataset d;
  for (const SampleRecord& rec : records) {
    if (!rec.scene_type.has_value()) {
      fail(errc::missing_label,
           "sample " + rec.sample_id + " has no scene_type");
    }
    if (!rec.pooled_vector.has_value()) {
      fail(errc::missing_vector,
           "sample " + rec.sample_id + " has no pooled_vector");
    }
    d.rows.push_back({rec.sample_id, *rec.scene_type, *rec.pooled_vector});
  }
  std::sort(d.rows.begin(), d.rows.end(),
            [](const ProbeRow& a, const ProbeRow& b) {
              return a.sample_id < b.sample_id;
            });

  // Downsample per class with a class-indexed substream so the
  // selection is independent of the other classes.
  std::map<std::string, std::vector<std::size_t>> per_class;
  for (std::size_t i = 0; i < d.rows.size(); ++i) {
    per_class[d.rows[i].label].push_back(i);
  }
  std::vector<bool> keep(d.rows.size(), true);
  std::uint64_t class_index = 0;
  for (auto& [label, indices] : per_class) {
    if (indices.size() > cap) {
      rng::Engine g = rng::substream(seed, class_index);
      rng::shuffle(g, indices);
      for (std::size_t k = cap; k < indices.size(); ++k) {
        keep[indices[k]] = false;
      }
    }
    ++class_index;
  }
  ProbeDataset out;
  for (std::size_t i = 0; i < d.rows.size(); ++i) {
    if (keep[i]) out.rows.push_back(std::move(d.rows[i]));
  }
  return out;
}

SplitResult split(const ProbeDataset& d, double test_fraction,
                  std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    fail(errc::invalid_input, "test_fraction must be in (0, 1)");
  }
  SplitResult result;
  std::map<std::string, std::vector<std::size_t>> per_class;
  for (std::size_t i = 0; i < d.rows.size(); ++i) {
    per_class[d.rows[i].label].push_back(i);
  }
  std::vector<bool> to_test(d.rows.size(), false);
  std::uint64_t class_index = 0;
  for (auto& [label, indices] : per_class) {
    if (indices.size() < 2) {
      result.warnings.push_back("class '" + label +
                                "' has a single row; forced into train");
      ++class_index;
      continue;
    }
    rng::Engine g = rng::substream(seed, class_index);
    rng::shuffle(g, indices);
    const auto n_test = static_cast<std::size_t>(std::llround(
        static_cast<double>(indices.size()) * test_fraction));
    for (std::size_t k = 0; k < n_test && k < indices.size(); ++k) {
      to_test[indices[k]] = true;
    }
    ++class_index;
  }
  for (std::size_t i = 0; i < d.rows.size(); ++i) {
    (to_test[i] ? result.test : result.train).rows.push_back(d.rows[i]);
  }
  return result;
}

namespace {

struct TreeBuilder {
  const ProbeDataset& data;
  const std::vector<int>& labels;  // class index per dataset row
  std::size_t n_classes;
  std::size_t max_features;
  rng::Engine& g;
  std::vector<TreeNode> nodes;

  int majority(const std::vector<std::size_t>& rows) const {
    std::vector<std::size_t> counts(n_classes, 0);
    for (std::size_t r : rows) ++counts[static_cast<std::size_t>(labels[r])];
    return static_cast<int>(
        std::max_element(counts.begin(), counts.end()) - counts.begin());
  }

  bool pure(const std::vector<std::size_t>& rows) const {
    for (std::size_t i = 1; i < rows.size(); ++i) {
      if (labels[rows[i]] != labels[rows[0]]) return false;
    }
    return true;
  }

  static double gini(const std::vector<std::size_t>& counts,
                     std::size_t total) {
    if (total == 0) return 0.0;
    double acc = 1.0;
    for (std::size_t c : counts) {
      const double p = static_cast<double>(c) / static_cast<double>(total);
      acc -= p * p;
    }
    return acc;
  }

  int build(std::vector<std::size_t> rows) {
    const int node_id = static_cast<int>(nodes.size());
    nodes.emplace_back();

    if (rows.size() < 2 || pure(rows)) {
      nodes[static_cast<std::size_t>(node_id)].leaf_class = majority(rows);
      return node_id;
    }

    // Candidate features: max_features sampled without replacement.
    const std::size_t dim = data.dim();
    std::vector<std::size_t> features(dim);
    std::iota(features.begin(), features.end(), 0);
    for (std::size_t k = 0; k < max_features && k < dim; ++k) {
      const std::size_t j =
          k + static_cast<std::size_t>(rng::below(g, dim - k));
      std::swap(features[k], features[j]);
    }
    features.resize(std::min(max_features, dim));

    double best_impurity = std::numeric_limits<double>::infinity();
    int best_feature = -1;
    double best_threshold = 0.0;

    std::vector<std::pair<double, int>> values(rows.size());
    for (std::size_t f : features) {
      for (std::size_t i = 0; i < rows.size(); ++i) {
        values[i] = {data.rows[rows[i]].vec[f], labels[rows[i]]};
      }
      std::sort(values.begin(), values.end());

      std::vector<std::size_t> left_counts(n_classes, 0);
      std::vector<std::size_t> right_counts(n_classes, 0);
      for (const auto& [v, c] : values) {
        ++right_counts[static_cast<std::size_t>(c)];
      }
      const std::size_t total = rows.size();
      for (std::size_t i = 0; i + 1 < values.size(); ++i) {
        const auto cls = static_cast<std::size_t>(values[i].second);
        ++left_counts[cls];
        --right_counts[cls];
        if (values[i].first == values[i + 1].first) continue;
        const std::size_t n_left = i + 1;
        const std::size_t n_right = total - n_left;
        const double impurity =
            (static_cast<double>(n_left) * gini(left_counts, n_left) +
             static_cast<double>(n_right) * gini(right_counts, n_right)) /
            static_cast<double>(total);
        if (impurity < best_impurity) {
          best_impurity = impurity;
          best_feature = static_cast<int>(f);
          best_threshold =
              values[i].first +
              (values[i + 1].first - values[i].first) / 2.0;
        }
      }
    }

    if (best_feature < 0) {
      // All candidate features constant on these rows.
      nodes[static_cast<std::size_t>(node_id)].leaf_class = majority(rows);
      return node_id;
    }

    std::vector<std::size_t> left_rows, right_rows;
    for (std::size_t r : rows) {
      const double v =
          data.rows[r].vec[static_cast<std::size_t>(best_feature)];
      (v <= best_threshold ? left_rows : right_rows).push_back(r);
    }
    if (left_rows.empty() || right_rows.empty()) {
      nodes[static_cast<std::size_t>(node_id)].leaf_class = majority(rows);
      return node_id;
    }
    rows.clear();
    rows.shrink_to_fit();

    const int left_id = build(std::move(left_rows));
    const int right_id = build(std::move(right_rows));
    TreeNode& node = nodes[static_cast<std::size_t>(node_id)];
    node.feature = best_feature;
    node.threshold = best_threshold;
    node.left = left_id;
    node.right = right_id;
    return node_id;
  }
};

}  // namespace

int DecisionTree::predict(std::span<const double> x) const {
  int id = 0;
  while (nodes[static_cast<std::size_t>(id)].feature >= 0) {
    const TreeNode& n = nodes[static_cast<std::size_t>(id)];
    id = x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left
                                                               : n.right;
  }
  return nodes[static_cast<std::size_t>(id)].leaf_class;
}

const std::string& ForestModel::predict(std::span<const double> x) const {
  if (x.size() != dim) {
    fail(errc::dim_mismatch,
         "predict: vector dim " + std::to_string(x.size()) +
             " vs model dim " + std::to_string(dim));
  }
  std::vector<std::size_t> votes(classes.size(), 0);
  for (const DecisionTree& t : trees) {
    ++votes[static_cast<std::size_t>(t.predict(x))];
  }
  const std::size_t best = static_cast<std::size_t>(
      std::max_element(votes.begin(), votes.end()) - votes.begin());
  return classes[best];
}

ForestModel train_forest(const ProbeDataset& train, int n_trees,
                         std::uint64_t seed, std::size_t max_features) {
  if (train.rows.empty()) {
    fail(errc::empty_input, "train_forest: empty training set");
  }
  const std::size_t dim = train.dim();
  for (const ProbeRow& r : train.rows) {
    if (r.vec.size() != dim) {
      fail(errc::dim_mismatch, "train_forest: inconsistent vector dims");
    }
  }

  ForestModel model;
  for (const auto& [label, count] : train.class_counts()) {
    model.classes.push_back(label);
  }
  if (model.classes.size() < 2) {
    fail(errc::single_class, "train_forest: need >= 2 classes");
  }
  model.dim = dim;
  model.n_trees = n_trees;
  model.seed = seed;
  model.max_features =
      max_features > 0
          ? max_features
          : static_cast<std::size_t>(
                std::ceil(std::sqrt(static_cast<double>(dim))));

  // Bootstrap indices are drawn over the dataset's canonical
  // (sample_id-sorted) row order, so training is row-order independent.
  std::vector<std::size_t> canonical(train.rows.size());
  std::iota(canonical.begin(), canonical.end(), 0);
  std::stable_sort(canonical.begin(), canonical.end(),
                   [&](std::size_t a, std::size_t b) {
                     return train.rows[a].sample_id <
                            train.rows[b].sample_id;
                   });

  std::map<std::string, int> class_index;
  for (std::size_t i = 0; i < model.classes.size(); ++i) {
    class_index[model.classes[i]] = static_cast<int>(i);
  }
  std::vector<int> labels(train.rows.size());
  for (std::size_t i = 0; i < train.rows.size(); ++i) {
    labels[i] = class_index.at(train.rows[i].label);
  }

  model.trees.reserve(static_cast<std::size_t>(n_trees));
  for (int t = 0; t < n_trees; ++t) {
    rng::Engine g = rng::substream(seed, static_cast<std::uint64_t>(t));
    std::vector<std::size_t> bootstrap(train.rows.size());
    for (std::size_t& idx : bootstrap) {
      idx = canonical[static_cast<std::size_t>(
          rng::below(g, canonical.size()))];
    }
    TreeBuilder builder{train, labels, model.classes.size(),
                        model.max_features, g, {}};
    builder.build(std::move(bootstrap));
    model.trees.push_back({std::move(builder.nodes)});
  }
  return model;
}

F1Report compute_f1(std::span<const std::string> truth,
                    std::span<const std::string> predicted) {
  if (truth.size() != predicted.size()) {
    fail(errc::dim_mismatch, "compute_f1: length mismatch");
  }
  if (truth.empty()) fail(errc::empty_input, "compute_f1: no rows");

  std::map<std::string, std::size_t> tp, fp, fn, support;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    ++support[truth[i]];
    if (truth[i] == predicted[i]) {
      ++tp[truth[i]];
    } else {
      ++fp[predicted[i]];
      ++fn[truth[i]];
    }
  }

  std::set<std::string> classes;
  for (const auto& [c, n] : support) classes.insert(c);
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    classes.insert(predicted[i]);
  }

  F1Report rep;
  std::size_t tp_total = 0, fp_total = 0, fn_total = 0;
  double weighted_sum = 0.0;
  std::size_t support_total = 0;
  for (const std::string& c : classes) {
    const std::size_t tpc = tp.count(c) ? tp.at(c) : 0;
    const std::size_t fpc = fp.count(c) ? fp.at(c) : 0;
    const std::size_t fnc = fn.count(c) ? fn.at(c) : 0;
    ClassMetrics m;
    m.support = support.count(c) ? support.at(c) : 0;
    m.precision = (tpc + fpc) == 0
                      ? 0.0
                      : static_cast<double>(tpc) /
                            static_cast<double>(tpc + fpc);
    m.recall = (tpc + fnc) == 0 ? 0.0
                                : static_cast<double>(tpc) /
                                      static_cast<double>(tpc + fnc);
    m.f1 = (m.precision + m.recall) == 0.0
               ? 0.0
               : 2.0 * m.precision * m.recall / (m.precision + m.recall);
    rep.per_class[c] = m;
    tp_total += tpc;
    fp_total += fpc;
    fn_total += fnc;
    rep.macro_f1 += m.f1;
    weighted_sum += m.f1 * static_cast<double>(m.support);
    support_total += m.support;
  }
  rep.macro_f1 /= static_cast<double>(classes.size());
  rep.weighted_f1 = weighted_sum / static_cast<double>(support_total);
  // Single-label micro precision == recall == accuracy.
  const double micro_p =
      (tp_total + fp_total) == 0
          ? 0.0
          : static_cast<double>(tp_total) /
                static_cast<double>(tp_total + fp_total);
  const double micro_r =
      (tp_total + fn_total) == 0
          ? 0.0
          : static_cast<double>(tp_total) /
                static_cast<double>(tp_total + fn_total);
  rep.micro_f1 = (micro_p + micro_r) == 0.0
                     ? 0.0
                     : 2.0 * micro_p * micro_r / (micro_p + micro_r);
  return rep;
}

F1Report evaluate(const ForestModel& model, const ProbeDataset& test) {
  if (test.rows.empty()) fail(errc::empty_input, "evaluate: empty test set");
  std::vector<std::string> truth, predicted;
  truth.reserve(test.rows.size());
  predicted.reserve(test.rows.size());
  for (const ProbeRow& r : test.rows) {
    truth.push_back(r.label);
    predicted.push_back(model.predict(r.vec));
  }
  return compute_f1(truth, predicted);
}

F1Report random_baseline(const ProbeDataset& test, std::uint64_t seed) {
  if (test.rows.empty()) {
    fail(errc::empty_input, "random_baseline: empty test set");
  }
  std::vector<std::string> classes;
  for (const auto& [label, count] : test.class_counts()) {
    classes.push_back(label);
  }
  rng::Engine g(rng::splitmix64(seed));
  std::vector<std::string> truth, predicted;
  for (const ProbeRow& r : test.rows) {
    truth.push_back(r.label);
    predicted.push_back(classes[static_cast<std::size_t>(
        rng::below(g, classes.size()))]);
  }
  return compute_f1(truth, predicted);
}

}  // namespace mmscope
