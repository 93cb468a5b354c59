#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "mmscope/rank_types.hpp"
#include "mmscope/sample_model.hpp"

namespace mmscope {

struct RboResult {
  double normalized = 0.0;  // truncated sum scaled so identical lists = 1
  double raw = 0.0;         // (1-p) * sum p^(d-1) A_d as written
};

struct OverlapRow {
  std::string scene;
  int depth = 0;
  double rbo_norm = 0.0;
  double rbo_raw = 0.0;
  double iou = 0.0;
};

struct Correlation {
  double r = 0.0;
  int df = 0;
  double p_value = 1.0;
  std::size_t n = 0;
};

// Rank-biased overlap truncated at `depth`, with A_d the prefix
// agreement |prefix_d(s) & prefix_d(t)| / d. The normalized form divides
// by (1-p^n)/(1-p); at p = 1 it is the mean of A_d (analytic limit).
RboResult rbo(const RankedList& s, const RankedList& t, double p,
              std::size_t depth);

// Intersection over union of the two depth-n prefix sets.
double set_iou(const RankedList& s, const RankedList& t, std::size_t depth);

// Objects ranked by the number of images of `scene` whose tag list
// contains them; ties lexicographic. n larger than the distinct object
// count returns the full list.
RankedList frequent_object_ranking(std::span<const SampleRecord> corpus,
                                   const std::string& scene, std::size_t n);

// One row per (scene, depth); scene keys must match between the maps.
std::vector<OverlapRow> overlap_table(
    const std::map<std::string, RankedList>& model_lists,
    const std::map<std::string, RankedList>& data_lists,
    const std::vector<int>& depths, double p);

// Sample Pearson correlation with a two-sided p-value from the
// t-transform and the regularized incomplete beta function.
Correlation pearson_r(std::span<const double> xs,
                      std::span<const double> ys);

}  // namespace mmscope
