#pragma once

#include <string>
#include <vector>

namespace mmscope {

// Ordered, deduplicated object labels; scores (when present) are
// parallel to items and non-increasing.
struct RankedList {
  std::vector<std::string> items;
  std::vector<double> scores;

  std::size_t size() const { return items.size(); }
  bool has_scores() const { return !scores.empty(); }
};

}  // namespace mmscope
