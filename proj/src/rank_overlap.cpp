#include "mmscope/rank_overlap.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "mmscope/errors.hpp"
#include "mmscope/numstat.hpp"

namespace mmscope {

namespace {

void require_depth(const RankedList& s, const RankedList& t,
                   std::size_t depth) {
  if (depth < 1) fail(errc::list_too_short, "depth must be >= 1");
  if (s.size() < depth || t.size() < depth) {
    fail(errc::list_too_short,
         "lists of length " + std::to_string(s.size()) + " and " +
             std::to_string(t.size()) + " cannot be compared at depth " +
             std::to_string(depth));
  }
  for (const RankedList* list : {&s, &t}) {
    std::unordered_set<std::string> uniq(list->items.begin(),
                                         list->items.end());
    if (uniq.size() != list->items.size()) {
      fail(errc::invalid_input, "ranked list contains duplicate items");
    }
  }
}

// Prefix agreements A_1..A_n via incremental overlap counting.
std::vector<double> agreements(const RankedList& s, const RankedList& t,
                               std::size_t n) {
  std::vector<double> a(n);
  std::unordered_set<std::string> seen_s, seen_t;
  std::size_t overlap = 0;
  for (std::size_t d = 0; d < n; ++d) {
    const std::string& es = s.items[d];
    const std::string& et = t.items[d];
    if (es == et) {
      ++overlap;
    } else {
      if (seen_t.erase(es) == 1) {
        ++overlap;
      } else {
        seen_s.insert(es);
      }
      if (seen_s.erase(et) == 1) {
        ++overlap;
      } else {
        seen_t.insert(et);
      }
    }
    a[d] = static_cast<double>(overlap) / static_cast<double>(d + 1);
  }
  return a;
}

}  // namespace

RboResult rbo(const RankedList& s, const RankedList& t, double p,
              std::size_t depth) {
  if (!(p > 0.0 && p <= 1.0)) {
    fail(errc::bad_p, "p must be in (0, 1], got " + std::to_string(p));
  }
  require_depth(s, t, depth);

  const std::vector<double> a = agreements(s, t, depth);
  RboResult out;
  if (p == 1.0) {
    // (1-p) prefactor vanishes; the analytic limit is the mean A_d.
    double sum = 0.0;
    for (double ad : a) sum += ad;
    out.normalized = sum / static_cast<double>(depth);
    out.raw = 0.0;
    return out;
  }

  // The normalizer accumulates the same weights in the same order, so
  // identical lists (A_d = 1 throughout) score exactly 1.
  double weighted = 0.0;
  double norm = 0.0;
  double weight = 1.0;  // p^(d-1)
  for (std::size_t d = 0; d < depth; ++d) {
    weighted += weight * a[d];
    norm += weight;
    weight *= p;
  }
  out.raw = (1.0 - p) * weighted;
  out.normalized = weighted / norm;
  return out;
}

double set_iou(const RankedList& s, const RankedList& t,
               std::size_t depth) {
  require_depth(s, t, depth);
  std::unordered_set<std::string> ss(s.items.begin(),
                                     s.items.begin() + depth);
  std::unordered_set<std::string> ts(t.items.begin(),
                                     t.items.begin() + depth);
  std::size_t inter = 0;
  for (const std::string& x : ss) inter += ts.count(x);
  const std::size_t uni = ss.size() + ts.size() - inter;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

RankedList frequent_object_ranking(std::span<const SampleRecord> corpus,
                                   const std::string& scene,
                                   std::size_t n) {
  std::map<std::string, std::size_t> counts;
  std::size_t scene_samples = 0;
  for (const SampleRecord& rec : corpus) {
    if (!rec.scene_type.has_value() || *rec.scene_type != scene) continue;
    ++scene_samples;
    std::unordered_set<std::string> present;
    for (const ObjectTag& tag : rec.object_tags) present.insert(tag.label);
    for (const std::string& obj : present) ++counts[obj];
  }
  if (scene_samples == 0) {
    fail(errc::unknown_scene, "no samples of scene '" + scene + "'");
  }

  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(),
                                                          counts.end());
  // counts map iterates lexicographically, so a stable sort on count
  // keeps lexicographic tie order.
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) {
                     return a.second > b.second;
                   });
  RankedList out;
  for (const auto& [label, count] : ranked) {
    if (out.items.size() >= n) break;
    out.items.push_back(label);
    out.scores.push_back(static_cast<double>(count));
  }
  return out;
}

std::vector<OverlapRow> overlap_table(
    const std::map<std::string, RankedList>& model_lists,
    const std::map<std::string, RankedList>& data_lists,
    const std::vector<int>& depths, double p) {
  for (const auto& [scene, list] : model_lists) {
    if (!data_lists.count(scene)) {
      fail(errc::key_mismatch, "scene '" + scene + "' missing from data lists");
    }
  }
  for (const auto& [scene, list] : data_lists) {
    if (!model_lists.count(scene)) {
      fail(errc::key_mismatch,
           "scene '" + scene + "' missing from model lists");
    }
  }

  std::vector<OverlapRow> rows;
  for (const auto& [scene, model_list] : model_lists) {
    const RankedList& data_list = data_lists.at(scene);
    for (int depth : depths) {
      const auto d = static_cast<std::size_t>(depth);
      const RboResult r = rbo(model_list, data_list, p, d);
      rows.push_back({scene, depth, r.normalized, r.raw,
                      set_iou(model_list, data_list, d)});
    }
  }
  return rows;
}

Correlation pearson_r(std::span<const double> xs,
                      std::span<const double> ys) {
  if (xs.size() != ys.size()) {
    fail(errc::invalid_input, "pearson_r: length mismatch");
  }
  if (xs.size() < 3) {
    fail(errc::invalid_input, "pearson_r: need at least 3 pairs");
  }
  const std::size_t n = xs.size();
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = xs[i] - mx;
    const double dy = ys[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) {
    fail(errc::degenerate_input, "pearson_r: constant series");
  }

  Correlation c;
  c.n = n;
  c.df = static_cast<int>(n) - 2;
  c.r = sxy / std::sqrt(sxx * syy);
  const double r2 = std::min(c.r * c.r, 1.0);
  if (r2 >= 1.0) {
    c.p_value = 0.0;
  } else {
    const double t = std::fabs(c.r) *
                     std::sqrt(static_cast<double>(c.df) / (1.0 - r2));
    c.p_value = student_t_sf_two_sided(t, c.df);
  }
  return c;
}

}  // namespace mmscope
