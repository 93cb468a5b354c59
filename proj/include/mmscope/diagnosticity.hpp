#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mmscope/geometry.hpp"
#include "mmscope/rank_types.hpp"
#include "mmscope/sample_model.hpp"

namespace mmscope {

enum class TagRule { IouRule, ContainmentRule, Unassigned };

const char* to_string(TagRule r);

struct TagAssignment {
  int visual_index = 0;
  std::string label;        // empty when unassigned
  double iou = 0.0;         // against the chosen tag box
  double containment = 0.0;
  TagRule rule = TagRule::Unassigned;
};

struct Assignments {
  std::vector<TagAssignment> items;  // one entry per visual feature
  double coverage = 1.0;             // assigned / total; 1.0 for zero features
};

struct PmiEntry {
  double pmi = 0.0;  // bits
  long joint_count = 0;
  long scene_count = 0;
  long object_count = 0;
  long total = 0;
};

struct PmiTable {
  // keyed (scene, object); below-support pairs are omitted
  std::map<std::pair<std::string, std::string>, PmiEntry> entries;
  std::set<std::string> scenes;
  long total_images = 0;
};

struct AblationPlan {
  std::string sample_id;
  std::vector<std::string> ablated_objects;
  std::vector<std::string> missing_objects;  // requested but not present
  std::vector<int> label_positions_to_pad;
  std::vector<int> visual_positions_to_pad;
};

struct ShiftPair {
  double before = 0.0;
  double after = 0.0;
  bool changed = false;
};

struct ShiftStats {
  std::size_t n_total = 0;
  std::size_t n_unchanged = 0;
  double change_rate = 0.0;  // 1 - n_unchanged / n_total
  std::vector<double> shifts;  // before - after, unchanged pairs only
  double mean_shift = 0.0;
  double std_shift = 0.0;  // population
};

struct GenerationEntry {
  std::string sample_id;
  std::string caption;
  double confidence = 1.0;
};

// Best tag per feature among candidates passing IoU >= iou_threshold or
// containment >= containment_threshold; highest IoU wins, ties fall to
// containment then first tag order.
Assignments assign_labels_to_features(std::span<const BBox> visual_boxes,
                                      std::span<const ObjectTag> tags,
                                      double iou_threshold = 0.6,
                                      double containment_threshold = 0.8);

// Image-level presence PMI in bits: log2 p(s,o) / (p(s) p(o)).
PmiTable pmi_table(std::span<const SampleRecord> corpus,
                   long min_joint = 5);

RankedList top_informative(const PmiTable& t, const std::string& scene,
                           std::size_t k);

// Rewrites LABEL tokens of the ablated objects and the VISUAL tokens
// assigned to them as PAD with empty surface; length is unchanged.
std::pair<AblationPlan, InputLayout> apply_ablation(
    const SampleRecord& record, const InputLayout& layout,
    std::span<const TagAssignment> assignments,
    std::span<const std::string> objects);

// Trim, case-fold, collapse internal whitespace.
std::string normalize_caption(const std::string& s);

// Fraction of ids whose normalized captions differ.
double change_rate(const std::map<std::string, std::string>& before,
                   const std::map<std::string, std::string>& after);

ShiftStats confidence_shift(std::span<const ShiftPair> pairs);

// Generation logs: NDJSON {sample_id, caption, confidence}.
std::vector<GenerationEntry> load_generation_log(
    const std::filesystem::path& path);
void save_generation_log(std::span<const GenerationEntry> entries,
                         const std::filesystem::path& path);

}  // namespace mmscope
