#include "mmscope/diagnosticity.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <unordered_set>

#include "json.hpp"
#include "mmscope/errors.hpp"

namespace mmscope {

namespace {

using json = nlohmann::ordered_json;

}  // namespace

const char* to_string(TagRule r) {
  switch (r) {
    case TagRule::IouRule: return "IOU_RULE";
    case TagRule::ContainmentRule: return "CONTAINMENT_RULE";
    case TagRule::Unassigned: return "UNASSIGNED";
  }
  return "?";
}

Assignments assign_labels_to_features(std::span<const BBox> visual_boxes,
                                      std::span<const ObjectTag> tags,
                                      double iou_threshold,
                                      double containment_threshold) {
  Assignments out;
  out.items.reserve(visual_boxes.size());
  std::size_t assigned = 0;

  for (std::size_t vi = 0; vi < visual_boxes.size(); ++vi) {
    const BBox& vf = visual_boxes[vi];
    TagAssignment best;
    best.visual_index = static_cast<int>(vi);
    bool found = false;
    double best_iou = -1.0;
    double best_containment = -1.0;

    for (std::size_t ti = 0; ti < tags.size(); ++ti) {
      const double iou = bbox_iou(vf, tags[ti].bbox);
      const double cont = containment_fraction(vf, tags[ti].bbox);
      const bool candidate =
          iou >= iou_threshold || cont >= containment_threshold;
      if (!candidate) continue;
      const bool better =
          iou > best_iou || (iou == best_iou && cont > best_containment);
      if (found && !better) continue;
      found = true;
      best_iou = iou;
      best_containment = cont;
      best.label = tags[ti].label;
      best.iou = iou;
      best.containment = cont;
      best.rule = iou >= iou_threshold ? TagRule::IouRule
                                       : TagRule::ContainmentRule;
    }
    if (found) ++assigned;
    out.items.push_back(std::move(best));
  }

  out.coverage = visual_boxes.empty()
                     ? 1.0
                     : static_cast<double>(assigned) /
                           static_cast<double>(visual_boxes.size());
  return out;
}

PmiTable pmi_table(std::span<const SampleRecord> corpus, long min_joint) {
  if (corpus.empty()) fail(errc::empty_corpus, "pmi_table: no samples");

  PmiTable table;
  std::map<std::string, long> scene_counts;
  std::map<std::string, long> object_counts;
  std::map<std::pair<std::string, std::string>, long> joint_counts;

  for (const SampleRecord& rec : corpus) {
    if (!rec.scene_type.has_value()) {
      fail(errc::invalid_input,
           "sample " + rec.sample_id + " has no scene_type");
    }
    const std::string& scene = *rec.scene_type;
    ++scene_counts[scene];
    std::unordered_set<std::string> present;
    for (const ObjectTag& tag : rec.object_tags) present.insert(tag.label);
    for (const std::string& obj : present) {
      ++object_counts[obj];
      ++joint_counts[{scene, obj}];
    }
  }

  table.total_images = static_cast<long>(corpus.size());
  for (const auto& [scene, count] : scene_counts) table.scenes.insert(scene);

  const double total = static_cast<double>(table.total_images);
  for (const auto& [key, joint] : joint_counts) {
    if (joint < min_joint) continue;
    const long sc = scene_counts.at(key.first);
    const long oc = object_counts.at(key.second);
    const double p_joint = static_cast<double>(joint) / total;
    const double p_scene = static_cast<double>(sc) / total;
    const double p_object = static_cast<double>(oc) / total;
    PmiEntry e;
    e.pmi = std::log2(p_joint / (p_scene * p_object));
    e.joint_count = joint;
    e.scene_count = sc;
    e.object_count = oc;
    e.total = table.total_images;
    table.entries.emplace(key, e);
  }
  return table;
}

RankedList top_informative(const PmiTable& t, const std::string& scene,
                           std::size_t k) {
  if (!t.scenes.count(scene)) {
    fail(errc::unknown_scene, "scene '" + scene + "' not in PMI table");
  }
  std::vector<std::pair<std::string, double>> scored;
  for (const auto& [key, entry] : t.entries) {
    if (key.first == scene) scored.emplace_back(key.second, entry.pmi);
  }
  // entries are keyed in lexicographic object order; stable sort keeps
  // that order for ties.
  std::stable_sort(scored.begin(), scored.end(),
                   [](const auto& a, const auto& b) {
                     return a.second > b.second;
                   });
  RankedList out;
  for (const auto& [label, pmi] : scored) {
    if (out.items.size() >= k) break;
    out.items.push_back(label);
    out.scores.push_back(pmi);
  }
  return out;
}

std::pair<AblationPlan, InputLayout> apply_ablation(
    const SampleRecord& record, const InputLayout& layout,
    std::span<const TagAssignment> assignments,
    std::span<const std::string> objects) {
  if (objects.empty()) {
    fail(errc::invalid_input, "apply_ablation: no objects requested");
  }

  AblationPlan plan;
  plan.sample_id = record.sample_id;

  std::unordered_set<std::string> requested(objects.begin(), objects.end());
  std::unordered_set<std::string> present;
  for (const TokenEntry& e : layout.tokens) {
    if (e.kind == TokenKind::LABEL) present.insert(e.surface);
  }

  std::unordered_set<std::string> ablated;
  for (const std::string& obj : objects) {
    if (present.count(obj)) {
      if (ablated.insert(obj).second) plan.ablated_objects.push_back(obj);
    } else {
      plan.missing_objects.push_back(obj);
    }
  }

  const std::vector<int> visual_positions =
      layout.positions_of(TokenKind::VISUAL);

  InputLayout rewritten = layout;
  for (TokenEntry& e : rewritten.tokens) {
    if (e.kind == TokenKind::LABEL && ablated.count(e.surface)) {
      plan.label_positions_to_pad.push_back(e.position);
      e.kind = TokenKind::PAD;
      e.surface.clear();
      e.group_id.reset();
      e.bbox.reset();
    }
  }
  for (const TagAssignment& a : assignments) {
    if (a.rule == TagRule::Unassigned || !ablated.count(a.label)) continue;
    if (a.visual_index < 0 ||
        a.visual_index >= static_cast<int>(visual_positions.size())) {
      fail(errc::alignment_error,
           "assignment visual_index " + std::to_string(a.visual_index) +
               " out of range");
    }
    const int pos = visual_positions[static_cast<std::size_t>(a.visual_index)];
    TokenEntry& e = rewritten.tokens[static_cast<std::size_t>(pos)];
    if (e.kind == TokenKind::PAD) continue;  // idempotent re-application
    plan.visual_positions_to_pad.push_back(pos);
    e.kind = TokenKind::PAD;
    e.surface.clear();
    e.bbox.reset();
  }

  return {std::move(plan), std::move(rewritten)};
}

std::string normalize_caption(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  bool in_space = true;  // leading whitespace is dropped
  for (char ch : s) {
    if (std::isspace(static_cast<unsigned char>(ch))) {
      in_space = true;
      continue;
    }
    if (in_space && !out.empty()) out.push_back(' ');
    in_space = false;
    out.push_back(
        static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
  }
  return out;
}

double change_rate(const std::map<std::string, std::string>& before,
                   const std::map<std::string, std::string>& after) {
  if (before.size() != after.size()) {
    fail(errc::key_mismatch, "before/after id sets differ in size");
  }
  std::size_t changed = 0;
  for (const auto& [id, cap_before] : before) {
    const auto it = after.find(id);
    if (it == after.end()) {
      fail(errc::key_mismatch, "id '" + id + "' missing from after map");
    }
    if (normalize_caption(cap_before) != normalize_caption(it->second)) {
      ++changed;
    }
  }
  if (before.empty()) return 0.0;
  return static_cast<double>(changed) / static_cast<double>(before.size());
}

ShiftStats confidence_shift(std::span<const ShiftPair> pairs) {
  ShiftStats stats;
  stats.n_total = pairs.size();
  for (const ShiftPair& p : pairs) {
    if (!(p.before > 0.0 && p.before <= 1.0 && p.after > 0.0 &&
          p.after <= 1.0)) {
      fail(errc::invalid_input, "confidence values must lie in (0, 1]");
    }
    if (!p.changed) {
      stats.shifts.push_back(p.before - p.after);
      ++stats.n_unchanged;
    }
  }
  if (stats.n_unchanged == 0) {
    fail(errc::no_unchanged_pairs, "no unchanged caption pairs");
  }
  stats.change_rate = 1.0 - static_cast<double>(stats.n_unchanged) /
                                static_cast<double>(stats.n_total);
  double sum = 0.0;
  for (double s : stats.shifts) sum += s;
  stats.mean_shift = sum / static_cast<double>(stats.shifts.size());
  double ss = 0.0;
  for (double s : stats.shifts) {
    const double d = s - stats.mean_shift;
    ss += d * d;
  }
  stats.std_shift = std::sqrt(ss / static_cast<double>(stats.shifts.size()));
  return stats;
}

std::vector<GenerationEntry> load_generation_log(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(errc::io_error, "cannot open " + path.string());
  std::vector<GenerationEntry> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      out.push_back({j.at("sample_id").get<std::string>(),
                     j.at("caption").get<std::string>(),
                     j.at("confidence").get<double>()});
    } catch (const nlohmann::json::exception& e) {
      fail(errc::parse_error,
           "line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

void save_generation_log(std::span<const GenerationEntry> entries,
                         const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(errc::io_error, "cannot write " + path.string());
  for (const GenerationEntry& e : entries) {
    json j;
    j["sample_id"] = e.sample_id;
    j["caption"] = e.caption;
    j["confidence"] = e.confidence;
    out << j.dump() << '\n';
  }
}

}  // namespace mmscope
