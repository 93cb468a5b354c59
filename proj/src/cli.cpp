#include "mmscope/cli.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "mmscope/attention_stats.hpp"
#include "mmscope/diagnosticity.hpp"
#include "mmscope/errors.hpp"
#include "mmscope/numstat.hpp"
#include "mmscope/parallel.hpp"
#include "mmscope/probekit.hpp"
#include "mmscope/rank_overlap.hpp"
#include "mmscope/report.hpp"
#include "mmscope/rng.hpp"
#include "mmscope/sample_model.hpp"
#include "mmscope/scene_text.hpp"
#include "mmscope/synth.hpp"

namespace mmscope {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

// ---------------------------------------------------------------------
// shared helpers

std::vector<Sample> load_sorted_samples(const fs::path& path) {
  std::vector<Sample> samples = load_samples(path);
  std::sort(samples.begin(), samples.end(),
            [](const Sample& a, const Sample& b) {
              return a.first.sample_id < b.first.sample_id;
            });
  return samples;
}

AttentionTensor tensor_for(const fs::path& attn_dir,
                           const std::string& sample_id) {
  const fs::path p = attn_dir / (sample_id + ".mmat");
  if (!fs::exists(p)) {
    fail(errc::io_error, "no tensor for sample " + sample_id + " at " +
                             p.string());
  }
  return load_attention(p);
}

// scene_type if present, otherwise majority label extracted from the
// scene captions.
std::optional<std::string> scene_of(const SampleRecord& rec,
                                    const SceneLexicon& lex) {
  if (rec.scene_type.has_value()) return rec.scene_type;
  std::map<std::string, long> counts;
  for (const std::string& caption : rec.scene_captions) {
    const auto label = extract_scene_label(caption, lex);
    if (label.has_value()) ++counts[*label];
  }
  std::optional<std::string> best;
  long best_count = 0;
  for (const auto& [label, count] : counts) {
    if (count > best_count) {
      best = label;
      best_count = count;
    }
  }
  return best;
}

TokenKind kind_from_block_word(const std::string& word) {
  if (word == "vision") return TokenKind::VISUAL;
  if (word == "label") return TokenKind::LABEL;
  if (word == "text") return TokenKind::TEXT;
  if (word == "cls") return TokenKind::CLS;
  if (word == "sep") return TokenKind::SEP;
  if (word == "pad") return TokenKind::PAD;
  fail(errc::invalid_input, "unknown block kind '" + word + "'");
}

// "vision-label" or "vision-to-label" -> (VISUAL, LABEL)
std::pair<TokenKind, TokenKind> parse_block(const std::string& name) {
  std::string s = name;
  const auto to_pos = s.find("-to-");
  if (to_pos != std::string::npos) s.replace(to_pos, 4, "-");
  const auto dash = s.find('-');
  if (dash == std::string::npos) {
    fail(errc::invalid_input, "block '" + name + "' is not FROM-TO");
  }
  return {kind_from_block_word(s.substr(0, dash)),
          kind_from_block_word(s.substr(dash + 1))};
}

std::string block_label(TokenKind from, TokenKind to) {
  return std::string(block_name(from)) + "-" + block_name(to);
}

SceneLexicon lexicon_from_option(const std::string& path) {
  if (path.empty()) return SceneLexicon::defaults();
  return SceneLexicon::from_json_file(path);
}

std::map<std::string, std::string> caption_map(
    const std::vector<GenerationEntry>& entries) {
  std::map<std::string, std::string> m;
  for (const GenerationEntry& e : entries) m[e.sample_id] = e.caption;
  return m;
}

// Keeps the record/layout alignment invariant: boxes of padded-out
// features are dropped from visual_boxes, in original order.
SampleRecord record_for_rewritten(const SampleRecord& rec,
                                  const InputLayout& original,
                                  const InputLayout& rewritten) {
  SampleRecord out = rec;
  out.visual_boxes.clear();
  const std::vector<int> positions = original.positions_of(TokenKind::VISUAL);
  for (std::size_t i = 0; i < positions.size(); ++i) {
    const auto pos = static_cast<std::size_t>(positions[i]);
    if (rewritten.tokens[pos].kind == TokenKind::VISUAL) {
      out.visual_boxes.push_back(rec.visual_boxes[i]);
    }
  }
  return out;
}

json f1_to_json(const F1Report& rep) {
  json j;
  j["micro_f1"] = rep.micro_f1;
  j["macro_f1"] = rep.macro_f1;
  j["weighted_f1"] = rep.weighted_f1;
  json per_class;
  for (const auto& [label, m] : rep.per_class) {
    per_class[label] = {{"precision", m.precision},
                        {"recall", m.recall},
                        {"f1", m.f1},
                        {"support", m.support}};
  }
  j["per_class"] = std::move(per_class);
  return j;
}

// ---------------------------------------------------------------------
// synth

struct SynthOptions {
  std::string spec_path;
  std::string preset = "paper";
  std::uint64_t seed = 0;
  std::string out_dir;
  double tau_override = 0.0;  // 0 = keep spec value
  int samples_override = 0;
};

int cmd_synth(const SynthOptions& opt) {
  SynthSpec spec;
  if (!opt.spec_path.empty()) {
    spec = SynthSpec::from_json_file(opt.spec_path);
  } else if (opt.preset == "paper") {
    spec = SynthSpec::paper_default();
  } else {
    fail(errc::invalid_spec, "unknown preset '" + opt.preset + "'");
  }
  if (opt.tau_override != 0.0) {
    spec.tau = opt.tau_override < 0.0
                   ? std::numeric_limits<double>::infinity()
                   : opt.tau_override;
  }
  if (opt.samples_override > 0) spec.n_samples = opt.samples_override;

  const SynthCorpus corpus = synth_corpus(spec, opt.seed);
  write_corpus(corpus, opt.out_dir);
  write_text(spec.to_json() + "\n", fs::path(opt.out_dir) / "spec.json");
  std::cout << "wrote " << corpus.samples.size() << " samples to "
            << opt.out_dir << "\n";
  return 0;
}

// ---------------------------------------------------------------------
// validate

struct ValidateOptions {
  std::string attn_dir;
  std::string samples_path;
};

int cmd_validate(const ValidateOptions& opt) {
  const std::vector<Sample> samples = load_sorted_samples(opt.samples_path);
  std::size_t issue_count = 0;
  std::optional<int> sep_position;
  for (const auto& [rec, layout] : samples) {
    const AttentionTensor tensor = tensor_for(opt.attn_dir, rec.sample_id);
    const ValidationReport report = validate_sample(tensor, layout);
    for (const ValidationIssue& issue : report.issues) {
      std::cout << rec.sample_id << ": " << issue.code << " "
                << issue.message << "\n";
      ++issue_count;
    }
    const auto sep = layout.sep_position();
    if (sep.has_value()) {
      if (sep_position.has_value() && *sep_position != *sep) {
        std::cout << rec.sample_id << ": SepPositionVaries expected "
                  << *sep_position << " got " << *sep << "\n";
        ++issue_count;
      }
      if (!sep_position.has_value()) sep_position = sep;
    }
  }
  if (issue_count > 0) {
    std::cout << issue_count << " issue(s) across " << samples.size()
              << " sample(s)\n";
    return 2;
  }
  std::cout << "ok: " << samples.size() << " sample(s) valid\n";
  return 0;
}

// ---------------------------------------------------------------------
// attn-stats

struct AttnStatsOptions {
  std::string attn_dir;
  std::string samples_path;
  int layer = 0;
  std::string blocks = "vision-vision,vision-label,label-vision";
  bool include_pad = false;
  bool pooled = false;
  std::string format = "csv";
  unsigned jobs = 0;
  std::string out_path;
  std::string sep_profile_path;
};

int cmd_attn_stats(const AttnStatsOptions& opt) {
  const ReportFormat format = report_format_from(opt.format);
  if (format == ReportFormat::Json) {
    fail(errc::unsupported_format,
         "attn-stats emits row data; use csv or json-lines");
  }
  const std::vector<Sample> samples = load_sorted_samples(opt.samples_path);

  std::vector<std::pair<TokenKind, TokenKind>> blocks;
  std::stringstream block_stream(opt.blocks);
  std::string name;
  while (std::getline(block_stream, name, ',')) {
    blocks.push_back(parse_block(name));
  }
  if (blocks.empty()) fail(errc::invalid_input, "no blocks requested");

  struct Row {
    std::string sample_id;
    std::string block;
    BlockStats stats;
    bool empty = false;
  };
  std::vector<std::vector<Row>> rows(samples.size());
  std::vector<SepProfile> profiles(samples.size());
  const bool want_profile = !opt.sep_profile_path.empty();

  const unsigned jobs = opt.jobs > 0 ? opt.jobs : default_jobs();
  parallel_for(samples.size(), jobs, [&](std::size_t i) {
    const auto& [rec, layout] = samples[i];
    const AttentionTensor tensor = tensor_for(opt.attn_dir, rec.sample_id);
    const AttentionMatrix m = max_over_heads(tensor, opt.layer);
    SubBlock pooled;  // entries of every requested block together
    for (const auto& [from, to] : blocks) {
      Row row;
      row.sample_id = rec.sample_id;
      row.block = block_label(from, to);
      const SubBlock b = subblock(m, layout, from, to, opt.include_pad);
      if (b.empty()) {
        row.empty = true;
      } else {
        row.stats = block_stats(b);
        pooled.values.insert(pooled.values.end(), b.values.begin(),
                             b.values.end());
      }
      rows[i].push_back(std::move(row));
    }
    if (opt.pooled) {
      Row row;
      row.sample_id = rec.sample_id;
      row.block = "pooled";
      if (pooled.empty()) {
        row.empty = true;
      } else {
        row.stats = block_stats(pooled);
      }
      rows[i].push_back(std::move(row));
    }
    if (want_profile) profiles[i] = sep_inbound_profile(tensor, layout);
  });

  if (format == ReportFormat::Csv) {
    CsvWriter csv({"sample_id", "layer", "block", "mass", "std", "n"});
    csv.set_meta("layer", std::to_string(opt.layer));
    csv.set_meta("aggregation", "max-heads");
    csv.set_meta("include_pad", opt.include_pad ? "true" : "false");
    csv.set_meta("std_kind", "population");
    for (const auto& sample_rows : rows) {
      for (const Row& row : sample_rows) {
        if (row.empty) continue;
        csv.add_row({row.sample_id, std::to_string(opt.layer), row.block,
                     format_double(row.stats.mass),
                     format_double(row.stats.std_dev),
                     std::to_string(row.stats.n)});
      }
    }
    csv.write(opt.out_path);
  } else {
    std::ostringstream os;
    for (const auto& sample_rows : rows) {
      for (const Row& row : sample_rows) {
        if (row.empty) continue;
        json j;
        j["sample_id"] = row.sample_id;
        j["layer"] = opt.layer;
        j["block"] = row.block;
        j["mass"] = row.stats.mass;
        j["std"] = row.stats.std_dev;
        j["n"] = row.stats.n;
        os << j.dump() << '\n';
      }
    }
    write_text(os.str(), opt.out_path);
  }

  if (want_profile) {
    CsvWriter csv({"sample_id", "layer", "kind", "share", "zero_mass"});
    csv.set_meta("aggregation", "max-heads");
    for (std::size_t i = 0; i < samples.size(); ++i) {
      const std::string& id = samples[i].first.sample_id;
      const SepProfile& prof = profiles[i];
      for (std::size_t layer = 0; layer < prof.shares.size(); ++layer) {
        for (const auto& [kind, share] : prof.shares[layer]) {
          csv.add_row({id, std::to_string(layer), to_string(kind),
                       format_double(share),
                       prof.zero_mass[layer] ? "true" : "false"});
        }
      }
    }
    csv.write(opt.sep_profile_path);
  }
  return 0;
}

// ---------------------------------------------------------------------
// rank-overlap

struct RankOverlapOptions {
  std::string attn_dir;
  std::string samples_path;
  std::string depths = "3,5,7";
  double p = 0.9;
  int layer = 0;
  int top_scenes = 7;
  int list_len = 0;  // 0 = max depth
  std::string lexicon_path;
  std::string out_path;
  std::string correlation_path;
};

int cmd_rank_overlap(const RankOverlapOptions& opt) {
  const std::vector<Sample> samples = load_sorted_samples(opt.samples_path);
  const SceneLexicon lex = lexicon_from_option(opt.lexicon_path);

  std::vector<int> depths;
  std::stringstream depth_stream(opt.depths);
  std::string tok;
  while (std::getline(depth_stream, tok, ',')) {
    depths.push_back(std::stoi(tok));
  }
  if (depths.empty()) fail(errc::invalid_input, "no depths given");
  const int list_len =
      opt.list_len > 0 ? opt.list_len
                       : *std::max_element(depths.begin(), depths.end());

  // Scene per sample, then the most frequent scenes.
  std::map<std::string, std::vector<std::size_t>> by_scene;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto scene = scene_of(samples[i].first, lex);
    if (scene.has_value()) by_scene[*scene].push_back(i);
  }
  std::vector<std::pair<std::string, std::size_t>> scene_counts;
  for (const auto& [scene, idx] : by_scene) {
    scene_counts.emplace_back(scene, idx.size());
  }
  std::stable_sort(scene_counts.begin(), scene_counts.end(),
                   [](const auto& a, const auto& b) {
                     return a.second > b.second;
                   });
  if (scene_counts.size() > static_cast<std::size_t>(opt.top_scenes)) {
    scene_counts.resize(static_cast<std::size_t>(opt.top_scenes));
  }

  // O_M: per scene, total inbound attention per object over the scene's
  // samples. O_D: per scene, image frequency of each object.
  std::vector<SampleRecord> records;
  records.reserve(samples.size());
  for (const auto& [rec, layout] : samples) {
    records.push_back(rec);
    if (!records.back().scene_type.has_value()) {
      records.back().scene_type = scene_of(rec, lex);
    }
  }

  std::map<std::string, RankedList> model_lists, data_lists;
  for (const auto& [scene, count] : scene_counts) {
    std::map<std::string, double> attn_score;
    for (std::size_t i : by_scene[scene]) {
      const auto& [rec, layout] = samples[i];
      if (layout.count_of(TokenKind::LABEL) == 0) continue;
      const AttentionTensor tensor = tensor_for(opt.attn_dir, rec.sample_id);
      const AttentionMatrix m = max_over_heads(tensor, opt.layer);
      const RankedList per_sample = attended_object_ranking(
          m, layout, rec, layout.count_of(TokenKind::LABEL));
      for (std::size_t k = 0; k < per_sample.items.size(); ++k) {
        attn_score[per_sample.items[k]] += per_sample.scores[k];
      }
    }
    std::vector<std::pair<std::string, double>> ranked(attn_score.begin(),
                                                       attn_score.end());
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const auto& a, const auto& b) {
                       return a.second > b.second;
                     });
    RankedList model_list;
    for (const auto& [label, score] : ranked) {
      if (model_list.items.size() >=
          static_cast<std::size_t>(list_len)) {
        break;
      }
      model_list.items.push_back(label);
      model_list.scores.push_back(score);
    }
    model_lists[scene] = std::move(model_list);
    data_lists[scene] = frequent_object_ranking(
        records, scene, static_cast<std::size_t>(list_len));
  }

  const std::vector<OverlapRow> table =
      overlap_table(model_lists, data_lists, depths, opt.p);

  CsvWriter csv({"scene", "depth", "rbo_norm", "rbo_raw", "iou"});
  csv.set_meta("p", opt.p);
  csv.set_meta("layer", std::to_string(opt.layer));
  csv.set_meta("aggregation", "max-heads");
  csv.set_meta("ranking", "inbound-mass");
  for (const OverlapRow& row : table) {
    csv.add_row({row.scene, std::to_string(row.depth),
                 format_double(row.rbo_norm), format_double(row.rbo_raw),
                 format_double(row.iou)});
  }
  csv.write(opt.out_path);

  if (!opt.correlation_path.empty()) {
    std::vector<double> xs, ys;
    for (const OverlapRow& row : table) {
      xs.push_back(row.rbo_norm);
      ys.push_back(row.iou);
    }
    const Correlation c = pearson_r(xs, ys);
    json j;
    j["meta"] = make_meta();
    j["r"] = c.r;
    j["df"] = c.df;
    j["p_value"] = c.p_value;
    j["n"] = c.n;
    write_json(j, opt.correlation_path);
  }
  return 0;
}

// ---------------------------------------------------------------------
// pmi

struct PmiOptions {
  std::string samples_path;
  long min_joint = 5;
  std::string lexicon_path;
  std::string out_path;
  int top_k = 3;
  std::string top_out_path;
};

int cmd_pmi(const PmiOptions& opt) {
  const std::vector<Sample> samples = load_sorted_samples(opt.samples_path);
  const SceneLexicon lex = lexicon_from_option(opt.lexicon_path);
  std::vector<SampleRecord> records;
  for (const auto& [rec, layout] : samples) {
    records.push_back(rec);
    if (!records.back().scene_type.has_value()) {
      const auto scene = scene_of(rec, lex);
      if (!scene.has_value()) {
        fail(errc::invalid_input,
             "sample " + rec.sample_id +
                 " has no scene_type and no extractable scene caption");
      }
      records.back().scene_type = scene;
    }
  }

  const PmiTable table = pmi_table(records, opt.min_joint);

  CsvWriter csv({"scene", "object", "pmi", "joint", "scene_count",
                 "object_count"});
  csv.set_meta("min_joint", std::to_string(opt.min_joint));
  csv.set_meta("total_images", std::to_string(table.total_images));
  csv.set_meta("pmi_base", "2");
  for (const auto& [key, e] : table.entries) {
    csv.add_row({key.first, key.second, format_double(e.pmi),
                 std::to_string(e.joint_count),
                 std::to_string(e.scene_count),
                 std::to_string(e.object_count)});
  }
  csv.write(opt.out_path);

  if (!opt.top_out_path.empty()) {
    json j;
    j["meta"] = make_meta();
    j["meta"]["min_joint"] = opt.min_joint;
    j["meta"]["k"] = opt.top_k;
    json scenes;
    for (const std::string& scene : table.scenes) {
      const RankedList top = top_informative(
          table, scene, static_cast<std::size_t>(opt.top_k));
      json items = json::array();
      for (std::size_t i = 0; i < top.items.size(); ++i) {
        items.push_back({{"object", top.items[i]}, {"pmi", top.scores[i]}});
      }
      scenes[scene] = std::move(items);
    }
    j["scenes"] = std::move(scenes);
    write_json(j, opt.top_out_path);
  }
  return 0;
}

// ---------------------------------------------------------------------
// tag-features

struct TagFeaturesOptions {
  std::string samples_path;
  double iou_threshold = 0.6;
  double containment_threshold = 0.8;
  std::string out_path;
  std::string summary_path;
};

int cmd_tag_features(const TagFeaturesOptions& opt) {
  const std::vector<Sample> samples = load_sorted_samples(opt.samples_path);
  std::ostringstream os;
  double coverage_sum = 0.0;
  std::size_t assigned_total = 0, feature_total = 0;
  for (const auto& [rec, layout] : samples) {
    const Assignments a = assign_labels_to_features(
        rec.visual_boxes, rec.object_tags, opt.iou_threshold,
        opt.containment_threshold);
    json j;
    j["sample_id"] = rec.sample_id;
    j["coverage"] = a.coverage;
    json items = json::array();
    for (const TagAssignment& t : a.items) {
      items.push_back({{"visual_index", t.visual_index},
                       {"label", t.label},
                       {"iou", t.iou},
                       {"containment", t.containment},
                       {"rule", to_string(t.rule)}});
      if (t.rule != TagRule::Unassigned) ++assigned_total;
      ++feature_total;
    }
    j["assignments"] = std::move(items);
    os << j.dump() << '\n';
    coverage_sum += a.coverage;
  }
  write_text(os.str(), opt.out_path);

  json summary;
  summary["meta"] = make_meta();
  summary["meta"]["iou_threshold"] = opt.iou_threshold;
  summary["meta"]["containment_threshold"] = opt.containment_threshold;
  summary["n_samples"] = samples.size();
  summary["mean_coverage"] =
      samples.empty() ? 1.0
                      : coverage_sum / static_cast<double>(samples.size());
  summary["pooled_coverage"] =
      feature_total == 0 ? 1.0
                         : static_cast<double>(assigned_total) /
                               static_cast<double>(feature_total);
  if (!opt.summary_path.empty()) {
    write_json(summary, opt.summary_path);
  } else {
    std::cout << summary.dump(2) << "\n";
  }
  return 0;
}

// ---------------------------------------------------------------------
// ablate

struct AblateOptions {
  std::string samples_path;
  std::string objects;       // explicit comma list
  int per_scene_top = 0;     // >0: top-k informative objects per scene
  std::string mode = "cumulative";
  long min_joint = 5;
  double iou_threshold = 0.6;
  double containment_threshold = 0.8;
  std::string lexicon_path;
  std::string plans_path;
  std::string layouts_path;
};

int cmd_ablate(const AblateOptions& opt) {
  if (opt.mode != "cumulative" && opt.mode != "independent") {
    fail(errc::invalid_input, "mode must be cumulative or independent");
  }
  const std::vector<Sample> samples = load_sorted_samples(opt.samples_path);
  const SceneLexicon lex = lexicon_from_option(opt.lexicon_path);

  std::vector<std::string> explicit_objects;
  if (!opt.objects.empty()) {
    std::stringstream ss(opt.objects);
    std::string tok;
    while (std::getline(ss, tok, ',')) explicit_objects.push_back(tok);
  }
  if (explicit_objects.empty() && opt.per_scene_top <= 0) {
    fail(errc::invalid_input,
         "need --objects or --per-scene-top to pick ablation targets");
  }

  // Scene -> top informative objects, when requested.
  std::map<std::string, std::vector<std::string>> per_scene;
  std::vector<SampleRecord> records;
  for (const auto& [rec, layout] : samples) {
    records.push_back(rec);
    if (!records.back().scene_type.has_value()) {
      records.back().scene_type = scene_of(rec, lex);
    }
  }
  if (opt.per_scene_top > 0) {
    std::vector<SampleRecord> with_scene;
    for (const SampleRecord& r : records) {
      if (r.scene_type.has_value()) with_scene.push_back(r);
    }
    const PmiTable table = pmi_table(with_scene, opt.min_joint);
    for (const std::string& scene : table.scenes) {
      per_scene[scene] = top_informative(
                             table, scene,
                             static_cast<std::size_t>(opt.per_scene_top))
                             .items;
    }
  }

  std::ostringstream plans_os;
  std::vector<Sample> rewritten;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& [rec, layout] = samples[i];
    std::vector<std::string> targets = explicit_objects;
    if (opt.per_scene_top > 0) {
      const auto& scene = records[i].scene_type;
      if (scene.has_value() && per_scene.count(*scene)) {
        const auto& top = per_scene.at(*scene);
        targets.insert(targets.end(), top.begin(), top.end());
      }
    }
    if (targets.empty()) {
      rewritten.emplace_back(rec, layout);
      continue;
    }

    const Assignments assignments = assign_labels_to_features(
        rec.visual_boxes, rec.object_tags, opt.iou_threshold,
        opt.containment_threshold);

    if (opt.mode == "cumulative") {
      auto [plan, new_layout] =
          apply_ablation(rec, layout, assignments.items, targets);
      json j;
      j["sample_id"] = plan.sample_id;
      j["mode"] = "cumulative";
      j["ablated_objects"] = plan.ablated_objects;
      j["missing_objects"] = plan.missing_objects;
      j["label_positions_to_pad"] = plan.label_positions_to_pad;
      j["visual_positions_to_pad"] = plan.visual_positions_to_pad;
      plans_os << j.dump() << '\n';
      rewritten.emplace_back(record_for_rewritten(rec, layout, new_layout),
                             std::move(new_layout));
    } else {
      // Independent: one plan per object; the emitted layout ablates
      // only the first present target, so downstream layouts stay
      // single-object.
      bool emitted_layout = false;
      for (const std::string& obj : targets) {
        const std::vector<std::string> single{obj};
        auto [plan, new_layout] =
            apply_ablation(rec, layout, assignments.items, single);
        json j;
        j["sample_id"] = plan.sample_id;
        j["mode"] = "independent";
        j["ablated_objects"] = plan.ablated_objects;
        j["missing_objects"] = plan.missing_objects;
        j["label_positions_to_pad"] = plan.label_positions_to_pad;
        j["visual_positions_to_pad"] = plan.visual_positions_to_pad;
        plans_os << j.dump() << '\n';
        if (!emitted_layout && !plan.ablated_objects.empty()) {
          rewritten.emplace_back(
              record_for_rewritten(rec, layout, new_layout),
              std::move(new_layout));
          emitted_layout = true;
        }
      }
      if (!emitted_layout) rewritten.emplace_back(rec, layout);
    }
  }

  write_text(plans_os.str(), opt.plans_path);
  if (!opt.layouts_path.empty()) {
    save_samples(rewritten, opt.layouts_path);
  }
  return 0;
}

// ---------------------------------------------------------------------
// shift-stats

struct ShiftStatsOptions {
  std::string before_path;
  std::string after_path;
  std::string before2_path;
  std::string after2_path;
  std::string out_path;
};

ShiftStats shift_stats_for(const std::string& before_path,
                           const std::string& after_path,
                           double* out_change_rate) {
  const auto before = load_generation_log(before_path);
  const auto after = load_generation_log(after_path);
  const auto before_caps = caption_map(before);
  const auto after_caps = caption_map(after);
  const double rate = change_rate(before_caps, after_caps);
  if (out_change_rate) *out_change_rate = rate;

  std::map<std::string, const GenerationEntry*> after_by_id;
  for (const GenerationEntry& e : after) after_by_id[e.sample_id] = &e;
  std::vector<ShiftPair> pairs;
  for (const GenerationEntry& e : before) {
    const GenerationEntry* a = after_by_id.at(e.sample_id);
    pairs.push_back({e.confidence, a->confidence,
                     normalize_caption(e.caption) !=
                         normalize_caption(a->caption)});
  }
  return confidence_shift(pairs);
}

json shift_to_json(const ShiftStats& s, double rate) {
  json j;
  j["n_total"] = s.n_total;
  j["n_unchanged"] = s.n_unchanged;
  j["change_rate"] = rate;
  j["mean_shift"] = s.mean_shift;
  j["std_shift"] = s.std_shift;
  j["shifts"] = s.shifts;
  return j;
}

int cmd_shift_stats(const ShiftStatsOptions& opt) {
  if (opt.before2_path.empty() != opt.after2_path.empty()) {
    fail(errc::invalid_input, "--before2 and --after2 go together");
  }
  double rate = 0.0;
  const ShiftStats stats =
      shift_stats_for(opt.before_path, opt.after_path, &rate);

  json j;
  j["meta"] = make_meta();
  j["primary"] = shift_to_json(stats, rate);

  if (!opt.before2_path.empty()) {
    double rate2 = 0.0;
    const ShiftStats stats2 =
        shift_stats_for(opt.before2_path, opt.after2_path, &rate2);
    j["secondary"] = shift_to_json(stats2, rate2);
    const ZTestResult z = two_sample_z(stats.shifts, stats2.shifts);
    j["z_test"] = {{"z", z.z}, {"p_two_sided", z.p_two_sided}};
  }
  write_json(j, opt.out_path);
  return 0;
}

// ---------------------------------------------------------------------
// probe

struct ProbeOptions {
  std::string features_path;
  double split_fraction = 0.5;
  std::uint64_t seed = 0;
  std::size_t cap = 0;  // 0 = no downsampling
  int trees = 100;
  std::string model_tag = "finetuned";
  bool ablated = false;
  std::string format = "json";
  std::string lexicon_path;
  std::string out_path;
};

int cmd_probe(const ProbeOptions& opt) {
  if (report_format_from(opt.format) != ReportFormat::Json) {
    fail(errc::unsupported_format,
         "probe reports are nested; use json");
  }
  const std::vector<Sample> samples = load_sorted_samples(opt.features_path);
  const SceneLexicon lex = lexicon_from_option(opt.lexicon_path);
  std::vector<SampleRecord> records;
  for (const auto& [rec, layout] : samples) {
    records.push_back(rec);
    if (!records.back().scene_type.has_value()) {
      records.back().scene_type = scene_of(rec, lex);
    }
  }

  const std::size_t cap =
      opt.cap > 0 ? opt.cap : std::numeric_limits<std::size_t>::max();
  const ProbeDataset dataset = build_probe_dataset(records, cap, opt.seed);
  SplitResult parts = split(dataset, opt.split_fraction, opt.seed);
  const ForestModel model =
      train_forest(parts.train, opt.trees, opt.seed);
  const F1Report forest_report = evaluate(model, parts.test);
  const F1Report baseline_report = random_baseline(parts.test, opt.seed);

  json j;
  j["meta"] = make_meta();
  j["meta"]["seed"] = opt.seed;
  j["meta"]["trees"] = opt.trees;
  j["meta"]["max_features"] = model.max_features;
  j["meta"]["cap"] = opt.cap;
  j["meta"]["criterion"] = "gini";
  j["model_tag"] = opt.model_tag;
  j["ablated"] = opt.ablated;
  j["split"] = opt.split_fraction;
  json counts;
  for (const auto& [label, count] : dataset.class_counts()) {
    counts[label] = count;
  }
  j["class_counts"] = std::move(counts);
  j["n_train"] = parts.train.rows.size();
  j["n_test"] = parts.test.rows.size();
  j["forest"] = f1_to_json(forest_report);
  j["baseline"] = f1_to_json(baseline_report);
  j["warnings"] = parts.warnings;
  write_json(j, opt.out_path);
  return 0;
}

// ---------------------------------------------------------------------
// scene-extract

struct SceneExtractOptions {
  std::string samples_path;
  std::string captions_path;
  std::string lexicon_path;
  std::string dump_lexicon_path;
  std::string out_path;
  std::string labels_path;
};

int cmd_scene_extract(const SceneExtractOptions& opt) {
  const SceneLexicon lex = lexicon_from_option(opt.lexicon_path);
  if (!opt.dump_lexicon_path.empty()) {
    write_text(lex.to_json() + "\n", opt.dump_lexicon_path);
  }
  if (opt.samples_path.empty() && opt.captions_path.empty()) {
    if (!opt.dump_lexicon_path.empty()) return 0;
    fail(errc::invalid_input, "need --samples or --captions");
  }

  std::vector<std::string> captions;
  if (!opt.samples_path.empty()) {
    for (const auto& [rec, layout] : load_sorted_samples(opt.samples_path)) {
      captions.insert(captions.end(), rec.scene_captions.begin(),
                      rec.scene_captions.end());
    }
  } else {
    std::ifstream in(opt.captions_path);
    if (!in) fail(errc::io_error, "cannot open " + opt.captions_path);
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty()) captions.push_back(line);
    }
  }

  if (!opt.labels_path.empty()) {
    std::ostringstream os;
    for (const std::string& caption : captions) {
      const auto label = extract_scene_label(caption, lex);
      json j;
      j["caption"] = caption;
      j["label"] = label.has_value() ? json(*label) : json(nullptr);
      os << j.dump() << '\n';
    }
    write_text(os.str(), opt.labels_path);
  }

  const std::map<std::string, long> freq = scene_frequencies(captions, lex);
  CsvWriter csv({"label", "count"});
  csv.set_meta("n_captions", std::to_string(captions.size()));
  for (const auto& [label, count] : freq) {
    csv.add_row({label, std::to_string(count)});
  }
  csv.write(opt.out_path);
  return 0;
}

// ---------------------------------------------------------------------
// kde

struct KdeOptions {
  std::string values_path;
  std::string column;
  std::string column2;  // adds a product-grid 2-D evaluation
  double bandwidth = 0.0;  // 0 = Scott's rule
  double grid_min = 0.0;
  double grid_max = 0.0;
  int grid_points = 256;
  std::string out_path;
};

std::vector<double> read_column(const std::string& path,
                                const std::string& column) {
  std::ifstream in(path);
  if (!in) fail(errc::io_error, "cannot open " + path);
  std::vector<double> values;
  std::string line;
  if (column.empty()) {
    double v;
    while (in >> v) values.push_back(v);
    return values;
  }
  // CSV with '#' metadata lines and a header row.
  std::optional<std::size_t> col_index;
  while (std::getline(in, line)) {
    if (line.empty() || line.front() == '#') continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!col_index.has_value()) {
      for (std::size_t i = 0; i < cells.size(); ++i) {
        if (cells[i] == column) col_index = i;
      }
      if (!col_index.has_value()) {
        fail(errc::invalid_input,
             "column '" + column + "' not found in header");
      }
      continue;
    }
    if (*col_index >= cells.size()) {
      fail(errc::parse_error, "row shorter than header");
    }
    values.push_back(std::stod(cells[*col_index]));
  }
  return values;
}

std::vector<double> linspace(double lo, double hi, int n) {
  std::vector<double> grid(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    grid[static_cast<std::size_t>(i)] =
        lo + (hi - lo) * static_cast<double>(i) /
                 static_cast<double>(n - 1);
  }
  return grid;
}

int cmd_kde(const KdeOptions& opt) {
  const std::vector<double> values =
      read_column(opt.values_path, opt.column);
  if (values.size() < 2) {
    fail(errc::degenerate_samples, "kde needs at least 2 values");
  }
  std::optional<double> bandwidth;
  if (opt.bandwidth > 0.0) bandwidth = opt.bandwidth;
  const double h =
      bandwidth.has_value() ? *bandwidth : scott_bandwidth(values);

  if (opt.grid_points < 2) {
    fail(errc::invalid_input, "grid_points must be >= 2");
  }
  double lo = opt.grid_min, hi = opt.grid_max;
  if (lo == 0.0 && hi == 0.0) {
    const Description d = describe(values);
    lo = d.min - 4.0 * h;
    hi = d.max + 4.0 * h;
  }
  if (!(hi > lo)) fail(errc::invalid_input, "grid_max must exceed grid_min");
  const std::vector<double> grid = linspace(lo, hi, opt.grid_points);
  const std::vector<double> density = gaussian_kde(values, grid, bandwidth);

  if (opt.column2.empty()) {
    CsvWriter csv({"grid", "density"});
    csv.set_meta("n", std::to_string(values.size()));
    csv.set_meta("bandwidth", h);
    csv.set_meta("bandwidth_rule",
                 bandwidth.has_value() ? "fixed" : "scott");
    for (std::size_t i = 0; i < grid.size(); ++i) {
      csv.add_row({format_double(grid[i]), format_double(density[i])});
    }
    csv.write(opt.out_path);
    return 0;
  }

  // Product-grid 2-D evaluation: the joint column is the product of the
  // two 1-D marginals, not a bivariate fit.
  const std::vector<double> values2 =
      read_column(opt.values_path, opt.column2);
  if (values2.size() < 2) {
    fail(errc::degenerate_samples, "kde needs at least 2 values");
  }
  const double h2 =
      bandwidth.has_value() ? *bandwidth : scott_bandwidth(values2);
  const Description d2 = describe(values2);
  const std::vector<double> grid2 =
      linspace(d2.min - 4.0 * h2, d2.max + 4.0 * h2, opt.grid_points);
  const std::vector<double> density2 =
      gaussian_kde(values2, grid2, bandwidth);

  CsvWriter csv({"x", "y", "density_x", "density_y", "density_product"});
  csv.set_meta("x_column", opt.column.empty() ? "values" : opt.column);
  csv.set_meta("y_column", opt.column2);
  csv.set_meta("bandwidth_x", h);
  csv.set_meta("bandwidth_y", h2);
  csv.set_meta("joint", "product-of-marginals");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    for (std::size_t j = 0; j < grid2.size(); ++j) {
      csv.add_row({format_double(grid[i]), format_double(grid2[j]),
                   format_double(density[i]), format_double(density2[j]),
                   format_double(density[i] * density2[j])});
    }
  }
  csv.write(opt.out_path);
  return 0;
}

// ---------------------------------------------------------------------
// run-paper

struct RunPaperOptions {
  std::uint64_t seed = 0;
  std::string out_dir;
  unsigned jobs = 0;
};

int cmd_run_paper(const RunPaperOptions& opt) {
  const fs::path out(opt.out_dir);
  const fs::path reports = out / "reports";
  fs::create_directories(reports);
  const std::string jobs = std::to_string(opt.jobs > 0 ? opt.jobs : 1);

  auto run = [](std::vector<std::string> argv) {
    const int rc = dispatch(argv);
    if (rc != 0) {
      fail(errc::invalid_input,
           "run-paper step '" + argv[0] + "' failed with exit code " +
               std::to_string(rc));
    }
  };

  // Two corpora from one seed: flat attention plays the fine-tuned
  // model, sharp attention the pre-trained one.
  const std::string seed = std::to_string(opt.seed);
  const fs::path corpus_ft = out / "corpus_finetuned";
  const fs::path corpus_pre = out / "corpus_pretrained";
  run({"synth", "--preset", "paper", "--seed", seed, "--tau", "10.0",
       "--out-dir", corpus_ft.string()});
  run({"synth", "--preset", "paper", "--seed", seed, "--tau", "0.1",
       "--out-dir", corpus_pre.string()});

  run({"validate", "--attn", corpus_ft.string(), "--samples",
       (corpus_ft / "samples.ndjson").string()});

  for (const auto& [tag, corpus] :
       std::vector<std::pair<std::string, fs::path>>{
           {"finetuned", corpus_ft}, {"pretrained", corpus_pre}}) {
    run({"attn-stats", "--attn", corpus.string(), "--samples",
         (corpus / "samples.ndjson").string(), "--layer", "0", "--jobs",
         jobs, "--out", (reports / ("attn_stats_" + tag + ".csv")).string(),
         "--sep-profile",
         (reports / ("sep_profile_" + tag + ".csv")).string()});
    run({"attn-stats", "--attn", corpus.string(), "--samples",
         (corpus / "samples.ndjson").string(), "--layer", "0", "--jobs",
         jobs, "--pooled", "--out",
         (reports / ("attn_stats_pooled_" + tag + ".csv")).string()});
    run({"kde", "--values",
         (reports / ("attn_stats_" + tag + ".csv")).string(), "--column",
         "std", "--out", (reports / ("kde_std_" + tag + ".csv")).string()});
    run({"kde", "--values",
         (reports / ("attn_stats_" + tag + ".csv")).string(), "--column",
         "std", "--column2", "mass", "--grid-points", "64", "--out",
         (reports / ("kde2_std_mass_" + tag + ".csv")).string()});
  }

  run({"rank-overlap", "--attn", corpus_ft.string(), "--samples",
       (corpus_ft / "samples.ndjson").string(), "--depths", "3,5,7", "--p",
       "0.9", "--out", (reports / "overlap_finetuned.csv").string(),
       "--correlation", (reports / "correlation_finetuned.json").string()});

  run({"pmi", "--samples", (corpus_ft / "samples.ndjson").string(),
       "--min-joint", "5", "--out", (reports / "pmi.csv").string(),
       "--top-k", "3", "--top-out",
       (reports / "top_informative.json").string()});

  run({"tag-features", "--samples",
       (corpus_ft / "samples.ndjson").string(), "--out",
       (reports / "assignments.ndjson").string(), "--summary",
       (reports / "tagging_summary.json").string()});

  run({"ablate", "--samples", (corpus_ft / "samples.ndjson").string(),
       "--per-scene-top", "3", "--mode", "cumulative", "--plans-out",
       (reports / "ablation_plans.ndjson").string(), "--layouts-out",
       (reports / "ablated_samples.ndjson").string()});

  // Synthetic before/after generation logs: the after log alters a
  // seeded fraction of captions and jitters confidences, standing in
  // for a model re-run, which this toolkit does not perform.
  {
    const std::vector<Sample> samples =
        load_sorted_samples(corpus_ft / "samples.ndjson");
    std::vector<GenerationEntry> before, after;
    rng::Engine g = rng::substream(opt.seed, 0xab1a7e);
    for (const auto& [rec, layout] : samples) {
      if (!rec.generated.has_value()) continue;
      before.push_back(
          {rec.sample_id, rec.generated->caption, rec.generated->confidence});
      GenerationEntry e = before.back();
      if (rng::u01(g) < 0.4) e.caption += " altered";
      e.confidence = std::clamp(
          e.confidence + 0.1 * (rng::u01(g) - 0.5), 0.01, 1.0);
      after.push_back(e);
    }
    const std::size_t half = before.size() / 2;
    const auto first = [&](const std::vector<GenerationEntry>& v) {
      return std::vector<GenerationEntry>(v.begin(),
                                          v.begin() + static_cast<long>(half));
    };
    const auto rest = [&](const std::vector<GenerationEntry>& v) {
      return std::vector<GenerationEntry>(v.begin() + static_cast<long>(half),
                                          v.end());
    };
    save_generation_log(first(before),
                        reports / "generation_before_test.ndjson");
    save_generation_log(first(after),
                        reports / "generation_after_test.ndjson");
    save_generation_log(rest(before),
                        reports / "generation_before_trainval.ndjson");
    save_generation_log(rest(after),
                        reports / "generation_after_trainval.ndjson");
  }

  run({"shift-stats", "--before",
       (reports / "generation_before_test.ndjson").string(), "--after",
       (reports / "generation_after_test.ndjson").string(), "--before2",
       (reports / "generation_before_trainval.ndjson").string(), "--after2",
       (reports / "generation_after_trainval.ndjson").string(), "--out",
       (reports / "shift_stats.json").string()});

  run({"probe", "--features", (corpus_ft / "samples.ndjson").string(),
       "--split", "0.5", "--seed", seed, "--cap", "200", "--out",
       (reports / "probe_finetuned.json").string()});

  // Manifest of everything written, for quick diffing.
  std::vector<std::string> files;
  for (const auto& entry : fs::recursive_directory_iterator(out)) {
    if (entry.is_regular_file() &&
        entry.path().filename() != "manifest.json") {
      files.push_back(fs::relative(entry.path(), out).string());
    }
  }
  std::sort(files.begin(), files.end());
  json manifest;
  manifest["meta"] = make_meta();
  manifest["meta"]["seed"] = opt.seed;
  manifest["files"] = files;
  write_json(manifest, out / "manifest.json");
  std::cout << "run-paper complete: " << files.size() << " files under "
            << out.string() << "\n";
  return 0;
}

}  // namespace

// ---------------------------------------------------------------------
// dispatch

int dispatch(const std::vector<std::string>& argv) {
  CLI::App app{"mmscope: attention, overlap, diagnosticity and probing "
               "analyses over exported multimodal transformer artifacts"};
  app.require_subcommand(1);

  SynthOptions synth_opt;
  auto* synth_cmd =
      app.add_subcommand("synth", "Generate a synthetic corpus");
  synth_cmd->add_option("--spec", synth_opt.spec_path,
                        "Synth spec JSON (overrides --preset)");
  synth_cmd->add_option("--preset", synth_opt.preset, "Built-in spec")
      ->capture_default_str();
  synth_cmd->add_option("--seed", synth_opt.seed, "RNG seed")->required();
  synth_cmd->add_option("--tau", synth_opt.tau_override,
                        "Override attention concentration (negative = uniform)");
  synth_cmd->add_option("--samples", synth_opt.samples_override,
                        "Override sample count");
  synth_cmd->add_option("--out-dir", synth_opt.out_dir, "Output directory")
      ->required();

  ValidateOptions validate_opt;
  auto* validate_cmd =
      app.add_subcommand("validate", "Validate a corpus");
  validate_cmd->add_option("--attn", validate_opt.attn_dir,
                           "Directory of <sample_id>.mmat tensors")
      ->required();
  validate_cmd->add_option("--samples", validate_opt.samples_path,
                           "samples.ndjson")
      ->required();

  AttnStatsOptions attn_opt;
  auto* attn_cmd = app.add_subcommand(
      "attn-stats", "Sub-block mass/std per sample (max-over-heads)");
  attn_cmd->add_option("--attn", attn_opt.attn_dir, "Tensor directory")
      ->required();
  attn_cmd->add_option("--samples", attn_opt.samples_path, "samples.ndjson")
      ->required();
  attn_cmd->add_option("--layer", attn_opt.layer, "Layer index")
      ->capture_default_str();
  attn_cmd->add_option("--blocks", attn_opt.blocks, "FROM-TO block list")
      ->capture_default_str();
  attn_cmd->add_flag("--include-pad", attn_opt.include_pad,
                     "Keep PAD rows/columns");
  attn_cmd->add_flag("--pooled", attn_opt.pooled,
                     "Add a per-sample row pooling all block entries");
  attn_cmd->add_option("--format", attn_opt.format, "csv or json-lines")
      ->capture_default_str();
  attn_cmd->add_option("--jobs", attn_opt.jobs,
                       "Worker threads (default MMSCOPE_JOBS)");
  attn_cmd->add_option("--out", attn_opt.out_path, "Output file")
      ->required();
  attn_cmd->add_option("--sep-profile", attn_opt.sep_profile_path,
                       "Also write per-layer SEP inbound shares (csv)");

  RankOverlapOptions overlap_opt;
  auto* overlap_cmd = app.add_subcommand(
      "rank-overlap", "Attended vs frequent object lists, RBO/IoU table");
  overlap_cmd->add_option("--attn", overlap_opt.attn_dir, "Tensor directory")
      ->required();
  overlap_cmd
      ->add_option("--samples", overlap_opt.samples_path, "samples.ndjson")
      ->required();
  overlap_cmd->add_option("--depths", overlap_opt.depths, "Depth list")
      ->capture_default_str();
  overlap_cmd->add_option("--p", overlap_opt.p, "RBO persistence p")
      ->capture_default_str();
  overlap_cmd->add_option("--layer", overlap_opt.layer, "Layer index")
      ->capture_default_str();
  overlap_cmd
      ->add_option("--top-scenes", overlap_opt.top_scenes,
                   "Number of most frequent scenes")
      ->capture_default_str();
  overlap_cmd->add_option("--list-len", overlap_opt.list_len,
                          "Ranked list length (default max depth)");
  overlap_cmd->add_option("--lexicon", overlap_opt.lexicon_path,
                          "Scene lexicon JSON");
  overlap_cmd->add_option("--out", overlap_opt.out_path, "Overlap csv")
      ->required();
  overlap_cmd->add_option("--correlation", overlap_opt.correlation_path,
                          "RBO-IoU Pearson json");

  PmiOptions pmi_opt;
  auto* pmi_cmd =
      app.add_subcommand("pmi", "Scene-object PMI table and top-k lists");
  pmi_cmd->add_option("--samples", pmi_opt.samples_path, "samples.ndjson")
      ->required();
  pmi_cmd->add_option("--min-joint", pmi_opt.min_joint,
                      "Minimum joint count")
      ->capture_default_str();
  pmi_cmd->add_option("--lexicon", pmi_opt.lexicon_path,
                      "Scene lexicon JSON");
  pmi_cmd->add_option("--out", pmi_opt.out_path, "PMI csv")->required();
  pmi_cmd->add_option("--top-k", pmi_opt.top_k, "Top informative objects")
      ->capture_default_str();
  pmi_cmd->add_option("--top-out", pmi_opt.top_out_path,
                      "Top informative json");

  TagFeaturesOptions tag_opt;
  auto* tag_cmd = app.add_subcommand(
      "tag-features", "Assign object labels to visual features");
  tag_cmd->add_option("--samples", tag_opt.samples_path, "samples.ndjson")
      ->required();
  tag_cmd->add_option("--iou", tag_opt.iou_threshold, "IoU threshold")
      ->capture_default_str();
  tag_cmd->add_option("--containment", tag_opt.containment_threshold,
                      "Containment threshold")
      ->capture_default_str();
  tag_cmd->add_option("--out", tag_opt.out_path, "Assignments ndjson")
      ->required();
  tag_cmd->add_option("--summary", tag_opt.summary_path,
                      "Coverage summary json (default stdout)");

  AblateOptions ablate_opt;
  auto* ablate_cmd = app.add_subcommand(
      "ablate", "Pad out objects and their assigned visual features");
  ablate_cmd
      ->add_option("--samples", ablate_opt.samples_path, "samples.ndjson")
      ->required();
  ablate_cmd->add_option("--objects", ablate_opt.objects,
                         "Comma list of object labels");
  ablate_cmd->add_option("--per-scene-top", ablate_opt.per_scene_top,
                         "Ablate top-k informative objects per scene");
  ablate_cmd
      ->add_option("--mode", ablate_opt.mode,
                   "cumulative (all at once) or independent (one per plan)")
      ->capture_default_str();
  ablate_cmd->add_option("--min-joint", ablate_opt.min_joint,
                         "PMI support cutoff for --per-scene-top")
      ->capture_default_str();
  ablate_cmd->add_option("--iou", ablate_opt.iou_threshold, "IoU threshold")
      ->capture_default_str();
  ablate_cmd
      ->add_option("--containment", ablate_opt.containment_threshold,
                   "Containment threshold")
      ->capture_default_str();
  ablate_cmd->add_option("--lexicon", ablate_opt.lexicon_path,
                         "Scene lexicon JSON");
  ablate_cmd->add_option("--plans-out", ablate_opt.plans_path,
                         "Plans ndjson")
      ->required();
  ablate_cmd->add_option("--layouts-out", ablate_opt.layouts_path,
                         "Rewritten samples ndjson");

  ShiftStatsOptions shift_opt;
  auto* shift_cmd = app.add_subcommand(
      "shift-stats", "Change rate and confidence shift of generation logs");
  shift_cmd->add_option("--before", shift_opt.before_path, "Log ndjson")
      ->required();
  shift_cmd->add_option("--after", shift_opt.after_path, "Log ndjson")
      ->required();
  shift_cmd->add_option("--before2", shift_opt.before2_path,
                        "Second pair for the z test");
  shift_cmd->add_option("--after2", shift_opt.after2_path,
                        "Second pair for the z test");
  shift_cmd->add_option("--out", shift_opt.out_path, "Stats json")
      ->required();

  ProbeOptions probe_opt;
  auto* probe_cmd = app.add_subcommand(
      "probe", "Random-forest scene probe over pooled vectors");
  probe_cmd
      ->add_option("--features", probe_opt.features_path,
                   "samples.ndjson with pooled_vector")
      ->required();
  probe_cmd->add_option("--split", probe_opt.split_fraction,
                        "Test fraction (0.5 = 50/50)")
      ->capture_default_str();
  probe_cmd->add_option("--seed", probe_opt.seed, "RNG seed")->required();
  probe_cmd->add_option("--cap", probe_opt.cap,
                        "Per-class downsampling cap (0 = none)")
      ->capture_default_str();
  probe_cmd->add_option("--trees", probe_opt.trees, "Forest size")
      ->capture_default_str();
  probe_cmd->add_option("--model-tag", probe_opt.model_tag,
                        "pretrained or finetuned")
      ->capture_default_str();
  probe_cmd->add_flag("--ablated", probe_opt.ablated,
                      "Features come from ablated inputs");
  probe_cmd->add_option("--format", probe_opt.format, "json")
      ->capture_default_str();
  probe_cmd->add_option("--lexicon", probe_opt.lexicon_path,
                        "Scene lexicon JSON");
  probe_cmd->add_option("--out", probe_opt.out_path, "Report json")
      ->required();

  SceneExtractOptions scene_opt;
  auto* scene_cmd = app.add_subcommand(
      "scene-extract", "Scene labels and frequencies from captions");
  scene_cmd->add_option("--samples", scene_opt.samples_path,
                        "samples.ndjson (uses scene_captions)");
  scene_cmd->add_option("--captions", scene_opt.captions_path,
                        "Plain text, one caption per line");
  scene_cmd->add_option("--lexicon", scene_opt.lexicon_path,
                        "Scene lexicon JSON");
  scene_cmd->add_option("--dump-lexicon", scene_opt.dump_lexicon_path,
                        "Write the active lexicon to this path");
  scene_cmd->add_option("--out", scene_opt.out_path, "Frequencies csv");
  scene_cmd->add_option("--labels-out", scene_opt.labels_path,
                        "Per-caption labels ndjson");

  KdeOptions kde_opt;
  auto* kde_cmd =
      app.add_subcommand("kde", "Gaussian kernel density estimate");
  kde_cmd->add_option("--values", kde_opt.values_path,
                      "Numbers file, or csv with --column")
      ->required();
  kde_cmd->add_option("--column", kde_opt.column, "CSV column name");
  kde_cmd->add_option("--column2", kde_opt.column2,
                      "Second column: emit a product-grid 2-D evaluation");
  kde_cmd->add_option("--bandwidth", kde_opt.bandwidth,
                      "Fixed bandwidth (default Scott's rule)");
  kde_cmd->add_option("--grid-min", kde_opt.grid_min, "Grid start");
  kde_cmd->add_option("--grid-max", kde_opt.grid_max, "Grid end");
  kde_cmd->add_option("--grid-points", kde_opt.grid_points, "Grid size")
      ->capture_default_str();
  kde_cmd->add_option("--out", kde_opt.out_path, "grid,density csv")
      ->required();

  RunPaperOptions paper_opt;
  auto* paper_cmd = app.add_subcommand(
      "run-paper", "Full pipeline on a bundled synthetic corpus");
  paper_cmd->add_option("--seed", paper_opt.seed, "RNG seed")->required();
  paper_cmd->add_option("--out-dir", paper_opt.out_dir, "Output directory")
      ->required();
  paper_cmd->add_option("--jobs", paper_opt.jobs, "Worker threads");

  std::vector<std::string> args(argv.rbegin(), argv.rend());
  try {
    app.parse(args);
  } catch (const CLI::CallForHelp& e) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp& e) {
    std::cout << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n";
    std::cerr << app.help();
    return 1;
  }

  try {
    if (synth_cmd->parsed()) return cmd_synth(synth_opt);
    if (validate_cmd->parsed()) return cmd_validate(validate_opt);
    if (attn_cmd->parsed()) return cmd_attn_stats(attn_opt);
    if (overlap_cmd->parsed()) return cmd_rank_overlap(overlap_opt);
    if (pmi_cmd->parsed()) return cmd_pmi(pmi_opt);
    if (tag_cmd->parsed()) return cmd_tag_features(tag_opt);
    if (ablate_cmd->parsed()) return cmd_ablate(ablate_opt);
    if (shift_cmd->parsed()) return cmd_shift_stats(shift_opt);
    if (probe_cmd->parsed()) return cmd_probe(probe_opt);
    if (scene_cmd->parsed()) return cmd_scene_extract(scene_opt);
    if (kde_cmd->parsed()) return cmd_kde(kde_opt);
    if (paper_cmd->parsed()) return cmd_run_paper(paper_opt);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}

}  // namespace mmscope
