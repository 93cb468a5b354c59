#include "mmscope/synth.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "json.hpp"
#include "mmscope/errors.hpp"
#include "mmscope/rng.hpp"

namespace mmscope {

namespace {

using json = nlohmann::ordered_json;

const char* article_for(const std::string& noun) {
  if (noun.empty()) return "a";
  switch (noun.front()) {
    case 'a': case 'e': case 'i': case 'o': case 'u': return "an";
    default: return "a";
  }
}

std::string make_caption(rng::Engine& g, const std::string& scene) {
  const char* art = article_for(scene);
  switch (rng::below(g, 3)) {
    case 0: return "the picture is taken in " + std::string(art) + " " + scene;
    case 1: return "the picture is shot in " + std::string(art) + " " + scene;
    default: return "this is in " + std::string(art) + " " + scene;
  }
}

BBox random_box(rng::Engine& g, double canvas_w = 640.0,
                double canvas_h = 480.0) {
  const double w = rng::uniform(g, 40.0, canvas_w / 2.0);
  const double h = rng::uniform(g, 40.0, canvas_h / 2.0);
  const double x = rng::uniform(g, 0.0, canvas_w - w);
  const double y = rng::uniform(g, 0.0, canvas_h - h);
  return {x, y, x + w, y + h};
}

BBox jitter_box(rng::Engine& g, const BBox& b) {
  const double dx = rng::uniform(g, -0.05, 0.05) * b.width();
  const double dy = rng::uniform(g, -0.05, 0.05) * b.height();
  return {b.x_min + dx, b.y_min + dy, b.x_max + dx, b.y_max + dy};
}

std::vector<std::string> split_words(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream is(s);
  std::string w;
  while (is >> w) out.push_back(w);
  return out;
}

std::vector<float> attention_row(rng::Engine& g, int s, double tau) {
  std::vector<float> row(static_cast<std::size_t>(s));
  if (std::isinf(tau)) {
    const float u = 1.0f / static_cast<float>(s);
    for (float& v : row) v = u;
    return row;
  }
  std::vector<double> logits(static_cast<std::size_t>(s));
  double max_logit = -std::numeric_limits<double>::infinity();
  for (double& l : logits) {
    l = rng::normal(g) / tau;
    max_logit = std::max(max_logit, l);
  }
  double denom = 0.0;
  for (double l : logits) denom += std::exp(l - max_logit);
  for (int j = 0; j < s; ++j) {
    row[static_cast<std::size_t>(j)] =
        static_cast<float>(std::exp(logits[static_cast<std::size_t>(j)] -
                                    max_logit) / denom);
  }
  return row;
}

}  // namespace

void SynthSpec::validate() const {
  auto bad = [](const std::string& what) {
    fail(errc::invalid_spec, what);
  };
  if (n_samples < 0) bad("n_samples must be >= 0");
  if (text_len <= 0) bad("text_len must be > 0");
  if (label_slots <= 0) bad("label_slots must be > 0");
  if (visual_count < 0) bad("visual_count must be >= 0");
  if (layers <= 0) bad("layers must be > 0");
  if (heads <= 0) bad("heads must be > 0");
  if (!(tau > 0.0)) bad("tau must be > 0");
  if (scenes.empty()) bad("scenes must be nonempty");
  if (objects.empty()) bad("objects must be nonempty");
  if (vector_dim <= 0) bad("vector_dim must be > 0");
  if (vector_dim < static_cast<int>(scenes.size())) {
    bad("vector_dim must be >= number of scenes");
  }
  if (!(feature_overlap_prob >= 0.0 && feature_overlap_prob <= 1.0)) {
    bad("feature_overlap_prob must be in [0,1]");
  }
  for (const auto& [scene, probs] : co_occurrence) {
    for (const auto& [obj, p] : probs) {
      if (!(p >= 0.0 && p <= 1.0)) {
        bad("co_occurrence[" + scene + "][" + obj + "] outside [0,1]");
      }
    }
  }
}

SynthSpec SynthSpec::from_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(errc::io_error, "cannot open " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    fail(errc::parse_error, std::string("synth spec: ") + e.what());
  }
  SynthSpec s;
  try {
    s.n_samples = j.value("n_samples", s.n_samples);
    s.text_len = j.value("text_len", s.text_len);
    s.label_slots = j.value("label_slots", s.label_slots);
    s.visual_count = j.value("visual_count", s.visual_count);
    s.layers = j.value("layers", s.layers);
    s.heads = j.value("heads", s.heads);
    if (j.contains("tau")) {
      if (j["tau"].is_string() && j["tau"] == "inf") {
        s.tau = std::numeric_limits<double>::infinity();
      } else {
        s.tau = j["tau"].get<double>();
      }
    }
    s.scenes = j.value("scenes", s.scenes);
    s.objects = j.value("objects", s.objects);
    if (j.contains("co_occurrence")) {
      s.co_occurrence =
          j["co_occurrence"]
              .get<std::map<std::string, std::map<std::string, double>>>();
    }
    s.vector_dim = j.value("vector_dim", s.vector_dim);
    s.vector_separation = j.value("vector_separation", s.vector_separation);
    s.feature_overlap_prob =
        j.value("feature_overlap_prob", s.feature_overlap_prob);
  } catch (const nlohmann::json::exception& e) {
    fail(errc::parse_error, std::string("synth spec: ") + e.what());
  }
  s.validate();
  return s;
}

std::string SynthSpec::to_json() const {
  json j;
  j["n_samples"] = n_samples;
  j["text_len"] = text_len;
  j["label_slots"] = label_slots;
  j["visual_count"] = visual_count;
  j["layers"] = layers;
  j["heads"] = heads;
  if (std::isinf(tau)) {
    j["tau"] = "inf";
  } else {
    j["tau"] = tau;
  }
  j["scenes"] = scenes;
  j["objects"] = objects;
  j["co_occurrence"] = co_occurrence;
  j["vector_dim"] = vector_dim;
  j["vector_separation"] = vector_separation;
  j["feature_overlap_prob"] = feature_overlap_prob;
  return j.dump();
}

SynthSpec SynthSpec::paper_default() {
  SynthSpec s;
  s.n_samples = 160;
  s.text_len = 6;
  s.label_slots = 14;
  s.visual_count = 10;
  s.layers = 3;
  s.heads = 4;
  s.tau = 1.0;
  s.scenes = {"station", "road",  "room",       "sea",
              "resort",  "house", "restaurant", "beach"};
  const std::vector<std::string> diagnostic = {
      "train", "traffic light", "computer mouse", "surfboard",
      "ski",   "sofa",          "fork",           "sand"};
  const std::vector<std::string> background = {
      "person", "tree", "window", "chair", "dog", "bag", "sign"};
  s.objects = diagnostic;
  s.objects.insert(s.objects.end(), background.begin(), background.end());
  for (std::size_t i = 0; i < s.scenes.size(); ++i) {
    auto& probs = s.co_occurrence[s.scenes[i]];
    probs[diagnostic[i]] = 0.95;
    // Cross-scene noise: a neighbouring scene's diagnostic object shows
    // up occasionally.
    probs[diagnostic[(i + 1) % diagnostic.size()]] = 0.15;
    double p = 0.85;
    for (const std::string& obj : background) {
      probs[obj] = p;
      p = std::max(0.25, p - 0.1);
    }
  }
  s.vector_dim = 16;
  s.vector_separation = 6.0;
  return s;
}

SynthCorpus synth_corpus(const SynthSpec& spec, std::uint64_t seed) {
  spec.validate();
  SynthCorpus corpus;
  corpus.samples.reserve(static_cast<std::size_t>(spec.n_samples));
  corpus.tensors.reserve(static_cast<std::size_t>(spec.n_samples));

  const int seq_len =
      1 + spec.text_len + spec.label_slots + 1 + spec.visual_count;

  for (int si = 0; si < spec.n_samples; ++si) {
    rng::Engine g = rng::substream(seed, static_cast<std::uint64_t>(si));

    SampleRecord rec;
    {
      std::ostringstream id;
      id << "s" << std::setw(5) << std::setfill('0') << si;
      rec.sample_id = id.str();
    }
    const std::size_t scene_idx = rng::below(g, spec.scenes.size());
    const std::string& scene = spec.scenes[scene_idx];
    rec.scene_type = scene;
    rec.scene_captions.push_back(make_caption(g, scene));

    // Objects present in this sample, in vocabulary order.
    std::vector<std::string> present;
    const auto co_it = spec.co_occurrence.find(scene);
    for (const std::string& obj : spec.objects) {
      double p = 0.0;
      if (co_it != spec.co_occurrence.end()) {
        const auto p_it = co_it->second.find(obj);
        if (p_it != co_it->second.end()) p = p_it->second;
      }
      if (p > 0.0 && rng::u01(g) < p) present.push_back(obj);
    }

    InputLayout layout;
    layout.tokens.push_back({0, TokenKind::CLS, "[CLS]", {}, {}});
    for (int t = 0; t < spec.text_len; ++t) {
      layout.tokens.push_back({1 + t, TokenKind::TEXT,
                               "w" + std::to_string(t), {}, {}});
    }

    // Fill label slots with word pieces of the present objects; objects
    // that no longer fit are dropped entirely, leftovers become PAD.
    int pos = 1 + spec.text_len;
    int slots_left = spec.label_slots;
    int group = 0;
    for (const std::string& obj : present) {
      const std::vector<std::string> pieces = split_words(obj);
      if (static_cast<int>(pieces.size()) > slots_left) continue;
      const BBox tag_box = random_box(g);
      rec.object_tags.push_back({obj, tag_box});
      for (std::size_t k = 0; k < pieces.size(); ++k) {
        layout.tokens.push_back({pos, TokenKind::LABEL, obj, group, tag_box});
        ++pos;
        --slots_left;
      }
      ++group;
    }
    while (slots_left > 0) {
      layout.tokens.push_back({pos, TokenKind::PAD, "", {}, {}});
      ++pos;
      --slots_left;
    }
    layout.tokens.push_back({pos, TokenKind::SEP, "[SEP]", {}, {}});
    ++pos;

    for (int v = 0; v < spec.visual_count; ++v) {
      BBox box;
      if (!rec.object_tags.empty() &&
          rng::u01(g) < spec.feature_overlap_prob) {
        const std::size_t pick = rng::below(g, rec.object_tags.size());
        box = jitter_box(g, rec.object_tags[pick].bbox);
      } else {
        box = random_box(g);
      }
      rec.visual_boxes.push_back(box);
      layout.tokens.push_back({pos, TokenKind::VISUAL, "", {}, box});
      ++pos;
    }

    rec.generated = GeneratedCaption{make_caption(g, scene),
                                     rng::uniform(g, 0.5, 0.999)};

    std::vector<double> vec(static_cast<std::size_t>(spec.vector_dim));
    for (int d = 0; d < spec.vector_dim; ++d) {
      vec[static_cast<std::size_t>(d)] = rng::normal(g);
    }
    vec[scene_idx] += spec.vector_separation;
    rec.pooled_vector = std::move(vec);

    AttentionTensor tensor;
    tensor.layers = spec.layers;
    tensor.heads = spec.heads;
    tensor.seq = seq_len;
    tensor.values.reserve(static_cast<std::size_t>(spec.layers) *
                          spec.heads * seq_len * seq_len);
    for (int l = 0; l < spec.layers; ++l) {
      for (int h = 0; h < spec.heads; ++h) {
        for (int i = 0; i < seq_len; ++i) {
          const std::vector<float> row = attention_row(g, seq_len, spec.tau);
          tensor.values.insert(tensor.values.end(), row.begin(), row.end());
        }
      }
    }

    corpus.samples.emplace_back(std::move(rec), std::move(layout));
    corpus.tensors.push_back(std::move(tensor));
  }
  return corpus;
}

void write_corpus(const SynthCorpus& corpus,
                  const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  save_samples(corpus.samples, dir / "samples.ndjson");
  for (std::size_t i = 0; i < corpus.samples.size(); ++i) {
    save_attention(corpus.tensors[i],
                   dir / (corpus.samples[i].first.sample_id + ".mmat"));
  }
}

}  // namespace mmscope
