#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "mmscope/sample_model.hpp"

namespace mmscope {

// Parameters for the synthetic corpus generator used by tests and the
// run-paper pipeline. Layout shape per sample:
//   [CLS] TEXT*text_len  LABEL/PAD*label_slots  [SEP]  VISUAL*visual_count
// Attention rows are softmax(N(0,1)/tau): small tau gives sharp rows,
// large tau flat ones; tau = +inf plants exactly uniform rows.
struct SynthSpec {
  int n_samples = 100;
  int text_len = 8;
  int label_slots = 12;
  int visual_count = 10;
  int layers = 2;
  int heads = 4;
  double tau = 1.0;

  std::vector<std::string> scenes;
  std::vector<std::string> objects;
  // co_occurrence[scene][object] = probability the object occurs in a
  // sample of that scene; unlisted pairs have probability 0.
  std::map<std::string, std::map<std::string, double>> co_occurrence;

  int vector_dim = 16;
  double vector_separation = 6.0;
  // Probability that a visual feature's box is a jitter of some present
  // tag box (and thus taggable) rather than an unrelated box.
  double feature_overlap_prob = 0.75;

  void validate() const;  // throws InvalidSpec

  static SynthSpec from_json_file(const std::filesystem::path& path);
  std::string to_json() const;

  // Spec used by run-paper: 8 scenes, one planted diagnostic object per
  // scene plus shared background objects.
  static SynthSpec paper_default();
};

struct SynthCorpus {
  std::vector<Sample> samples;
  std::vector<AttentionTensor> tensors;  // aligned with samples
};

// Deterministic for a fixed (spec, seed).
SynthCorpus synth_corpus(const SynthSpec& spec, std::uint64_t seed);

// Writes samples.ndjson plus one <sample_id>.mmat per sample.
void write_corpus(const SynthCorpus& corpus,
                  const std::filesystem::path& dir);

}  // namespace mmscope
