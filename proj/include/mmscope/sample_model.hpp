#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mmscope/geometry.hpp"

namespace mmscope {

enum class TokenKind { CLS, TEXT, LABEL, SEP, VISUAL, PAD };

const char* to_string(TokenKind k);
std::optional<TokenKind> token_kind_from(std::string_view s);

// Display name used in block labels: VISUAL -> "vision", LABEL -> "label", ...
const char* block_name(TokenKind k);

struct TokenEntry {
  int position = 0;
  TokenKind kind = TokenKind::PAD;
  std::string surface;               // empty for VISUAL/PAD
  std::optional<int> group_id;       // joins multi-token object tags
  std::optional<BBox> bbox;          // required for VISUAL
};

struct InputLayout {
  std::vector<TokenEntry> tokens;

  int seq_len() const { return static_cast<int>(tokens.size()); }
  std::vector<int> positions_of(TokenKind k) const;
  std::size_t count_of(TokenKind k) const;
  // Position of the single SEP token, or nullopt when absent/ambiguous.
  std::optional<int> sep_position() const;
};

// Raw per-head attention for one sample, [layer][head][query][key]
// row-major, float32 as exported.
struct AttentionTensor {
  int layers = 0;
  int heads = 0;
  int seq = 0;
  std::vector<float> values;

  std::size_t index(int l, int h, int i, int j) const {
    return ((static_cast<std::size_t>(l) * heads + h) * seq + i) * seq + j;
  }
  float at(int l, int h, int i, int j) const {
    return values[index(l, h, i, j)];
  }
  float& at(int l, int h, int i, int j) {
    return values[index(l, h, i, j)];
  }
};

struct GeneratedCaption {
  std::string caption;
  double confidence = 1.0;  // in (0, 1]
};

struct ObjectTag {
  std::string label;
  BBox bbox;
};

struct SampleRecord {
  std::string sample_id;
  std::vector<std::string> scene_captions;
  std::optional<std::string> scene_type;
  std::vector<ObjectTag> object_tags;
  std::vector<BBox> visual_boxes;  // index-aligned to VISUAL positions
  std::optional<GeneratedCaption> generated;
  std::optional<std::vector<double>> pooled_vector;
};

using Sample = std::pair<SampleRecord, InputLayout>;

struct ValidationIssue {
  std::string code;     // SeqLenMismatch, MissingSep, PadOutsideTail, ...
  std::string message;
};

struct ValidationReport {
  std::vector<ValidationIssue> issues;
  bool ok() const { return issues.empty(); }
};

// Binary tensor file: "MMAT", u32 version = 1, u32 dims L,H,S,S, then
// L*H*S*S little-endian float32 values.
AttentionTensor load_attention(const std::filesystem::path& path);
void save_attention(const AttentionTensor& t,
                    const std::filesystem::path& path);

// Newline-delimited JSON records; one sample with its layout per line.
std::vector<Sample> load_samples(const std::filesystem::path& path);
void save_samples(const std::vector<Sample>& samples,
                  const std::filesystem::path& path);

// Structural check of a tensor/layout pair. Violations are data, not
// errors: the report lists them and an empty report means valid.
ValidationReport validate_sample(const AttentionTensor& t,
                                 const InputLayout& l);

}  // namespace mmscope
