#pragma once

#include <map>
#include <string>
#include <vector>

#include "mmscope/rank_types.hpp"
#include "mmscope/sample_model.hpp"

namespace mmscope {

// One layer of attention aggregated over heads. Rows need not sum to 1
// after max-over-heads; each entry is a per-head maximum.
struct AttentionMatrix {
  int seq = 0;
  int layer = 0;
  std::string aggregation = "max-heads";
  std::vector<double> values;  // row-major seq x seq

  double at(int i, int j) const {
    return values[static_cast<std::size_t>(i) * seq + j];
  }
  double& at(int i, int j) {
    return values[static_cast<std::size_t>(i) * seq + j];
  }
};

// Rectangular region of an attention matrix addressed by token kinds.
struct SubBlock {
  TokenKind from = TokenKind::VISUAL;
  TokenKind to = TokenKind::VISUAL;
  std::vector<int> row_positions;
  std::vector<int> col_positions;
  std::vector<double> values;  // row-major rows x cols

  std::size_t rows() const { return row_positions.size(); }
  std::size_t cols() const { return col_positions.size(); }
  bool empty() const { return values.empty(); }
  double at(std::size_t r, std::size_t c) const {
    return values[r * cols() + c];
  }
};

struct BlockStats {
  double mass = 0.0;     // sum of entries
  double std_dev = 0.0;  // population standard deviation
  std::size_t n = 0;     // entries
};

// Per-layer share of the SEP column's inbound attention by query kind.
struct SepProfile {
  std::vector<std::map<TokenKind, double>> shares;  // one map per layer
  std::vector<bool> zero_mass;  // layer had no attention into SEP
};

AttentionMatrix max_over_heads(const AttentionTensor& t, int layer);

SubBlock subblock(const AttentionMatrix& m, const InputLayout& l,
                  TokenKind from, TokenKind to, bool include_pad = false);

BlockStats block_stats(const SubBlock& b);

// Ranks object tags (LABEL groups) by total inbound attention summed
// over non-PAD query rows. The record identifies the sample; scores
// depend only on the layout and the matrix.
RankedList attended_object_ranking(const AttentionMatrix& m,
                                   const InputLayout& l,
                                   const SampleRecord& record,
                                   std::size_t n);

SepProfile sep_inbound_profile(const AttentionTensor& t,
                               const InputLayout& l);

}  // namespace mmscope
