#include "mmscope/attention_stats.hpp"

#include <algorithm>
#include <cmath>

#include "mmscope/errors.hpp"

namespace mmscope {

AttentionMatrix max_over_heads(const AttentionTensor& t, int layer) {
  if (layer < 0 || layer >= t.layers) {
    fail(errc::layer_out_of_range,
         "layer " + std::to_string(layer) + " not in [0, " +
             std::to_string(t.layers) + ")");
  }
  AttentionMatrix m;
  m.seq = t.seq;
  m.layer = layer;
  m.values.assign(static_cast<std::size_t>(t.seq) * t.seq, 0.0);
  for (int h = 0; h < t.heads; ++h) {
    for (int i = 0; i < t.seq; ++i) {
      for (int j = 0; j < t.seq; ++j) {
        const double v = t.at(layer, h, i, j);
        if (h == 0 || v > m.at(i, j)) m.at(i, j) = v;
      }
    }
  }
  return m;
}

SubBlock subblock(const AttentionMatrix& m, const InputLayout& l,
                  TokenKind from, TokenKind to, bool include_pad) {
  if (m.seq != l.seq_len()) {
    fail(errc::dim_mismatch,
         "matrix S=" + std::to_string(m.seq) + " vs layout seq_len=" +
             std::to_string(l.seq_len()));
  }
  SubBlock b;
  b.from = from;
  b.to = to;
  // PAD positions sit in the text+label tail; with include_pad they are
  // folded into the selected kind, by default they are dropped.
  auto selected = [&](TokenKind k, TokenKind wanted) {
    if (k == wanted) return true;
    return include_pad && k == TokenKind::PAD;
  };
  for (const TokenEntry& e : l.tokens) {
    if (selected(e.kind, from)) b.row_positions.push_back(e.position);
    if (selected(e.kind, to)) b.col_positions.push_back(e.position);
  }
  b.values.reserve(b.rows() * b.cols());
  for (int r : b.row_positions) {
    for (int c : b.col_positions) {
      b.values.push_back(m.at(r, c));
    }
  }
  return b;  // empty index sets yield a typed empty block
}

BlockStats block_stats(const SubBlock& b) {
  if (b.empty()) {
    fail(errc::empty_block, "block " + std::string(block_name(b.from)) +
                                "-" + block_name(b.to) + " is empty");
  }
  BlockStats s;
  s.n = b.values.size();
  for (double v : b.values) s.mass += v;
  const double mean = s.mass / static_cast<double>(s.n);
  double ss = 0.0;
  for (double v : b.values) {
    const double d = v - mean;
    ss += d * d;
  }
  s.std_dev = std::sqrt(ss / static_cast<double>(s.n));
  return s;
}

RankedList attended_object_ranking(const AttentionMatrix& m,
                                   const InputLayout& l,
                                   const SampleRecord& record, std::size_t n) {
  (void)record;  // identity only; scores derive from layout + matrix
  if (m.seq != l.seq_len()) {
    fail(errc::dim_mismatch,
         "matrix S=" + std::to_string(m.seq) + " vs layout seq_len=" +
             std::to_string(l.seq_len()));
  }

  // Group LABEL tokens by group_id (fallback: each token its own group),
  // ordered by first layout position.
  struct Group {
    std::string label;
    int first_position;
    std::vector<int> columns;
  };
  std::vector<Group> groups;
  std::map<int, std::size_t> by_id;
  for (const TokenEntry& e : l.tokens) {
    if (e.kind != TokenKind::LABEL) continue;
    if (e.group_id.has_value()) {
      auto it = by_id.find(*e.group_id);
      if (it != by_id.end()) {
        groups[it->second].columns.push_back(e.position);
        continue;
      }
      by_id[*e.group_id] = groups.size();
    }
    groups.push_back({e.surface, e.position, {e.position}});
  }
  if (groups.empty()) {
    fail(errc::no_labels, "layout has no LABEL tokens");
  }

  std::vector<int> query_rows;
  for (const TokenEntry& e : l.tokens) {
    if (e.kind != TokenKind::PAD) query_rows.push_back(e.position);
  }

  std::vector<double> scores(groups.size(), 0.0);
  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    for (int col : groups[gi].columns) {
      for (int row : query_rows) {
        scores[gi] += m.at(row, col);
      }
    }
  }

  std::vector<std::size_t> order(groups.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) {
                     if (scores[a] != scores[b]) return scores[a] > scores[b];
                     return groups[a].first_position < groups[b].first_position;
                   });

  RankedList out;
  for (std::size_t i : order) {
    if (out.items.size() >= n) break;
    // Duplicate labels (two groups with the same surface) keep the
    // higher-scored occurrence only.
    if (std::find(out.items.begin(), out.items.end(), groups[i].label) !=
        out.items.end()) {
      continue;
    }
    out.items.push_back(groups[i].label);
    out.scores.push_back(scores[i]);
  }
  return out;
}

SepProfile sep_inbound_profile(const AttentionTensor& t,
                               const InputLayout& l) {
  if (l.count_of(TokenKind::SEP) != 1) {
    fail(errc::missing_sep, "layout must have exactly one SEP token");
  }
  if (t.seq != l.seq_len()) {
    fail(errc::dim_mismatch,
         "tensor S=" + std::to_string(t.seq) + " vs layout seq_len=" +
             std::to_string(l.seq_len()));
  }
  const int sep = *l.sep_position();

  SepProfile prof;
  prof.shares.resize(static_cast<std::size_t>(t.layers));
  prof.zero_mass.resize(static_cast<std::size_t>(t.layers), false);

  for (int layer = 0; layer < t.layers; ++layer) {
    const AttentionMatrix m = max_over_heads(t, layer);
    std::map<TokenKind, double> per_kind;
    double total = 0.0;
    for (const TokenEntry& e : l.tokens) {
      const double v = m.at(e.position, sep);
      per_kind[e.kind] += v;
      total += v;
    }
    auto& shares = prof.shares[static_cast<std::size_t>(layer)];
    if (total <= 0.0) {
      prof.zero_mass[static_cast<std::size_t>(layer)] = true;
      for (auto& [kind, v] : per_kind) shares[kind] = 0.0;
    } else {
      for (auto& [kind, v] : per_kind) shares[kind] = v / total;
    }
  }
  return prof;
}

}  // namespace mmscope
