#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <map>

#include "mmscope/attention_stats.hpp"
#include "mmscope/errors.hpp"
#include "mmscope/rng.hpp"
#include "mmscope/synth.hpp"
#include "test_helpers.hpp"

using namespace mmscope;
using mmscope::testing::small_layout;
using mmscope::testing::small_record;
using mmscope::testing::small_tensor;

namespace {

AttentionTensor random_tensor(int layers, int heads, int seq,
                              std::uint64_t seed) {
  AttentionTensor t;
  t.layers = layers;
  t.heads = heads;
  t.seq = seq;
  t.values.resize(static_cast<std::size_t>(layers) * heads * seq * seq);
  rng::Engine g(seed);
  for (int l = 0; l < layers; ++l) {
    for (int h = 0; h < heads; ++h) {
      for (int i = 0; i < seq; ++i) {
        double sum = 0.0;
        std::vector<double> row(static_cast<std::size_t>(seq));
        for (double& v : row) {
          v = rng::u01(g) + 1e-6;
          sum += v;
        }
        for (int j = 0; j < seq; ++j) {
          t.at(l, h, i, j) =
              static_cast<float>(row[static_cast<std::size_t>(j)] / sum);
        }
      }
    }
  }
  return t;
}

}  // namespace

TEST_SUITE("attention-stats") {

TEST_CASE("max over heads on a worked 2x2 pair") {
  AttentionTensor t;
  t.layers = 1;
  t.heads = 2;
  t.seq = 2;
  t.values = {0.9f, 0.1f, 0.2f, 0.8f,   // head 0
              0.5f, 0.5f, 0.6f, 0.4f};  // head 1
  const AttentionMatrix m = max_over_heads(t, 0);
  CHECK(m.at(0, 0) == doctest::Approx(0.9));
  CHECK(m.at(0, 1) == doctest::Approx(0.5));
  CHECK(m.at(1, 0) == doctest::Approx(0.6));
  CHECK(m.at(1, 1) == doctest::Approx(0.8));
  CHECK(m.aggregation == "max-heads");
}

TEST_CASE("max over heads with one head is the identity") {
  const AttentionTensor t = random_tensor(2, 1, 5, 11);
  const AttentionMatrix m = max_over_heads(t, 1);
  for (int i = 0; i < 5; ++i) {
    for (int j = 0; j < 5; ++j) {
      CHECK(m.at(i, j) == doctest::Approx(t.at(1, 0, i, j)));
    }
  }
}

TEST_CASE("max over heads matches the exhaustive oracle") {
  const AttentionTensor t = random_tensor(3, 4, 7, 23);
  const int layer = 2;
  const AttentionMatrix m = max_over_heads(t, layer);
  for (int i = 0; i < t.seq; ++i) {
    for (int j = 0; j < t.seq; ++j) {
      double expected = 0.0;
      for (int h = 0; h < t.heads; ++h) {
        expected = std::max(expected,
                            static_cast<double>(t.at(layer, h, i, j)));
      }
      CHECK(m.at(i, j) == doctest::Approx(expected).epsilon(1e-12));
    }
  }
}

TEST_CASE("max over heads is monotone in any entry") {
  AttentionTensor t = random_tensor(1, 3, 4, 31);
  const AttentionMatrix before = max_over_heads(t, 0);
  t.at(0, 1, 2, 3) = std::min(1.0f, t.at(0, 1, 2, 3) + 0.5f);
  const AttentionMatrix after = max_over_heads(t, 0);
  CHECK(after.at(2, 3) >= before.at(2, 3));
}

TEST_CASE("layer bounds") {
  const AttentionTensor t = random_tensor(2, 2, 4, 5);
  CHECK_THROWS_AS(max_over_heads(t, 2), Error);
  CHECK_THROWS_AS(max_over_heads(t, -1), Error);
}

TEST_CASE("subblock selection") {
  // layout [CLS, LABEL, SEP, VISUAL]
  InputLayout l;
  l.tokens = {{0, TokenKind::CLS, "[CLS]", {}, {}},
              {1, TokenKind::LABEL, "train", 0, BBox{0, 0, 1, 1}},
              {2, TokenKind::SEP, "[SEP]", {}, {}},
              {3, TokenKind::VISUAL, "", {}, BBox{0, 0, 1, 1}}};
  AttentionMatrix m;
  m.seq = 4;
  m.values.resize(16);
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) m.at(i, j) = i * 4 + j;
  }

  const SubBlock b =
      subblock(m, l, TokenKind::VISUAL, TokenKind::LABEL, false);
  REQUIRE(b.rows() == 1);
  REQUIRE(b.cols() == 1);
  CHECK(b.at(0, 0) == m.at(3, 1));

  InputLayout no_visual = l;
  no_visual.tokens[3].kind = TokenKind::PAD;
  no_visual.tokens[3].bbox.reset();
  const SubBlock empty =
      subblock(m, no_visual, TokenKind::VISUAL, TokenKind::LABEL, false);
  CHECK(empty.empty());
  CHECK_THROWS_AS(block_stats(empty), Error);
}

TEST_CASE("include_pad folds PAD into the selected kind") {
  const InputLayout l = small_layout();  // LABEL at 3,4, PAD at 5
  AttentionMatrix m;
  m.seq = l.seq_len();
  m.values.assign(static_cast<std::size_t>(m.seq) * m.seq, 0.1);

  const SubBlock without =
      subblock(m, l, TokenKind::VISUAL, TokenKind::LABEL, false);
  const SubBlock with =
      subblock(m, l, TokenKind::VISUAL, TokenKind::LABEL, true);
  CHECK(with.cols() == without.cols() + 1);
}

TEST_CASE("block stats worked values") {
  SubBlock b;
  b.row_positions = {0, 1};
  b.col_positions = {0, 1};
  b.values = {0.25, 0.25, 0.25, 0.25};
  const BlockStats uniform = block_stats(b);
  CHECK(uniform.mass == doctest::Approx(1.0));
  CHECK(uniform.std_dev == doctest::Approx(0.0));
  CHECK(uniform.n == 4);

  SubBlock two;
  two.row_positions = {0};
  two.col_positions = {0, 1};
  two.values = {0.0, 1.0};
  const BlockStats spread = block_stats(two);
  CHECK(spread.mass == doctest::Approx(1.0));
  CHECK(spread.std_dev == doctest::Approx(0.5));
}

TEST_CASE("block stats match the two-pass oracle and mass is additive") {
  const AttentionTensor t = random_tensor(1, 2, 9, 77);
  const AttentionMatrix m = max_over_heads(t, 0);
  const InputLayout l = small_layout();
  const SubBlock b = subblock(m, l, TokenKind::VISUAL, TokenKind::TEXT);
  const BlockStats s = block_stats(b);

  double mean = 0.0;
  for (double v : b.values) mean += v;
  mean /= static_cast<double>(b.values.size());
  double ss = 0.0;
  for (double v : b.values) ss += (v - mean) * (v - mean);
  const double oracle_std =
      std::sqrt(ss / static_cast<double>(b.values.size()));
  CHECK(s.mass ==
        doctest::Approx(mean * static_cast<double>(b.values.size()))
            .epsilon(1e-12));
  CHECK(s.std_dev == doctest::Approx(oracle_std).epsilon(1e-12));

  // Column partition: mass(full) = mass(left cols) + mass(right cols).
  SubBlock left = b, right = b;
  const std::size_t half = b.cols() / 2;
  auto take_cols = [&](SubBlock& part, std::size_t lo, std::size_t hi) {
    part.values.clear();
    for (std::size_t r = 0; r < b.rows(); ++r) {
      for (std::size_t c = lo; c < hi; ++c) {
        part.values.push_back(b.at(r, c));
      }
    }
    part.col_positions.assign(b.col_positions.begin() + lo,
                              b.col_positions.begin() + hi);
  };
  take_cols(left, 0, half);
  take_cols(right, half, b.cols());
  CHECK(block_stats(left).mass + block_stats(right).mass ==
        doctest::Approx(s.mass).epsilon(1e-12));
}

TEST_CASE("attended ranking orders by inbound mass") {
  const InputLayout l = small_layout();
  AttentionMatrix m;
  m.seq = l.seq_len();
  m.values.assign(static_cast<std::size_t>(m.seq) * m.seq, 0.0);
  // dog column (3) gets 0.9 total from non-PAD queries, cat (4) 0.1.
  m.at(0, 3) = 0.5;
  m.at(1, 3) = 0.4;
  m.at(0, 4) = 0.1;
  const RankedList ranked =
      attended_object_ranking(m, l, small_record(), 2);
  REQUIRE(ranked.items.size() == 2);
  CHECK(ranked.items[0] == "dog");
  CHECK(ranked.items[1] == "cat");
  CHECK(ranked.scores[0] == doctest::Approx(0.9));
  CHECK(ranked.scores[1] == doctest::Approx(0.1));
}

TEST_CASE("multi-token groups sum their columns") {
  InputLayout l;
  l.tokens = {{0, TokenKind::CLS, "[CLS]", {}, {}},
              {1, TokenKind::LABEL, "traffic light", 0, BBox{0, 0, 1, 1}},
              {2, TokenKind::LABEL, "traffic light", 0, BBox{0, 0, 1, 1}},
              {3, TokenKind::SEP, "[SEP]", {}, {}}};
  AttentionMatrix m;
  m.seq = 4;
  m.values.assign(16, 0.0);
  m.at(0, 1) = 0.3;
  m.at(0, 2) = 0.4;
  const RankedList ranked =
      attended_object_ranking(m, l, small_record(), 1);
  REQUIRE(ranked.items.size() == 1);
  CHECK(ranked.items[0] == "traffic light");
  CHECK(ranked.scores[0] == doctest::Approx(0.7));
}

TEST_CASE("attended ranking matches a brute-force oracle") {
  const InputLayout l = small_layout();
  const AttentionTensor t = random_tensor(1, 2, l.seq_len(), 13);
  const AttentionMatrix m = max_over_heads(t, 0);
  const RankedList ranked = attended_object_ranking(m, l, small_record(), 5);

  // Oracle: recompute each group total with plain loops and sort.
  std::map<std::string, double> totals;
  for (const TokenEntry& e : l.tokens) {
    if (e.kind != TokenKind::LABEL) continue;
    for (const TokenEntry& q : l.tokens) {
      if (q.kind == TokenKind::PAD) continue;
      totals[e.surface] += m.at(q.position, e.position);
    }
  }
  std::vector<std::pair<std::string, double>> expect(totals.begin(),
                                                     totals.end());
  std::stable_sort(expect.begin(), expect.end(),
                   [](const auto& a, const auto& b) {
                     return a.second > b.second;
                   });
  REQUIRE(ranked.items.size() == expect.size());
  for (std::size_t i = 0; i < expect.size(); ++i) {
    CHECK(ranked.items[i] == expect[i].first);
    CHECK(ranked.scores[i] ==
          doctest::Approx(expect[i].second).epsilon(1e-12));
  }
}

TEST_CASE("ranking ignores record tag order") {
  const InputLayout l = small_layout();
  const AttentionTensor t = random_tensor(1, 2, l.seq_len(), 29);
  const AttentionMatrix m = max_over_heads(t, 0);
  SampleRecord record = small_record();
  const RankedList a = attended_object_ranking(m, l, record, 3);
  std::reverse(record.object_tags.begin(), record.object_tags.end());
  const RankedList b = attended_object_ranking(m, l, record, 3);
  CHECK(a.items == b.items);
}

TEST_CASE("ranking requires labels") {
  InputLayout l;
  l.tokens = {{0, TokenKind::CLS, "[CLS]", {}, {}},
              {1, TokenKind::SEP, "[SEP]", {}, {}}};
  AttentionMatrix m;
  m.seq = 2;
  m.values.assign(4, 0.5);
  CHECK_THROWS_AS(attended_object_ranking(m, l, small_record(), 1), Error);
}

TEST_CASE("sep profile shares sum to one and match the oracle") {
  const InputLayout l = small_layout();
  const AttentionTensor t = random_tensor(2, 2, l.seq_len(), 101);
  const SepProfile prof = sep_inbound_profile(t, l);
  REQUIRE(prof.shares.size() == 2);

  const int sep = *l.sep_position();
  for (int layer = 0; layer < 2; ++layer) {
    const AttentionMatrix m = max_over_heads(t, layer);
    std::map<TokenKind, double> oracle;
    double total = 0.0;
    for (const TokenEntry& e : l.tokens) {
      oracle[e.kind] += m.at(e.position, sep);
      total += m.at(e.position, sep);
    }
    double share_sum = 0.0;
    for (const auto& [kind, share] :
         prof.shares[static_cast<std::size_t>(layer)]) {
      CHECK(share ==
            doctest::Approx(oracle[kind] / total).epsilon(1e-12));
      share_sum += share;
    }
    CHECK(share_sum == doctest::Approx(1.0).epsilon(1e-9));
    CHECK_FALSE(prof.zero_mass[static_cast<std::size_t>(layer)]);
  }
}

TEST_CASE("sep profile degenerate and error cases") {
  InputLayout l = small_layout();

  SUBCASE("uniform SEP column reduces shares to row-count fractions") {
    AttentionTensor t;
    t.layers = 1;
    t.heads = 1;
    t.seq = l.seq_len();
    t.values.assign(static_cast<std::size_t>(t.seq) * t.seq, 0.0f);
    const int sep = *l.sep_position();
    for (int i = 0; i < t.seq; ++i) t.at(0, 0, i, sep) = 1.0f;
    const SepProfile prof = sep_inbound_profile(t, l);
    const auto& shares = prof.shares[0];
    CHECK(shares.at(TokenKind::TEXT) ==
          doctest::Approx(2.0 / 9.0).epsilon(1e-12));
    CHECK(shares.at(TokenKind::VISUAL) ==
          doctest::Approx(2.0 / 9.0).epsilon(1e-12));
    CHECK(shares.at(TokenKind::CLS) ==
          doctest::Approx(1.0 / 9.0).epsilon(1e-12));
  }

  SUBCASE("zero inbound mass flags the layer") {
    AttentionTensor t;
    t.layers = 1;
    t.heads = 1;
    t.seq = l.seq_len();
    t.values.assign(static_cast<std::size_t>(t.seq) * t.seq, 0.0f);
    const SepProfile prof = sep_inbound_profile(t, l);
    CHECK(prof.zero_mass[0]);
    for (const auto& [kind, share] : prof.shares[0]) CHECK(share == 0.0);
  }

  SUBCASE("missing SEP is an error") {
    l.tokens[6].kind = TokenKind::TEXT;
    CHECK_THROWS_AS(sep_inbound_profile(small_tensor(1, 1, 9), l), Error);
  }
}

TEST_CASE("sharp rows have larger block std than flat rows") {
  SynthSpec spec = SynthSpec::paper_default();
  spec.n_samples = 20;
  spec.tau = 0.1;
  const SynthCorpus sharp = synth_corpus(spec, 5);
  spec.tau = 10.0;
  const SynthCorpus flat = synth_corpus(spec, 5);

  auto mean_std = [](const SynthCorpus& corpus) {
    double acc = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < corpus.samples.size(); ++i) {
      const AttentionMatrix m = max_over_heads(corpus.tensors[i], 0);
      const SubBlock b = subblock(m, corpus.samples[i].second,
                                  TokenKind::VISUAL, TokenKind::VISUAL);
      if (b.empty()) continue;
      acc += block_stats(b).std_dev;
      ++n;
    }
    return acc / static_cast<double>(n);
  };
  CHECK(mean_std(sharp) > mean_std(flat));
}

}  // TEST_SUITE
