#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "mmscope/errors.hpp"
#include "mmscope/probekit.hpp"
#include "mmscope/rng.hpp"

using namespace mmscope;

namespace {

// K separated Gaussian blobs; class k has mean separation * e_k.
ProbeDataset blobs(std::size_t n_rows, std::size_t dim, std::size_t classes,
                   double separation, std::uint64_t seed) {
  ProbeDataset d;
  rng::Engine g(seed);
  for (std::size_t i = 0; i < n_rows; ++i) {
    ProbeRow row;
    char id[16];
    std::snprintf(id, sizeof(id), "r%05zu", i);
    row.sample_id = id;
    const std::size_t k = i % classes;
    row.label = "class" + std::to_string(k);
    row.vec.resize(dim);
    for (std::size_t j = 0; j < dim; ++j) row.vec[j] = rng::normal(g);
    row.vec[k % dim] += separation;
    d.rows.push_back(std::move(row));
  }
  return d;
}

std::vector<SampleRecord> records_from(const ProbeDataset& d) {
  std::vector<SampleRecord> out;
  for (const ProbeRow& r : d.rows) {
    SampleRecord rec;
    rec.sample_id = r.sample_id;
    rec.scene_type = r.label;
    rec.pooled_vector = r.vec;
    out.push_back(std::move(rec));
  }
  return out;
}

}  // namespace

TEST_SUITE("probekit") {

TEST_CASE("pool mean worked values") {
  const std::vector<std::vector<double>> two{{1.0, 3.0}, {3.0, 5.0}};
  CHECK(pool_mean(two) == std::vector<double>{2.0, 4.0});

  const std::vector<std::vector<double>> one{{7.0, -1.0}};
  CHECK(pool_mean(one) == one[0]);

  CHECK_THROWS_AS(pool_mean(std::vector<std::vector<double>>{}), Error);
  const std::vector<std::vector<double>> ragged{{1.0}, {1.0, 2.0}};
  CHECK_THROWS_AS(pool_mean(ragged), Error);
}

TEST_CASE("pool mean matches compensated summation") {
  rng::Engine g(5150);
  std::vector<std::vector<double>> vectors(100,
                                           std::vector<double>(16, 0.0));
  for (auto& v : vectors) {
    for (double& x : v) x = rng::uniform(g, -1e6, 1e6);
  }
  const std::vector<double> mean = pool_mean(vectors);
  for (std::size_t j = 0; j < 16; ++j) {
    double sum = 0.0, comp = 0.0;  // Kahan
    for (const auto& v : vectors) {
      const double y = v[j] - comp;
      const double t = sum + y;
      comp = (t - sum) - y;
      sum = t;
    }
    CHECK(mean[j] == doctest::Approx(sum / 100.0).epsilon(1e-9));
  }
}

TEST_CASE("dataset build caps frequent classes") {
  ProbeDataset raw = blobs(110, 4, 11, 3.0, 1);
  // Rebalance: 100 of class0, 10 of class1.
  for (ProbeRow& r : raw.rows) {
    r.label = r.label == "class1" ? "b" : "a";
  }
  const std::vector<SampleRecord> records = records_from(raw);
  const ProbeDataset capped = build_probe_dataset(records, 20, 7);
  const auto counts = capped.class_counts();
  CHECK(counts.at("a") == 20);
  CHECK(counts.at("b") == 10);

  // cap at or above max count leaves the dataset unchanged.
  const ProbeDataset uncapped = build_probe_dataset(records, 1000, 7);
  CHECK(uncapped.rows.size() == records.size());

  // deterministic per seed
  const ProbeDataset again = build_probe_dataset(records, 20, 7);
  REQUIRE(again.rows.size() == capped.rows.size());
  for (std::size_t i = 0; i < again.rows.size(); ++i) {
    CHECK(again.rows[i].sample_id == capped.rows[i].sample_id);
  }

  SampleRecord no_vec;
  no_vec.sample_id = "x";
  no_vec.scene_type = "a";
  CHECK_THROWS_AS(
      build_probe_dataset(std::vector<SampleRecord>{no_vec}, 5, 1), Error);
}

TEST_CASE("split is stratified, disjoint and exhaustive") {
  const ProbeDataset d = blobs(200, 4, 4, 3.0, 2);
  const SplitResult parts = split(d, 0.3, 11);
  const auto counts = d.class_counts();
  const auto test_counts = parts.test.class_counts();
  for (const auto& [label, count] : counts) {
    CHECK(test_counts.at(label) ==
          static_cast<std::size_t>(std::llround(0.3 * count)));
  }

  std::set<std::string> train_ids, test_ids;
  for (const ProbeRow& r : parts.train.rows) train_ids.insert(r.sample_id);
  for (const ProbeRow& r : parts.test.rows) test_ids.insert(r.sample_id);
  CHECK(train_ids.size() + test_ids.size() == d.rows.size());
  for (const std::string& id : test_ids) CHECK(train_ids.count(id) == 0);

  CHECK_THROWS_AS(split(d, 0.0, 1), Error);
  CHECK_THROWS_AS(split(d, 1.0, 1), Error);
}

TEST_CASE("single-row classes are forced into train") {
  ProbeDataset d = blobs(9, 4, 3, 3.0, 3);
  d.rows.resize(7);  // class counts 3,2,2 -> make one singleton
  d.rows[6].label = "lonely";
  const SplitResult parts = split(d, 0.5, 5);
  CHECK_FALSE(parts.warnings.empty());
  bool in_train = false;
  for (const ProbeRow& r : parts.train.rows) {
    if (r.label == "lonely") in_train = true;
  }
  CHECK(in_train);
  for (const ProbeRow& r : parts.test.rows) CHECK(r.label != "lonely");
}

TEST_CASE("forest fits separable blobs exactly") {
  const ProbeDataset train = blobs(200, 4, 2, 8.0, 21);
  const ForestModel model = train_forest(train, 25, 21);
  const F1Report rep = evaluate(model, train);
  CHECK(rep.micro_f1 == doctest::Approx(1.0));

  ProbeDataset one_class = train;
  for (ProbeRow& r : one_class.rows) r.label = "only";
  CHECK_THROWS_AS(train_forest(one_class, 10, 1), Error);
}

TEST_CASE("forest predictions are deterministic and order independent") {
  const ProbeDataset train = blobs(120, 6, 3, 4.0, 33);
  const ProbeDataset probe = blobs(30, 6, 3, 4.0, 99);

  const ForestModel a = train_forest(train, 15, 7);
  const ForestModel b = train_forest(train, 15, 7);
  ProbeDataset shuffled = train;
  rng::Engine g(4);
  rng::shuffle(g, shuffled.rows);
  const ForestModel c = train_forest(shuffled, 15, 7);

  for (const ProbeRow& r : probe.rows) {
    const std::string& pa = a.predict(r.vec);
    CHECK(pa == b.predict(r.vec));
    CHECK(pa == c.predict(r.vec));
  }

  CHECK_THROWS_AS(a.predict(std::vector<double>{1.0}), Error);
}

TEST_CASE("f1 worked fixtures") {
  SUBCASE("all correct") {
    const std::vector<std::string> y{"a", "b", "a", "c"};
    const F1Report rep = compute_f1(y, y);
    CHECK(rep.micro_f1 == doctest::Approx(1.0));
    CHECK(rep.macro_f1 == doctest::Approx(1.0));
    CHECK(rep.weighted_f1 == doctest::Approx(1.0));
  }

  SUBCASE("balanced binary with TP=1, FP=1, FN=1 per class") {
    const std::vector<std::string> truth{"a", "a", "b", "b"};
    const std::vector<std::string> pred{"a", "b", "b", "a"};
    const F1Report rep = compute_f1(truth, pred);
    CHECK(rep.per_class.at("a").f1 == doctest::Approx(0.5));
    CHECK(rep.per_class.at("b").f1 == doctest::Approx(0.5));
    CHECK(rep.macro_f1 == doctest::Approx(0.5));
    CHECK(rep.per_class.at("a").support == 2);
  }

  SUBCASE("0/0 metrics settle at zero") {
    // 'c' never predicted, 'd' never true.
    const std::vector<std::string> truth{"a", "c"};
    const std::vector<std::string> pred{"a", "d"};
    const F1Report rep = compute_f1(truth, pred);
    CHECK(rep.per_class.at("c").precision == 0.0);
    CHECK(rep.per_class.at("c").f1 == 0.0);
    CHECK(rep.per_class.at("d").recall == 0.0);
    CHECK(rep.per_class.at("d").support == 0);
  }
}

TEST_CASE("micro f1 equals accuracy and bounds hold on random fixtures") {
  rng::Engine g(271);
  const std::vector<std::string> vocab{"a", "b", "c", "d", "e"};
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 5 + rng::below(g, 60);
    std::vector<std::string> truth, pred;
    for (std::size_t i = 0; i < n; ++i) {
      truth.push_back(vocab[rng::below(g, vocab.size())]);
      pred.push_back(vocab[rng::below(g, vocab.size())]);
    }
    const F1Report rep = compute_f1(truth, pred);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < n; ++i) correct += truth[i] == pred[i];
    CHECK(rep.micro_f1 ==
          doctest::Approx(static_cast<double>(correct) /
                          static_cast<double>(n))
              .epsilon(1e-12));

    double lo = 1.0, hi = 0.0;
    for (const auto& [label, m] : rep.per_class) {
      lo = std::min(lo, m.f1);
      hi = std::max(hi, m.f1);
    }
    CHECK(rep.macro_f1 >= lo - 1e-12);
    CHECK(rep.macro_f1 <= hi + 1e-12);
    CHECK(rep.weighted_f1 >= lo - 1e-12);
    CHECK(rep.weighted_f1 <= hi + 1e-12);
  }
}

TEST_CASE("random baseline hits the uniform guess rate") {
  const ProbeDataset test = blobs(4000, 4, 8, 3.0, 17);
  const F1Report rep = random_baseline(test, 23);
  CHECK(rep.micro_f1 == doctest::Approx(0.125).epsilon(0.16));
  CHECK(std::fabs(rep.micro_f1 - 0.125) < 0.02);

  ProbeDataset single = blobs(50, 4, 2, 3.0, 18);
  for (ProbeRow& r : single.rows) r.label = "only";
  CHECK(random_baseline(single, 1).micro_f1 == doctest::Approx(1.0));

  const F1Report again = random_baseline(test, 23);
  CHECK(again.micro_f1 == rep.micro_f1);
  CHECK(again.macro_f1 == rep.macro_f1);
}

TEST_CASE("separated gaussians probe at ceiling") {
  const ProbeDataset d = blobs(400, 8, 4, 6.0, 77);
  const SplitResult parts = split(d, 0.5, 77);
  const ForestModel model = train_forest(parts.train, 50, 77);
  const F1Report rep = evaluate(model, parts.test);
  CHECK(rep.macro_f1 >= 0.95);
}

}  // TEST_SUITE
