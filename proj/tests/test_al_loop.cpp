#include <gtest/gtest.h>

#include <set>

#include "frugal/al_loop.hpp"

using namespace frugal;

namespace {

struct Data {
  std::shared_ptr<const Dataset> pool, test;
};

Data small_data(std::uint64_t seed = 7, std::size_t per_class = 60) {
  auto [train, test] = split_dataset(generate_gaussian_mixture({4, per_class, 2, 0.1, 0.1, seed}), 0.5, seed);
  return {std::make_shared<const Dataset>(std::move(train)), std::make_shared<const Dataset>(std::move(test))};
}

RunConfig config(const char* strategy, std::size_t T = 5, std::size_t B = 10, std::uint64_t seed = 1) {
  RunConfig c;
  c.strategy = parse_strategy(strategy);
  c.T = T;
  c.B = B;
  c.seed = seed;
  return c;
}

}  // namespace

TEST(Run, ProducesOneRecordPerIteration) {
  auto d = small_data();
  for (const char* s : {"random", "maxmin", "uncertainty", "rep", "flat", "rl-d", "rl-c"}) {
    auto r = run(config(s), d.pool, d.test);
    ASSERT_EQ(r.records.size(), 5u) << s;
    for (std::size_t t = 0; t < 5; ++t) {
      EXPECT_EQ(r.records[t].t, t);
      EXPECT_EQ(r.records[t].labeled_count, 10 * (t + 1));
      ASSERT_TRUE(r.records[t].test_eer.has_value());
      EXPECT_GE(*r.records[t].test_eer, 0.0);
      EXPECT_LE(*r.records[t].test_eer, 1.0);
    }
  }
}

TEST(Run, FlatKeepsUnitWeights) {
  auto d = small_data();
  auto r = run(config("flat"), d.pool, d.test);
  for (const auto& rec : r.records) {
    ASSERT_TRUE(rec.weights.has_value());
    EXPECT_EQ(rec.weights->alpha, 1.0);
    EXPECT_EQ(rec.weights->beta, 1.0);
    EXPECT_EQ(rec.weights->eta, 1.0);
    EXPECT_FALSE(rec.action_id.has_value());
  }
}

TEST(Run, RlRecordsRewardsFromSecondIteration) {
  auto d = small_data();
  auto r = run(config("rl-c", 6), d.pool, d.test);
  EXPECT_FALSE(r.records[0].reward.has_value());
  for (std::size_t t = 1; t < r.records.size(); ++t) {
    ASSERT_TRUE(r.records[t].reward.has_value());
    EXPECT_GE(*r.records[t].reward, 0.0);
    EXPECT_LE(*r.records[t].reward, 1.0);
  }
  EXPECT_TRUE(r.records[0].explored);  // exp(0) = 1
  for (const auto& rec : r.records) {
    EXPECT_EQ(rec.q.size(), 27u);
    EXPECT_TRUE(rec.action_id.has_value());
  }
}

TEST(Run, RlDiscreteWeightsAreBinary) {
  auto d = small_data();
  auto r = run(config("rl-d", 6), d.pool, d.test);
  for (const auto& rec : r.records) {
    const auto& w = *rec.weights;
    for (double v : {w.alpha, w.beta, w.eta}) EXPECT_TRUE(v == 0.0 || v == 1.0);
    EXPECT_GT(w.alpha + w.beta + w.eta, 0.0);
  }
}

TEST(Run, SameSeedSameRecords) {
  auto d = small_data();
  for (const char* s : {"random", "flat", "rl-c"}) {
    auto a = run(config(s), d.pool, d.test).records;
    auto b = run(config(s), d.pool, d.test).records;
    for (std::size_t t = 0; t < a.size(); ++t) {
      EXPECT_EQ(a[t].test_eer, b[t].test_eer);
      EXPECT_EQ(a[t].action_id, b[t].action_id);
      EXPECT_EQ(a[t].q, b[t].q);
    }
  }
}

TEST(SessionTest, DisplaysAreDisjointAndHoldoutsSized) {
  auto d = small_data();
  auto cfg = config("flat", 6, 16);
  Session s(cfg, d.pool, d.test);
  const auto oracle = Oracle::simulated(d.pool->labels);
  while (s.phase() == Phase::awaiting_labels) {
    const auto revealed = reveal_labels(oracle, s.pending_display());
    for (auto [i, y] : std::get<LabelMap>(revealed)) s.submit(i, y);
    s.advance();
  }
  std::set<std::size_t> seen;
  const auto snapshot = s.state();
  const auto& st = snapshot.pool;
  for (std::size_t k = 0; k < st.displays().size(); ++k) {
    for (auto i : st.displays()[k]) EXPECT_TRUE(seen.insert(i).second);
    EXPECT_EQ(st.holdouts()[k].size(), 2u);  // ceil(0.1 * 16)
  }
  // training never sees a holdout sample
  const auto train = st.training_indices();
  for (const auto& h : st.holdouts())
    for (auto i : h) EXPECT_FALSE(std::binary_search(train.begin(), train.end(), i));
}

TEST(SessionTest, AdvanceNeedsCompleteLabels) {
  auto d = small_data();
  Session s(config("flat"), d.pool, d.test);
  const auto display = s.pending_display();
  EXPECT_EQ(display.size(), 10u);
  s.submit(display[0], 1);
  EXPECT_EQ(s.missing_labels().size(), 9u);
  EXPECT_THROW(s.advance(), ParameterError);
  EXPECT_EQ(s.phase(), Phase::awaiting_labels);
  EXPECT_THROW(s.submit(display[0], d.pool->nc), ParameterError);
  std::size_t outside = 0;
  while (std::binary_search(display.begin(), display.end(), outside)) ++outside;
  EXPECT_THROW(s.submit(outside, 0), ParameterError);
}

TEST(SessionTest, InteractiveMatchesSimulated) {
  auto d = small_data();
  auto cfg = config("rl-c", 6);
  auto reference = run(cfg, d.pool, d.test).records;
  Session s(cfg, d.pool, d.test);
  while (s.phase() == Phase::awaiting_labels) {
    const auto display = s.pending_display();
    // submit in reverse with a wrong first guess that gets overwritten
    s.submit(display.back(), (d.pool->labels[display.back()] + 1) % d.pool->nc);
    for (auto it = display.rbegin(); it != display.rend(); ++it) s.submit(*it, d.pool->labels[*it]);
    s.advance();
  }
  ASSERT_EQ(s.records().size(), reference.size());
  for (std::size_t t = 0; t < reference.size(); ++t) {
    EXPECT_EQ(s.records()[t].test_eer, reference[t].test_eer);
    EXPECT_EQ(s.records()[t].weights, reference[t].weights);
  }
}

TEST(SessionTest, FinishedSessionHasNoDisplay) {
  auto d = small_data();
  auto r = config("random", 2);
  Session s(r, d.pool, d.test);
  for (int k = 0; k < 2; ++k) {
    for (auto i : s.pending_display()) s.submit(i, d.pool->labels[i]);
    s.advance();
  }
  EXPECT_EQ(s.phase(), Phase::finished);
  EXPECT_THROW(s.pending_display(), Error);
  EXPECT_THROW(s.advance(), ParameterError);
}

TEST(NormalizeTest, TruncationsAndRejections) {
  auto c = config("flat", 10, 30);
  auto w = c.normalize_for_pool(100);
  EXPECT_EQ(c.T, 4u);
  EXPECT_EQ(w.size(), 1u);

  auto big = config("flat", 2, 500);
  big.normalize_for_pool(120);
  EXPECT_EQ(big.B, 120u);
  EXPECT_EQ(big.T, 1u);

  auto rl = config("rl-d");
  rl.holdout_frac = 0.0;
  EXPECT_THROW(rl.normalize_for_pool(100), ParameterError);
  auto tiny = config("flat", 3, 1);
  EXPECT_THROW(tiny.normalize_for_pool(100), ParameterError);
  tiny.holdout_frac = 0.0;
  EXPECT_NO_THROW(tiny.normalize_for_pool(100));
  auto bad = config("flat");
  bad.gamma = GammaPolicy::fixed(-1);
  EXPECT_THROW(bad.normalize_for_pool(100), ParameterError);
}

TEST(Run, PoolExhaustionEndsEarly) {
  auto d = small_data(3, 10);  // 20 pool samples
  auto cfg = config("flat", 10, 8);
  auto r = run(cfg, d.pool, d.test);
  EXPECT_EQ(r.records.size(), 3u);
  EXPECT_FALSE(r.warnings.empty());
  EXPECT_EQ(r.records.back().labeled_count, 20u);
  EXPECT_EQ(r.records.back().next_display_size, 0u);
}

TEST(Run, ReclusterRuns) {
  auto d = small_data();
  auto cfg = config("flat");
  cfg.recluster = true;
  auto r = run(cfg, d.pool, d.test);
  EXPECT_EQ(r.records.size(), 5u);
}

TEST(Compare, GridShapeAndThreadIndependence) {
  auto d = small_data();
  std::vector<RunConfig> cfgs{config("random"), config("flat"), config("rl-c")};
  auto one = compare(cfgs, d.pool, d.test, {1, 2, 3}, true, 1);
  auto many = compare(cfgs, d.pool, d.test, {1, 2, 3}, true, 4);
  ASSERT_EQ(one.rows.size(), 3u);
  ASSERT_TRUE(one.supervised_accuracy.has_value());
  for (std::size_t s = 0; s < 3; ++s) {
    ASSERT_EQ(one.rows[s].curve.size(), 5u);
    for (std::size_t t = 0; t < 5; ++t) {
      EXPECT_EQ(one.rows[s].curve[t].mean_accuracy, many.rows[s].curve[t].mean_accuracy);
      EXPECT_EQ(one.rows[s].curve[t].runs, 3u);
    }
  }
  EXPECT_THROW(compare({}, d.pool, d.test, {1}), ParameterError);
}

TEST(Compare, AggregateUsesPopulationStd) {
  std::vector<std::vector<IterationRecord>> runs(2, std::vector<IterationRecord>(1));
  runs[0][0].test_accuracy = 0.6;
  runs[0][0].test_eer = 0.4;
  runs[1][0].test_accuracy = 0.8;
  runs[1][0].test_eer = 0.2;
  auto c = detail::aggregate(runs);
  EXPECT_NEAR(c[0].mean_accuracy, 0.7, 1e-15);
  EXPECT_NEAR(c[0].std_accuracy, 0.1, 1e-12);
}
