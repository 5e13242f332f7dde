// Copyright 2026 The seqrec Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "seqrec/errors.h"
#include "seqrec/eval.h"
#include "seqrec/synthetic.h"

namespace seqrec {
namespace {

struct Corpus {
  Dataset dataset;
  LeaveOneOutSplit split;
  PopularityPartition partition;
};

Corpus MakeCorpus(size_t users, uint64_t seed) {
  SyntheticConfig sc;
  sc.users = users;
  sc.items = 300;
  sc.seed = seed;
  Corpus c;
  c.dataset = BuildSequences(GenerateSynthetic(sc));
  c.split = SplitLeaveOneOut(&c.dataset);
  c.partition = PartitionHeadTail(c.dataset.train_popularity, 0.5);
  return c;
}

TEST(Metrics, HitRatioCases) {
  EXPECT_EQ(HitRatio(1, 5), 1.0);
  EXPECT_EQ(HitRatio(7, 5), 0.0);
  EXPECT_EQ(HitRatio(7, 10), 1.0);
}

TEST(Metrics, ReciprocalRankCases) {
  EXPECT_EQ(ReciprocalRank(1), 1.0);
  EXPECT_EQ(ReciprocalRank(4), 0.25);
  MetricsAccumulator acc;
  for (size_t r : {1, 2, 4}) acc.Add(r, false, false);
  EXPECT_NEAR(acc.Finish().all.mrr, 7.0 / 12.0, 1e-15);
  EXPECT_NEAR(acc.Finish().all.mrr, 0.5833, 1e-4);
}

TEST(Metrics, MeansMatchBruteForceCounts) {
  Rng rng(1);
  MetricsAccumulator acc;
  size_t hits5 = 0, hits10 = 0, n = 0, tail_n = 0;
  double rr = 0.0;
  for (int i = 0; i < 5000; ++i) {
    const size_t rank = 1 + rng.UniformInt(101);
    const bool tail = rng.Bernoulli(0.3);
    acc.Add(rank, tail, false);
    hits5 += rank <= 5;
    hits10 += rank <= 10;
    rr += 1.0 / rank;
    tail_n += tail;
    ++n;
  }
  MetricsReport r = acc.Finish();
  EXPECT_DOUBLE_EQ(r.all.hr5, static_cast<double>(hits5) / n);
  EXPECT_DOUBLE_EQ(r.all.hr10, static_cast<double>(hits10) / n);
  EXPECT_NEAR(r.all.mrr, rr / n, 1e-12);
  EXPECT_EQ(r.tail.support, tail_n);
  EXPECT_EQ(r.head.support + r.tail.support, r.all.support);
}

TEST(Metrics, RankOfTruthBreaksTiesByIndex) {
  std::vector<double> s = {1.0, 1.0, 2.0, 0.5};
  std::vector<int32_t> items = {7, 3, 9, 1};
  // Item 9 scores higher; item 3 ties and has a smaller index.
  EXPECT_EQ(RankOfTruth(s, items, 0), 3u);
  EXPECT_EQ(RankOfTruth(s, items, 1), 2u);
  EXPECT_EQ(RankOfTruth(s, items, 2), 1u);
}

TEST(Metrics, AccumulatorMergeIsOrderIndependent) {
  MetricsAccumulator a, b, whole;
  for (size_t r = 1; r <= 20; ++r) {
    (r % 2 ? a : b).Add(r, r % 3 == 0, r % 5 == 0);
    whole.Add(r, r % 3 == 0, r % 5 == 0);
  }
  MetricsAccumulator ab = a, ba = b;
  ab.Merge(b);
  ba.Merge(a);
  EXPECT_EQ(ab.Finish().all.support, whole.Finish().all.support);
  EXPECT_NEAR(ab.Finish().all.mrr, whole.Finish().all.mrr, 1e-15);
  EXPECT_NEAR(ba.Finish().tail.hr10, whole.Finish().tail.hr10, 1e-15);
}

TEST(Evaluate, PerfectOracleScoresOne) {
  Corpus c = MakeCorpus(300, 1);
  ScoreFn oracle = [&](size_t u, std::span<const int32_t>,
                       std::span<const int32_t> cand) {
    std::vector<double> s(cand.size(), 0.0);
    for (size_t i = 0; i < cand.size(); ++i) {
      s[i] = cand[i] == c.split.users[u].test ? 1.0 : 0.0;
    }
    return s;
  };
  MetricsReport r = Evaluate(oracle, c.dataset, c.split, c.partition, {});
  for (const GroupMetrics* g : {&r.head, &r.tail, &r.all}) {
    if (g->support == 0) continue;
    EXPECT_EQ(g->hr5, 1.0);
    EXPECT_EQ(g->hr10, 1.0);
    EXPECT_EQ(g->mrr, 1.0);
  }
}

TEST(Evaluate, AdversarialModelRanksTruthLast) {
  Corpus c = MakeCorpus(300, 2);
  ScoreFn adversary = [&](size_t u, std::span<const int32_t>,
                          std::span<const int32_t> cand) {
    std::vector<double> s(cand.size(), 1.0);
    for (size_t i = 0; i < cand.size(); ++i) {
      if (cand[i] == c.split.users[u].test) s[i] = -1.0;
    }
    return s;
  };
  MetricsReport r = Evaluate(adversary, c.dataset, c.split, c.partition, {});
  EXPECT_EQ(r.all.hr10, 0.0);
  EXPECT_NEAR(r.all.mrr, 1.0 / 101.0, 1e-15);
}

TEST(Evaluate, UniformRandomScoresMatchAnalyticExpectation) {
  Corpus c = MakeCorpus(1000, 3);
  Rng noise(44);
  ScoreFn random = [&](size_t, std::span<const int32_t>,
                       std::span<const int32_t> cand) {
    std::vector<double> s(cand.size());
    for (double& v : s) v = noise.Uniform();
    return s;
  };
  MetricsReport r = Evaluate(random, c.dataset, c.split, c.partition, {});
  double harmonic = 0.0;
  for (int i = 1; i <= 101; ++i) harmonic += 1.0 / i;
  EXPECT_EQ(r.all.support, 1000u);
  EXPECT_NEAR(r.all.hr10, 10.0 / 101.0, 0.03);
  EXPECT_NEAR(r.all.mrr, harmonic / 101.0, 0.01);
}

TEST(Evaluate, InvariantUnderMonotoneTransform) {
  Corpus c = MakeCorpus(300, 4);
  ScoreFn pop = BaselineScorer(Baseline::kPop, c.dataset.train_popularity, nullptr);
  ScoreFn squashed = [&](size_t u, std::span<const int32_t> h,
                         std::span<const int32_t> cand) {
    std::vector<double> s = pop(u, h, cand);
    for (double& v : s) v = std::exp(0.001 * v) * 3.0 + 7.0;
    return s;
  };
  MetricsReport a = Evaluate(pop, c.dataset, c.split, c.partition, {});
  MetricsReport b = Evaluate(squashed, c.dataset, c.split, c.partition, {});
  EXPECT_EQ(a.all.mrr, b.all.mrr);
  EXPECT_EQ(a.tail.hr10, b.tail.hr10);
}

TEST(Evaluate, SupportsSumToUsersAndRunsRepeat) {
  Corpus c = MakeCorpus(400, 5);
  ScoreFn pop = BaselineScorer(Baseline::kPop, c.dataset.train_popularity, nullptr);
  EvalConfig cfg;
  cfg.seed = 9;
  std::vector<UserOutcome> o1, o2;
  MetricsReport a = Evaluate(pop, c.dataset, c.split, c.partition, cfg, &o1);
  MetricsReport b = Evaluate(pop, c.dataset, c.split, c.partition, cfg, &o2);
  EXPECT_EQ(a.head.support + a.tail.support, a.all.support);
  EXPECT_EQ(a.all.support, c.split.users.size());
  ASSERT_EQ(o1.size(), o2.size());
  for (size_t i = 0; i < o1.size(); ++i) EXPECT_EQ(o1[i].rank, o2[i].rank);
  EXPECT_EQ(ReportToJson(a).dump(), ReportToJson(b).dump());
}

TEST(Evaluate, CandidatesExcludeEverythingTheUserConsumed) {
  Corpus c = MakeCorpus(200, 6);
  NegativeSampler sampler(NegativeWeights(c.dataset, c.split,
                                          NegativePopularity::kFullLog));
  for (size_t u = 0; u < c.split.users.size(); ++u) {
    std::vector<int32_t> cand = CandidatesFor(sampler, c.dataset, c.split, u, {});
    ASSERT_EQ(cand.size(), 101u);
    EXPECT_EQ(cand[0], c.split.users[u].test);
    const auto& seen = c.dataset.sequences[u].items;
    for (size_t i = 1; i < cand.size(); ++i) {
      EXPECT_EQ(std::find(seen.begin(), seen.end(), cand[i]), seen.end());
    }
  }
}

TEST(Evaluate, HeadWithTailSliceDefinition) {
  Corpus c = MakeCorpus(500, 7);
  ScoreFn pop = BaselineScorer(Baseline::kPop, c.dataset.train_popularity, nullptr);
  std::vector<UserOutcome> outcomes;
  MetricsReport r = Evaluate(pop, c.dataset, c.split, c.partition, {}, &outcomes);
  size_t support = 0, hits = 0;
  for (const auto& o : outcomes) {
    if (c.partition.IsTail(o.truth)) continue;
    std::vector<int32_t> h = c.split.TestHistory(o.user);
    if (std::none_of(h.begin(), h.end(),
                     [&](int32_t i) { return c.partition.IsTail(i); })) {
      continue;
    }
    ++support;
    hits += o.rank <= 10;
  }
  EXPECT_EQ(r.head_with_tail.support, support);
  EXPECT_DOUBLE_EQ(r.head_with_tail.hr10,
                   support ? static_cast<double>(hits) / support : 0.0);
}

TEST(Baselines, PopOrdersByCount) {
  std::vector<int64_t> pop = {3, 1, 2};
  EXPECT_EQ(PopRanking(pop), (std::vector<int32_t>{0, 2, 1}));
  std::vector<int64_t> zeros(4, 0);
  EXPECT_EQ(PopRanking(zeros), (std::vector<int32_t>{0, 1, 2, 3}));
}

TEST(Baselines, PopMatchesSortOracle) {
  Rng rng(2);
  std::vector<int64_t> pop(200);
  for (auto& c : pop) c = static_cast<int64_t>(rng.UniformInt(30));
  std::vector<std::pair<int64_t, int32_t>> keyed;
  for (int32_t i = 0; i < 200; ++i) keyed.push_back({-pop[i], i});
  std::sort(keyed.begin(), keyed.end());
  std::vector<int32_t> oracle;
  for (auto& [k, i] : keyed) oracle.push_back(i);
  EXPECT_EQ(PopRanking(pop), oracle);
}

TEST(Baselines, SPopUsesSequenceCountsThenPop) {
  // Items a=0, b=1, c=2, d=3, e=4; global popularity b > c > a.
  std::vector<int64_t> pop = {1, 9, 5, 0, 0};
  std::vector<int32_t> seq = {0, 0, 1};
  std::vector<int32_t> r = SPopRanking(seq, pop);
  EXPECT_EQ(r, (std::vector<int32_t>{0, 1, 2, 3, 4}));
  std::vector<int32_t> distinct = {4, 2, 0};
  std::vector<int32_t> r2 = SPopRanking(distinct, pop);
  EXPECT_EQ(std::vector<int32_t>(r2.begin(), r2.begin() + 3),
            (std::vector<int32_t>{2, 0, 4}));
}

TEST(Baselines, SPopMatchesTwoKeySortOracle) {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<int64_t> pop(40);
    for (auto& c : pop) c = static_cast<int64_t>(rng.UniformInt(6));
    std::vector<int32_t> seq(12);
    for (auto& i : seq) i = static_cast<int32_t>(rng.UniformInt(40));
    std::vector<std::tuple<int64_t, int64_t, int32_t>> keyed;
    for (int32_t i = 0; i < 40; ++i) {
      keyed.emplace_back(-std::count(seq.begin(), seq.end(), i), -pop[i], i);
    }
    std::sort(keyed.begin(), keyed.end());
    std::vector<int32_t> oracle;
    for (auto& k : keyed) oracle.push_back(std::get<2>(k));
    EXPECT_EQ(SPopRanking(seq, pop), oracle);
  }
}

TEST(Baselines, FomcFollowsTransitionsThenPop) {
  // a=0, b=1, c=2, d=3, e=4.
  std::vector<std::vector<int32_t>> seqs = {{0, 1}, {0, 1}, {0, 2}, {3, 4}};
  TransitionCounts t = TransitionCounts::FromSequences(seqs);
  std::vector<int64_t> pop = {3, 2, 1, 1, 1};
  std::vector<int32_t> r = FomcRanking(0, t, pop);
  EXPECT_EQ(r[0], 1);
  EXPECT_EQ(r[1], 2);
  std::vector<int32_t> unseen = FomcRanking(4, t, pop);
  EXPECT_EQ(unseen, PopRanking(pop));
}

TEST(Baselines, TransitionCountsMatchPairCounting) {
  Rng rng(4);
  std::vector<std::vector<int32_t>> seqs(30);
  for (auto& s : seqs) {
    s.resize(2 + rng.UniformInt(10));
    for (auto& i : s) i = static_cast<int32_t>(rng.UniformInt(8));
  }
  TransitionCounts t = TransitionCounts::FromSequences(seqs);
  std::map<std::pair<int32_t, int32_t>, int64_t> brute;
  for (const auto& s : seqs) {
    for (size_t p = 0; p + 1 < s.size(); ++p) ++brute[{s[p], s[p + 1]}];
  }
  for (int32_t a = 0; a < 8; ++a) {
    for (int32_t b = 0; b < 8; ++b) {
      auto it = brute.find({a, b});
      EXPECT_EQ(t.Count(a, b), it == brute.end() ? 0 : it->second);
    }
  }
}

TEST(Baselines, RerankAscendingPopularity) {
  // x=0 (9), y=1 (1), z=2 (5).
  std::vector<int64_t> pop = {9, 1, 5};
  std::vector<int32_t> pre = {0, 1, 2};
  EXPECT_EQ(RerankByPopularity(pre, 1, pop), (std::vector<int32_t>{1}));
  std::vector<int64_t> flat = {4, 4, 4};
  std::vector<int32_t> pre2 = {2, 0, 1};
  EXPECT_EQ(RerankByPopularity(pre2, 3, flat), pre2);
  EXPECT_THROW(RerankByPopularity(pre, 4, pop), PreconditionError);
}

TEST(Baselines, RerankOutputIsSubsetOfInput) {
  Rng rng(5);
  std::vector<int64_t> pop(100);
  for (auto& c : pop) c = static_cast<int64_t>(rng.UniformInt(50));
  std::vector<int32_t> pre(50);
  std::iota(pre.begin(), pre.end(), 25);
  std::vector<int32_t> top = RerankByPopularity(pre, 10, pop);
  ASSERT_EQ(top.size(), 10u);
  for (int32_t i : top) {
    EXPECT_NE(std::find(pre.begin(), pre.end(), i), pre.end());
  }
}

TEST(Baselines, ScorersAgreeWithFullRankings) {
  Corpus c = MakeCorpus(200, 8);
  const auto& pop = c.dataset.train_popularity;
  TransitionCounts t = TransitionCounts::FromSequences(TrainSequences(c.split));
  std::vector<int32_t> cand = {5, 17, 2, 40, 41, 99, 150, 0};
  std::vector<int32_t> history = {3, 17, 17, 40};
  for (Baseline b : {Baseline::kPop, Baseline::kSPop, Baseline::kFomc}) {
    ScoreFn f = BaselineScorer(b, pop, &t);
    std::vector<double> s = f(0, history, cand);
    std::vector<int32_t> full = b == Baseline::kPop    ? PopRanking(pop)
                                : b == Baseline::kSPop ? SPopRanking(history, pop)
                                                       : FomcRanking(40, t, pop);
    std::vector<int32_t> expected;
    for (int32_t i : full) {
      if (std::find(cand.begin(), cand.end(), i) != cand.end()) expected.push_back(i);
    }
    for (size_t r = 0; r < expected.size(); ++r) {
      const size_t pos = std::find(cand.begin(), cand.end(), expected[r]) - cand.begin();
      EXPECT_EQ(RankOfTruth(s, cand, pos), r + 1);
    }
  }
}

TEST(Baselines, RerankedScorerPromotesUnpopularWithinTopList) {
  std::vector<int64_t> pop = {50, 40, 30, 20, 10, 5};
  ScoreFn base = [](size_t, std::span<const int32_t>,
                    std::span<const int32_t> cand) {
    std::vector<double> s;
    for (int32_t c : cand) s.push_back(-static_cast<double>(c));
    return s;
  };
  ScoreFn reranked = RerankedScorer(base, pop, 3);
  std::vector<int32_t> cand = {0, 1, 2, 3, 4, 5};
  std::vector<double> s = reranked(0, {}, cand);
  // Top-3 of the base (0,1,2) reversed by popularity, then 3,4,5.
  std::vector<int32_t> order = {2, 1, 0, 3, 4, 5};
  for (size_t r = 0; r < order.size(); ++r) {
    EXPECT_EQ(RankOfTruth(s, cand, order[r]), r + 1);
  }
}

TEST(Baselines, DeterministicAcrossRuns) {
  Corpus a = MakeCorpus(300, 11);
  Corpus b = MakeCorpus(300, 11);
  TransitionCounts ta = TransitionCounts::FromSequences(TrainSequences(a.split));
  TransitionCounts tb = TransitionCounts::FromSequences(TrainSequences(b.split));
  for (Baseline bl : {Baseline::kPop, Baseline::kSPop, Baseline::kFomc}) {
    auto ra = Evaluate(BaselineScorer(bl, a.dataset.train_popularity, &ta),
                       a.dataset, a.split, a.partition, {});
    auto rb = Evaluate(BaselineScorer(bl, b.dataset.train_popularity, &tb),
                       b.dataset, b.split, b.partition, {});
    EXPECT_EQ(ReportToJson(ra).dump(), ReportToJson(rb).dump());
  }
}

}  // namespace
}  // namespace seqrec
