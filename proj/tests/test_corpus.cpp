#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <numeric>
#include <set>

#include "memgate/corpus.hpp"
#include "memgate/rng.hpp"
#include "test_support.hpp"

using namespace memgate;
using memgate::testing::TempDir;
using memgate::testing::write_text;

namespace {

std::string record_line(const std::string& qid, const std::string& question = "Q?") {
  return R"({"qid":")" + qid + R"(","question":")" + question +
         R"(","options":["a","b","c","d"],"gold_label":"B","category":"business"})";
}

std::vector<QueryRecord> numbered_corpus(std::size_t n) {
  std::vector<QueryRecord> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i].qid = "q" + std::to_string(i);
    out[i].question = "question " + std::to_string(i);
    out[i].options = {"a", "b"};
  }
  return out;
}

std::vector<std::size_t> rank_histogram(const std::vector<QueryRecord>& corpus, const WorkloadConfig& cfg) {
  const auto ranks = rank_assignment(corpus.size(), cfg.seed);
  std::vector<std::size_t> rank_of(corpus.size());
  for (std::size_t r = 0; r < ranks.size(); ++r) rank_of[ranks[r]] = r;
  std::vector<std::size_t> counts(corpus.size(), 0);
  for (const auto& e : sample_stream(corpus, cfg)) ++counts[rank_of[e.record]];
  return counts;
}

}  // namespace

TEST(SplitMix64, SameSeedSameSequence) {
  SplitMix64 a(42), b(42);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next(), b.next());
}

TEST(SplitMix64, KnownFirstOutputForSeedZero) {
  // Reference value of the published SplitMix64 generator.
  SplitMix64 g(0);
  EXPECT_EQ(g.next(), 0xe220a8397b1dcdafULL);
}

TEST(SplitMix64, SubstreamsDifferByName) {
  auto a = SplitMix64::substream(1, "shuffle");
  auto b = SplitMix64::substream(1, "draws");
  auto c = SplitMix64::substream(1, "shuffle");
  const auto x = a.next();
  EXPECT_NE(x, b.next());
  EXPECT_EQ(x, c.next());
}

TEST(SplitMix64, UniformAndBelowStayInRange) {
  SplitMix64 g(7);
  for (int i = 0; i < 10000; ++i) {
    const double u = g.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    ASSERT_LT(g.below(7), 7u);
  }
}

TEST(LoadCorpus, ThreeValidLinesInOrder) {
  TempDir dir("corpus");
  write_text(dir / "c.jsonl", record_line("a") + "\n" + record_line("b") + "\n" + record_line("c") + "\n");
  const auto rs = load_corpus(dir / "c.jsonl");
  ASSERT_EQ(rs.size(), 3u);
  EXPECT_EQ(rs[0].qid, "a");
  EXPECT_EQ(rs[1].qid, "b");
  EXPECT_EQ(rs[2].qid, "c");
  EXPECT_EQ(rs[0].gold_label, 'B');
  EXPECT_EQ(rs[0].option_count(), 4u);
}

TEST(LoadCorpus, ShippedCorpusHas768Records) {
  const auto rs = load_corpus(MEMGATE_DATA_DIR "/business_synthetic.jsonl");
  EXPECT_EQ(rs.size(), 768u);
}

TEST(LoadCorpus, SevenHundredSixtyEightLineFile) {
  TempDir dir("corpus");
  std::string text;
  for (int i = 0; i < 768; ++i) text += record_line("q" + std::to_string(i)) + "\n";
  write_text(dir / "c.jsonl", text);
  EXPECT_EQ(load_corpus(dir / "c.jsonl").size(), 768u);
}

TEST(LoadCorpus, DuplicateQidNamesBothLines) {
  TempDir dir("corpus");
  write_text(dir / "c.jsonl", record_line("a") + "\n" + record_line("dup") + "\n" + record_line("b") + "\n" +
                                  record_line("c") + "\n" + record_line("dup") + "\n");
  try {
    load_corpus(dir / "c.jsonl");
    FAIL() << "expected CorpusError";
  } catch (const CorpusError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("lines 2 and 5"), std::string::npos) << msg;
    EXPECT_NE(msg.find("dup"), std::string::npos) << msg;
  }
}

TEST(LoadCorpus, MalformedLineReportsLineNumber) {
  TempDir dir("corpus");
  write_text(dir / "c.jsonl", record_line("a") + "\n" + record_line("b") + "\n{not json\n");
  try {
    load_corpus(dir / "c.jsonl");
    FAIL() << "expected CorpusError";
  } catch (const CorpusError& e) {
    EXPECT_NE(std::string(e.what()).find(":3:"), std::string::npos) << e.what();
  }
}

TEST(LoadCorpus, GoldLabelOutsideOptionsRejected) {
  TempDir dir("corpus");
  write_text(dir / "c.jsonl", R"({"qid":"x","question":"q","options":["a","b"],"gold_label":"C","category":""})");
  EXPECT_THROW(load_corpus(dir / "c.jsonl"), CorpusError);
}

TEST(LoadCorpus, MissingFileAndLimit) {
  EXPECT_THROW(load_corpus("/nonexistent/corpus.jsonl"), CorpusError);
  TempDir dir("corpus");
  write_text(dir / "c.jsonl", record_line("a") + "\n\n" + record_line("b") + "\n" + record_line("c") + "\n");
  const auto rs = load_corpus(dir / "c.jsonl", 2);
  ASSERT_EQ(rs.size(), 2u);
  EXPECT_EQ(rs[1].qid, "b");
}

TEST(LoadCorpus, SerializeRoundTrip) {
  const auto corpus = synthetic_corpus(20, 3);
  for (const auto& r : corpus) {
    const auto back = parse_query_record(serialize_query_record(r));
    EXPECT_EQ(back.qid, r.qid);
    EXPECT_EQ(back.question, r.question);
    EXPECT_EQ(back.options, r.options);
    EXPECT_EQ(back.gold_label, r.gold_label);
    EXPECT_EQ(back.category, r.category);
  }
}

TEST(Zipf, SingleItemIsOne) {
  for (double alpha : {0.3, 1.0, 2.5}) {
    const auto p = zipf_probabilities(1, alpha);
    ASSERT_EQ(p.size(), 1u);
    EXPECT_DOUBLE_EQ(p[0], 1.0);
  }
}

TEST(Zipf, ThreeItemsAlphaOneHandValues) {
  const auto p = zipf_probabilities(3, 1.0);
  ASSERT_EQ(p.size(), 3u);
  EXPECT_NEAR(p[0], 6.0 / 11.0, 1e-15);
  EXPECT_NEAR(p[1], 3.0 / 11.0, 1e-15);
  EXPECT_NEAR(p[2], 2.0 / 11.0, 1e-15);
}

TEST(Zipf, RejectsBadArguments) {
  EXPECT_THROW(zipf_probabilities(4, 0.0), std::invalid_argument);
  EXPECT_THROW(zipf_probabilities(4, -1.0), std::invalid_argument);
  EXPECT_THROW(zipf_probabilities(0, 1.0), std::invalid_argument);
}

TEST(Zipf, PositiveDecreasingNormalized) {
  for (std::size_t n : {2u, 10u, 768u, 10000u}) {
    for (double alpha : {0.1, 0.8, 1.1, 1.4, 3.0}) {
      const auto p = zipf_probabilities(n, alpha);
      double sum = 0.0;
      for (std::size_t k = 0; k < n; ++k) {
        ASSERT_GT(p[k], 0.0);
        if (k > 0) ASSERT_LT(p[k], p[k - 1]);
        sum += p[k];
      }
      EXPECT_NEAR(sum, 1.0, 1e-12) << "n=" << n << " alpha=" << alpha;
    }
  }
}

TEST(RankAssignment, IsPermutation) {
  const auto order = rank_assignment(768, 1);
  std::vector<std::size_t> sorted = order;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size(); ++i) EXPECT_EQ(sorted[i], i);
  EXPECT_NE(order, rank_assignment(768, 2));
}

TEST(SampleStream, SingleRecordCorpus) {
  const auto corpus = numbered_corpus(1);
  WorkloadConfig cfg;
  cfg.num_requests = 5;
  const auto events = sample_stream(corpus, cfg);
  ASSERT_EQ(events.size(), 5u);
  for (std::size_t i = 0; i < events.size(); ++i) {
    EXPECT_EQ(events[i].t, i + 1);
    EXPECT_EQ(events[i].record, 0u);
  }
}

TEST(SampleStream, EmptyCorpusAndBadConfigRejected) {
  WorkloadConfig cfg;
  EXPECT_THROW(sample_stream({}, cfg), std::invalid_argument);
  cfg.alpha = 0.0;
  EXPECT_THROW(sample_stream(numbered_corpus(3), cfg), std::invalid_argument);
  cfg.alpha = 1.0;
  cfg.num_requests = 0;
  EXPECT_THROW(sample_stream(numbered_corpus(3), cfg), std::invalid_argument);
}

TEST(SampleStream, Deterministic) {
  const auto corpus = numbered_corpus(768);
  WorkloadConfig cfg;
  const auto a = sample_stream(corpus, cfg);
  const auto b = sample_stream(corpus, cfg);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) ASSERT_EQ(a[i].record, b[i].record);
  cfg.seed = 2;
  const auto c = sample_stream(corpus, cfg);
  std::size_t same = 0;
  for (std::size_t i = 0; i < a.size(); ++i) same += a[i].record == c[i].record ? 1 : 0;
  EXPECT_LT(same, a.size());
}

TEST(SampleStream, EmpiricalFrequenciesNearZipfAtT5000) {
  const auto corpus = numbered_corpus(768);
  WorkloadConfig cfg;
  cfg.alpha = 1.1;
  cfg.num_requests = 5000;
  cfg.seed = 1;
  const auto counts = rank_histogram(corpus, cfg);
  const auto p = zipf_probabilities(768, 1.1);
  double worst = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k)
    worst = std::max(worst, std::abs(static_cast<double>(counts[k]) / 5000.0 - p[k]));
  EXPECT_LE(worst, 0.02);
}

TEST(SampleStream, CorpusSizeLimitRestrictsRecords) {
  const auto corpus = numbered_corpus(50);
  WorkloadConfig cfg;
  cfg.corpus_size_limit = 5;
  for (const auto& e : sample_stream(corpus, cfg)) EXPECT_LT(e.record, 5u);
}

// Property: chi-square goodness of fit for small corpora across the alpha grid.
TEST(SampleStreamProperty, ChiSquareFitForSmallCorpora) {
  for (std::size_t n : {2u, 5u, 17u, 32u}) {
    for (double alpha : {0.8, 1.1, 1.4}) {
      WorkloadConfig cfg;
      cfg.alpha = alpha;
      cfg.num_requests = 50000;
      cfg.seed = 1 + n;
      const auto counts = rank_histogram(numbered_corpus(n), cfg);
      const double p_value = memgate::testing::chi_square_p_value(counts, zipf_probabilities(n, alpha), 50000);
      EXPECT_GT(p_value, 0.001) << "n=" << n << " alpha=" << alpha;
    }
  }
}

TEST(SampleStreamProperty, TopTenShareGrowsWithAlpha) {
  const auto corpus = numbered_corpus(768);
  double prev = 0.0;
  for (double alpha : {0.8, 1.1, 1.4}) {
    WorkloadConfig cfg;
    cfg.alpha = alpha;
    cfg.num_requests = 50000;
    const auto counts = rank_histogram(corpus, cfg);
    const double share = std::accumulate(counts.begin(), counts.begin() + 10, 0.0) / 50000.0;
    EXPECT_GE(share, prev) << "alpha=" << alpha;
    prev = share;
  }
}

TEST(SyntheticCorpus, ValidAndDeterministic) {
  const auto a = synthetic_corpus(100, 1);
  const auto b = synthetic_corpus(100, 1);
  std::set<std::string> qids;
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].question, b[i].question);
    EXPECT_GE(a[i].option_count(), 4u);
    EXPECT_LE(a[i].option_count(), kMaxOptions);
    EXPECT_LT(static_cast<std::size_t>(a[i].gold_label - 'A'), a[i].option_count());
    qids.insert(a[i].qid);
  }
  EXPECT_EQ(qids.size(), 100u);
}
