#include <gtest/gtest.h>

#include <sstream>

#include "fixture.hpp"
#include "moseq/bench.hpp"
#include "moseq/metrics.hpp"
#include "moseq/nn.hpp"

namespace moseq {
namespace {

using Spans = std::vector<ChunkSpan>;

TEST(ExtractChunks, Basic) {
  EXPECT_EQ(extract_chunks({"B-NP", "I-NP", "O", "B-VP"}),
            (Spans{{0, 1, "NP"}, {3, 3, "VP"}}));
}

TEST(ExtractChunks, OrphanInsideStartsChunk) {
  EXPECT_EQ(extract_chunks({"I-NP", "I-NP"}), (Spans{{0, 1, "NP"}}));
  EXPECT_EQ(extract_chunks({"O", "I-NP"}), (Spans{{1, 1, "NP"}}));
}

TEST(ExtractChunks, TypeChangeSplits) {
  EXPECT_EQ(extract_chunks({"B-NP", "I-VP"}), (Spans{{0, 0, "NP"}, {1, 1, "VP"}}));
}

TEST(ExtractChunks, AdjacentSameType) {
  EXPECT_EQ(extract_chunks({"B-NP", "B-NP", "I-NP"}), (Spans{{0, 0, "NP"}, {1, 2, "NP"}}));
}

TEST(ExtractChunks, EmptyAndAllOutside) {
  EXPECT_TRUE(extract_chunks({}).empty());
  EXPECT_TRUE(extract_chunks({"O", "O"}).empty());
}

TEST(F1, PerfectIsHundred) {
  const std::vector<TagSequence> g{{"B-NP", "I-NP", "O"}};
  const auto s = f1(g, g);
  EXPECT_DOUBLE_EQ(s.f1(), 100.0);
  EXPECT_DOUBLE_EQ(s.precision(), 100.0);
}

TEST(F1, NoPredictionsIsZero) {
  const auto s = f1({{"B-NP"}}, {{"O"}});
  EXPECT_DOUBLE_EQ(s.f1(), 0.0);
  EXPECT_DOUBLE_EQ(s.precision(), 0.0);
  EXPECT_DOUBLE_EQ(s.recall(), 0.0);
}

TEST(F1, HalfRight) {
  // gold 2 chunks, predicted 2, correct 1
  const auto s = f1({{"B-NP", "O", "B-VP"}}, {{"B-NP", "O", "B-PP"}});
  EXPECT_DOUBLE_EQ(s.f1(), 50.0);
}

TEST(F1, Mismatch) {
  EXPECT_THROW(f1({{"O"}}, {}), DataError);
  EXPECT_THROW(f1({{"O"}}, {{"O", "O"}}), DataError);
}

TEST(F1, ConllevalFixture) {
  const auto fx = testing::load_conlleval_fixture();
  ASSERT_EQ(fx.gold.size(), 30u);
  ASSERT_EQ(fx.expected.size(), 30u);
  ChunkScore total_expected;
  for (std::size_t i = 0; i < fx.gold.size(); ++i) {
    const auto s = score_chunks(extract_chunks(fx.gold[i]), extract_chunks(fx.pred[i]));
    EXPECT_EQ(s.gold, fx.expected[i].gold) << "sentence " << i + 1;
    EXPECT_EQ(s.predicted, fx.expected[i].predicted) << "sentence " << i + 1;
    EXPECT_EQ(s.correct, fx.expected[i].correct) << "sentence " << i + 1;
    total_expected += fx.expected[i];
  }
  const auto s = f1(fx.gold, fx.pred);
  EXPECT_EQ(fixed(s.precision()), fixed(total_expected.precision()));
  EXPECT_EQ(fixed(s.recall()), fixed(total_expected.recall()));
  EXPECT_EQ(fixed(s.f1()), fixed(total_expected.f1()));
  EXPECT_EQ(fixed(s.precision()), "60.87");
  EXPECT_EQ(fixed(s.recall()), "62.22");
  EXPECT_EQ(fixed(s.f1()), "61.54");
}

TEST(Taxonomy, Examples) {
  const Spans gold{{0, 2, "NP"}};
  EXPECT_EQ(categorize(gold, {0, 2, "VP"}), ErrorCategory::kType);
  EXPECT_EQ(categorize(gold, {1, 2, "NP"}), ErrorCategory::kBoundary1);
  EXPECT_EQ(categorize({{1, 1, "NP"}}, {0, 2, "NP"}), ErrorCategory::kBoundary2);
  EXPECT_EQ(categorize(gold, {2, 4, "NP"}), ErrorCategory::kBoundary3);
  EXPECT_EQ(categorize(gold, {5, 6, "NP"}), ErrorCategory::kNoCommonWords);
}

TEST(Taxonomy, Precedence) {
  // exact span with another type wins over containment by a second gold chunk
  EXPECT_EQ(categorize({{0, 3, "NP"}, {1, 2, "PP"}}, {1, 2, "VP"}), ErrorCategory::kType);
  // contained in one gold, containing another: boundary-1
  EXPECT_EQ(categorize({{0, 5, "NP"}, {2, 2, "PP"}}, {1, 3, "NP"}), ErrorCategory::kBoundary1);
  // containing one gold, crossing another: boundary-2
  EXPECT_EQ(categorize({{1, 1, "NP"}, {3, 5, "PP"}}, {0, 3, "NP"}), ErrorCategory::kBoundary2);
}

TEST(Taxonomy, CorrectPredictionsNotCounted) {
  const auto r = analyze({{"B-NP", "I-NP", "O", "B-VP"}}, {{"B-NP", "I-NP", "O", "B-PP"}});
  EXPECT_EQ(r.total_predicted, 2u);
  EXPECT_EQ(r.total_errors, 1u);
  EXPECT_EQ(r.type, 1u);
  EXPECT_DOUBLE_EQ(r.rate(ErrorCategory::kType), 1.0);
}

TEST(LengthBuckets, SplitsAtThreshold) {
  const Spans gold{{0, 0, "A"}, {1, 2, "A"}, {3, 5, "A"}};
  const Spans pred{{0, 0, "A"}, {3, 5, "A"}};
  const auto b = length_buckets(gold, pred, 2);
  EXPECT_EQ(b.short_total, 2u);
  EXPECT_EQ(b.short_errors, 1u);
  EXPECT_EQ(b.long_total, 1u);
  EXPECT_EQ(b.long_errors, 0u);
  EXPECT_DOUBLE_EQ(b.short_rate(), 0.5);
  EXPECT_THROW(length_buckets(gold, pred, 0), UsageError);
}

TagSequence random_tags(nn::Rng& rng, std::size_t n) {
  static const std::vector<std::string> alphabet{"O", "B-NP", "I-NP", "B-VP", "I-VP"};
  TagSequence t;
  for (std::size_t i = 0; i < n; ++i) t.push_back(alphabet[rng.below(alphabet.size())]);
  return t;
}

TEST(MetricsProperty, SwapAndIdentity) {
  nn::Rng rng(21);
  for (int trial = 0; trial < 300; ++trial) {
    const auto len = 1 + rng.below(10);
    const std::vector<TagSequence> g{random_tags(rng, len)};
    const std::vector<TagSequence> p{random_tags(rng, len)};
    const auto a = f1(g, p), b = f1(p, g);
    EXPECT_DOUBLE_EQ(a.precision(), b.recall());
    EXPECT_DOUBLE_EQ(a.f1(), b.f1());
    const auto self = f1(g, g);
    EXPECT_DOUBLE_EQ(self.f1(), self.gold ? 100.0 : 0.0);
    const auto r = analyze(g, p);
    std::size_t sum = 0;
    for (auto c : kCategories) sum += r.count(c);
    EXPECT_EQ(sum, r.total_errors);
    EXPECT_EQ(r.total_errors, a.predicted - a.correct);
  }
}

TEST(Reports, TextAndCsv) {
  ChunkScore s{4, 5, 3};
  std::ostringstream t, c;
  write_score_text(t, s);
  write_score_csv(c, s);
  EXPECT_NE(t.str().find("f1: 66.67"), std::string::npos) << t.str();
  EXPECT_NE(c.str().find("4,5,3,60.0000,75.0000,66.6667"), std::string::npos) << c.str();
}

}  // namespace
}  // namespace moseq
