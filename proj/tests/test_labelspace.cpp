#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <sstream>

#include "moseq/labelspace.hpp"
#include "moseq/nn.hpp"

namespace moseq {
namespace {

std::string L(std::initializer_list<const char*> parts) {
  std::vector<std::string> v(parts.begin(), parts.end());
  return join_label(v);
}

Sentence tagged(std::vector<std::string> tags) {
  Sentence s;
  for (std::size_t i = 0; i < tags.size(); ++i) s.tokens.push_back(Token{"w", {}});
  s.gold_tags = std::move(tags);
  return s;
}

TEST(ToNgram, Bigram) {
  EXPECT_EQ(to_ngram({"B", "I", "O"}, 2),
            (std::vector<std::string>{L({"<START>", "B"}), L({"B", "I"}), L({"I", "O"})}));
}

TEST(ToNgram, OrderOneIsIdentity) {
  const std::vector<std::string> tags{"B-NP", "I-NP", "O"};
  EXPECT_EQ(to_ngram(tags, 1), tags);
}

TEST(ToNgram, PadsWithStart) {
  EXPECT_EQ(to_ngram({"B"}, 3), (std::vector<std::string>{L({"<START>", "<START>", "B"})}));
}

TEST(ToNgram, RejectsOrderZero) { EXPECT_THROW(to_ngram({"B"}, 0), UsageError); }

TEST(LastComponent, Examples) {
  EXPECT_EQ(last_component(L({"<START>", "B-NP"})), "B-NP");
  EXPECT_EQ(last_component(L({"B", "I", "O"})), "O");
  EXPECT_EQ(last_component("X"), "X");
  EXPECT_THROW(last_component(""), DataError);
  EXPECT_THROW(last_component(L({"B", ""})), DataError);
  EXPECT_THROW(last_component(L({"B", "<START>"})), DataError);
}

TEST(BuildLabelVocab, SingleSentenceBigram) {
  const auto v = build_label_vocab({tagged({"B-NP", "I-NP"})}, 2);
  ASSERT_EQ(v.size(), 2u);
  EXPECT_EQ(v.label(0), L({"<START>", "B-NP"}));
  EXPECT_EQ(v.label(1), L({"B-NP", "I-NP"}));
}

TEST(BuildLabelVocab, Errors) {
  EXPECT_THROW(build_label_vocab({tagged({"B"})}, 0), UsageError);
  EXPECT_THROW(build_label_vocab({tagged({std::string("B") + kLabelSeparator + "X"})}, 1),
               DataError);
  EXPECT_THROW(build_label_vocab({tagged({"<START>"})}, 1), DataError);
}

TEST(LabelVocab, AddValidatesComponents) {
  LabelVocab v(2);
  EXPECT_THROW(v.add("A"), DataError);
  EXPECT_EQ(v.add(L({"A", "B"})), 0u);
  EXPECT_EQ(v.add(L({"A", "B"})), 0u);
  EXPECT_FALSE(v.find(L({"B", "A"})).has_value());
  EXPECT_THROW(v.id(L({"B", "A"})), DataError);
}

TEST(LabelVocab, DumpOneLabelPerLine) {
  const auto v = build_label_vocab({tagged({"B-NP", "I-NP", "O"})}, 2);
  std::ostringstream out;
  v.dump(out);
  EXPECT_EQ(out.str(), "<START>|B-NP\nB-NP|I-NP\nI-NP|O\n");
}

TEST(LabelVocab, SerializeRoundTrip) {
  const auto v = build_label_vocab({tagged({"B-NP", "I-NP", "O", "B-VP"})}, 3);
  io::ByteWriter w;
  v.serialize(w);
  io::ByteReader r(w.data());
  EXPECT_EQ(LabelVocab::deserialize(r), v);
}

std::vector<Sentence> random_corpus(nn::Rng& rng, std::size_t n, std::size_t n_tags) {
  std::vector<Sentence> out;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::string> tags;
    const auto len = 1 + rng.below(7);
    for (std::uint64_t t = 0; t < len; ++t) tags.push_back("T" + std::to_string(rng.below(n_tags)));
    out.push_back(tagged(tags));
  }
  return out;
}

TEST(LabelSpaceProperty, LastComponentInvertsToNgram) {
  nn::Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const auto s = random_corpus(rng, 1, 4)[0];
    for (std::size_t order = 1; order <= 4; ++order) {
      const auto ng = to_ngram(s.gold_tags, order);
      ASSERT_EQ(ng.size(), s.gold_tags.size());
      for (std::size_t t = 0; t < ng.size(); ++t) EXPECT_EQ(last_component(ng[t]), s.gold_tags[t]);
      // overlap consistency between consecutive labels
      for (std::size_t t = 1; t < ng.size() && order > 1; ++t) {
        auto a = split_label(ng[t - 1]);
        auto b = split_label(ng[t]);
        EXPECT_TRUE(std::equal(a.begin() + 1, a.end(), b.begin(), b.end() - 1));
      }
    }
  }
}

TEST(LabelSpaceProperty, TrainingLabelsCoveredAndBounded) {
  nn::Rng rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    const auto corpus = random_corpus(rng, 1 + rng.below(20), 1 + rng.below(5));
    const auto v1 = build_label_vocab(corpus, 1);
    for (std::size_t order = 1; order <= 3; ++order) {
      const auto v = build_label_vocab(corpus, order);
      for (const auto& s : corpus)
        for (const auto& l : to_ngram(s.gold_tags, order)) EXPECT_TRUE(v.find(l).has_value());
      // START-padded labels can exceed |Y1|^n only through the padding
      // prefixes, which number at most sum_{k<n} |Y1|^k.
      double bound = 0;
      for (std::size_t k = 0; k <= order; ++k) bound += std::pow(double(v1.size()), double(k));
      EXPECT_LE(double(v.size()), bound);
      std::set<std::string> finals;
      for (const auto& l : v.labels()) finals.insert(last_component(l));
      EXPECT_EQ(finals.size(), v1.size());
      EXPECT_GE(v.size(), v1.size());
    }
  }
}

}  // namespace
}  // namespace moseq
