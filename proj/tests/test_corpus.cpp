#include <gtest/gtest.h>

#include <algorithm>
#include <sstream>

#include "moseq/corpus.hpp"
#include "moseq/metrics.hpp"
#include "moseq/nn.hpp"

namespace moseq {
namespace {

Sentence make(std::vector<std::string> words, std::vector<std::string> tags = {}) {
  Sentence s;
  for (auto& w : words) s.tokens.push_back(Token{w, {}});
  s.gold_tags = tags.empty() ? std::vector<std::string>(s.tokens.size(), "O") : tags;
  return s;
}

bool has(const std::vector<std::string>& v, const std::string& x) {
  return std::find(v.begin(), v.end(), x) != v.end();
}

TEST(ParseConll, ReadsBlocks) {
  const auto s = parse_conll("Gulf NNP B-LOC\nof IN I-LOC\n\n", 0, 2);
  ASSERT_EQ(s.size(), 1u);
  EXPECT_EQ(s[0].size(), 2u);
  EXPECT_EQ(s[0].gold_tags, (std::vector<std::string>{"B-LOC", "I-LOC"}));
  EXPECT_EQ(s[0].tokens[0].surface, "Gulf");
}

TEST(ParseConll, EmptyStreamIsEmpty) { EXPECT_TRUE(parse_conll("", 0, 2).empty()); }

TEST(ParseConll, Conll2000Line) {
  const auto s = parse_conll("He PRP B-NP\n", 0, 2);
  ASSERT_EQ(s.size(), 1u);
  EXPECT_EQ(s[0].tokens[0].surface, "He");
  EXPECT_EQ(s[0].gold_tags[0], "B-NP");
}

TEST(ParseConll, MultipleBlankLinesAndDocstart) {
  const auto s = parse_conll("-DOCSTART- -X- O O\n\nEU NNP B-NP B-ORG\n\n\n\nrejects VBZ B-VP O\n", 0, 3);
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(s[0].gold_tags[0], "B-ORG");
  EXPECT_EQ(s[1].gold_tags[0], "O");
}

TEST(ParseConll, TooFewColumnsNamesLine) {
  try {
    parse_conll("a DT B-NP\nb NN\n", 0, 2);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
  }
}

TEST(ParseConll, TagsPreservedVerbatim) {
  const auto s = parse_conll("x I-MISC\ny S-PER\r\n", 0, 1);
  EXPECT_EQ(s[0].gold_tags, (std::vector<std::string>{"I-MISC", "S-PER"}));
}

TEST(ParseConll, RoundTripOnRandomCorpora) {
  nn::Rng rng(11);
  const std::vector<std::string> tags{"O", "B-NP", "I-NP", "B-VP", "I-VP"};
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Sentence> corpus;
    const auto n = rng.below(5);
    for (std::uint64_t i = 0; i < n; ++i) {
      Sentence s;
      const auto len = 1 + rng.below(6);
      for (std::uint64_t t = 0; t < len; ++t) {
        s.tokens.push_back(Token{"w" + std::to_string(rng.below(100)), {}});
        s.gold_tags.push_back(tags[rng.below(tags.size())]);
      }
      corpus.push_back(s);
    }
    std::ostringstream out;
    write_conll(out, corpus);
    EXPECT_EQ(parse_conll(out.str(), 0, 1), corpus);
  }
}

TEST(NormalizeToBio, Iob1SentenceInitial) {
  auto s = normalize_to_bio({make({"a", "b"}, {"I-LOC", "I-LOC"})}, TagScheme::kIOB1);
  EXPECT_EQ(s[0].gold_tags, (std::vector<std::string>{"B-LOC", "I-LOC"}));
}

TEST(NormalizeToBio, Iob1AdjacentSameType) {
  auto s = normalize_to_bio({make({"a", "b", "c"}, {"I-PER", "B-PER", "I-PER"})},
                            TagScheme::kIOB1);
  EXPECT_EQ(s[0].gold_tags, (std::vector<std::string>{"B-PER", "B-PER", "I-PER"}));
}

TEST(NormalizeToBio, BioIsIdentity) {
  const auto in = make({"a", "b", "c", "d"}, {"B-NP", "I-NP", "O", "B-VP"});
  EXPECT_EQ(normalize_to_bio({in}, TagScheme::kBIO)[0].gold_tags, in.gold_tags);
}

TEST(NormalizeToBio, IobesSingleton) {
  auto s = normalize_to_bio({make({"a"}, {"S-PER"})}, TagScheme::kIOBES);
  EXPECT_EQ(s[0].gold_tags, (std::vector<std::string>{"B-PER"}));
}

TEST(NormalizeToBio, IobesFull) {
  auto s = normalize_to_bio({make({"a", "b", "c", "d", "e"}, {"B-ORG", "I-ORG", "E-ORG", "S-ORG", "O"})},
                            TagScheme::kIOBES);
  EXPECT_EQ(s[0].gold_tags,
            (std::vector<std::string>{"B-ORG", "I-ORG", "I-ORG", "B-ORG", "O"}));
}

TEST(NormalizeToBio, UnparseableTagReportsPosition) {
  try {
    normalize_to_bio({make({"a", "b"}, {"B-NP", "E-NP"})}, TagScheme::kBIO);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("position 1"), std::string::npos) << e.what();
  }
  EXPECT_THROW(normalize_to_bio({make({"a"}, {"NP"})}, TagScheme::kIOB1), DataError);
}

// Spans extracted under the input scheme equal BIO spans of the output.
TEST(NormalizeToBio, PreservesSpansProperty) {
  nn::Rng rng(3);
  const std::vector<std::pair<TagScheme, std::vector<std::string>>> schemes{
      {TagScheme::kIOB1, {"O", "I-A", "B-A", "I-B", "B-B"}},
      {TagScheme::kBIO, {"O", "I-A", "B-A", "I-B", "B-B"}},
      {TagScheme::kIOBES, {"O", "B-A", "I-A", "E-A", "S-A", "B-B", "E-B", "S-B", "I-B"}}};
  for (const auto& [scheme, alphabet] : schemes) {
    for (int trial = 0; trial < 300; ++trial) {
      Sentence s;
      const auto len = 1 + rng.below(8);
      for (std::uint64_t t = 0; t < len; ++t) {
        s.tokens.push_back(Token{"x", {}});
        s.gold_tags.push_back(alphabet[rng.below(alphabet.size())]);
      }
      const auto before = chunks_for_scheme(s.gold_tags, scheme);
      const auto out = normalize_to_bio({s}, scheme);
      EXPECT_EQ(extract_chunks(out[0].gold_tags), before);
    }
  }
}

TEST(TokenVocab, MinCount) {
  const std::vector<Sentence> corpus{make({"a", "b", "a"}), make({"a"})};
  const auto v = build_token_vocab(corpus, 2);
  EXPECT_NE(v.id("a"), TokenVocab::kUnknown);
  EXPECT_EQ(v.id("b"), TokenVocab::kUnknown);
  EXPECT_EQ(v.size(), 2u);
}

TEST(TokenVocab, MinCountOneKeepsAll) {
  const std::vector<Sentence> corpus{make({"a", "b", "c"}), make({"c", "d"})};
  const auto v = build_token_vocab(corpus, 1);
  EXPECT_EQ(v.size(), 5u);  // + unknown
  EXPECT_EQ(v.id("a"), 1u);
  EXPECT_EQ(v.id("d"), 4u);
  EXPECT_EQ(v.id("zzz"), TokenVocab::kUnknown);
}

TEST(TokenVocab, DeterministicBytes) {
  const std::vector<Sentence> corpus{make({"The", "cat", "sat"}), make({"IBM", "rose", "3-4%"})};
  io::ByteWriter a, b;
  build_token_vocab(corpus, 1).serialize(a);
  build_token_vocab(corpus, 1).serialize(b);
  EXPECT_EQ(a.data(), b.data());
  io::ByteReader r(a.data());
  const auto back = TokenVocab::deserialize(r);
  io::ByteWriter c;
  back.serialize(c);
  EXPECT_EQ(c.data(), a.data());
}

TEST(TokenVocab, RejectsZeroMinCount) {
  EXPECT_THROW(build_token_vocab({}, 0), UsageError);
}

TEST(Features, AllCapsFires) {
  const auto f = feature_names(make({"IBM"}), 0);
  EXPECT_TRUE(has(f, "cap:all"));
  EXPECT_TRUE(has(f, "cap:initial"));
}

TEST(Features, LowercaseWord) {
  const auto f = feature_names(make({"the", "of", "x"}), 1);
  EXPECT_FALSE(has(f, "cap:all"));
  EXPECT_FALSE(has(f, "cap:initial"));
  EXPECT_TRUE(has(f, "suf1=f"));
  EXPECT_TRUE(has(f, "suf2=of"));
  EXPECT_TRUE(has(f, "pre1=o"));
  EXPECT_FALSE(has(f, "suf3=of"));
  EXPECT_TRUE(has(f, "w[-1]=the"));
  EXPECT_TRUE(has(f, "w[1]=x"));
}

TEST(Features, BoundarySentinels) {
  const auto f = feature_names(make({"Hello", "world"}), 0);
  EXPECT_TRUE(has(f, "w[-1]=<s>"));
  EXPECT_TRUE(has(f, "w[-2]=<s>"));
  EXPECT_TRUE(has(f, "w[0]=hello"));
  EXPECT_TRUE(has(f, "w[2]=</s>"));
}

TEST(Features, DigitsHyphenPunct) {
  auto f = feature_names(make({"1999"}), 0);
  EXPECT_TRUE(has(f, "num:all"));
  EXPECT_TRUE(has(f, "num:has"));
  EXPECT_FALSE(has(f, "cap:all"));
  f = feature_names(make({"mid-2001"}), 0);
  EXPECT_FALSE(has(f, "num:all"));
  EXPECT_TRUE(has(f, "num:has"));
  EXPECT_TRUE(has(f, "hyphen"));
  EXPECT_TRUE(has(f, "punct"));
  f = feature_names(make({"U.S."}), 0);
  EXPECT_TRUE(has(f, "punct"));
  EXPECT_FALSE(has(f, "hyphen"));
}

TEST(Features, Utf8AffixesStayWhole) {
  const auto f = feature_names(make({"café"}), 0);
  EXPECT_TRUE(has(f, "suf1=é"));
  EXPECT_TRUE(has(f, "suf2=fé"));
}

TEST(Features, OutOfRange) {
  EXPECT_THROW(feature_names(make({"a"}), 1), DataError);
}

TEST(Features, PureSortedUnique) {
  const std::vector<Sentence> corpus{make({"The", "U.S.", "economy", "grew", "2.5%"})};
  const auto vocab = build_token_vocab(corpus, 1);
  for (std::size_t t = 0; t < corpus[0].size(); ++t) {
    const auto a = extract_features(vocab, corpus[0], t);
    const auto b = extract_features(vocab, corpus[0], t);
    EXPECT_EQ(a, b);
    EXPECT_TRUE(std::is_sorted(a.begin(), a.end()));
    EXPECT_EQ(std::adjacent_find(a.begin(), a.end()), a.end());
    EXPECT_FALSE(a.empty());
  }
}

TEST(Features, UnknownFeaturesDropped) {
  const auto vocab = build_token_vocab({make({"a"})}, 1);
  const auto ids = extract_features(vocab, make({"Qxz"}), 0);
  // only the position-independent sentinels can match
  for (auto id : ids) {
    const auto& name = vocab.features[id];
    EXPECT_TRUE(name.find("<s>") != std::string::npos || name.find("</s>") != std::string::npos)
        << name;
  }
}

}  // namespace
}  // namespace moseq
