#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "moseq/chunk.hpp"
#include "moseq/error.hpp"
#include "moseq/io.hpp"

namespace moseq {

struct Token {
  std::string surface;
  std::vector<std::uint32_t> feature_ids;  // sorted, unique

  friend bool operator==(const Token&, const Token&) = default;
};

struct Sentence {
  std::vector<Token> tokens;
  std::vector<std::string> gold_tags;
  // Input lines as read, used to echo columns when writing predictions.
  std::vector<std::string> lines;

  std::size_t size() const { return tokens.size(); }

  friend bool operator==(const Sentence& a, const Sentence& b) {
    return a.tokens == b.tokens && a.gold_tags == b.gold_tags;
  }
};

// ---------------------------------------------------------------------------
// CoNLL columns

namespace detail {

inline std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i])))
      ++i;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j])))
      ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

}  // namespace detail

// Reads blank-line separated blocks of whitespace-separated columns.
// -DOCSTART- lines are document markers and are dropped.
inline std::vector<Sentence> parse_conll(std::istream& in,
                                         std::size_t token_column,
                                         std::size_t tag_column) {
  std::vector<Sentence> out;
  Sentence cur;
  std::string line;
  std::size_t line_no = 0;
  const std::size_t need = std::max(token_column, tag_column) + 1;
  auto flush = [&] {
    if (!cur.tokens.empty()) out.push_back(std::move(cur));
    cur = Sentence{};
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto cols = detail::split_ws(line);
    if (cols.empty()) {
      flush();
      continue;
    }
    if (cols[0] == "-DOCSTART-") continue;
    if (cols.size() < need)
      throw DataError("line " + std::to_string(line_no) + ": expected at least " +
                      std::to_string(need) + " columns, found " +
                      std::to_string(cols.size()));
    cur.tokens.push_back(Token{std::string(cols[token_column]), {}});
    cur.gold_tags.emplace_back(cols[tag_column]);
    cur.lines.push_back(line);
  }
  flush();
  return out;
}

inline std::vector<Sentence> parse_conll(std::string_view text,
                                         std::size_t token_column,
                                         std::size_t tag_column) {
  std::istringstream in{std::string(text)};
  return parse_conll(in, token_column, tag_column);
}

// Two columns per line (surface, tag); parse back with columns 0 and 1.
inline void write_conll(std::ostream& out, const std::vector<Sentence>& sentences) {
  for (const auto& s : sentences) {
    for (std::size_t t = 0; t < s.size(); ++t)
      out << s.tokens[t].surface << ' ' << s.gold_tags[t] << '\n';
    out << '\n';
  }
}

// Rewrites gold tags into BIO. The chunk spans are unchanged.
inline std::vector<Sentence> normalize_to_bio(std::vector<Sentence> sentences,
                                              TagScheme scheme) {
  for (auto& s : sentences) {
    const auto spans = chunks_for_scheme(s.gold_tags, scheme);
    s.gold_tags = spans_to_bio(spans, s.size());
  }
  return sentences;
}

// ---------------------------------------------------------------------------
// Vocabulary

struct TokenVocab {
  static constexpr std::uint32_t kUnknown = 0;
  static constexpr std::string_view kUnknownSurface = "<unk>";

  std::vector<std::string> tokens{std::string(kUnknownSurface)};
  std::unordered_map<std::string, std::uint32_t> token_ids;
  std::vector<std::string> features;
  std::unordered_map<std::string, std::uint32_t> feature_ids;

  std::uint32_t id(const std::string& surface) const {
    auto it = token_ids.find(surface);
    return it == token_ids.end() ? kUnknown : it->second;
  }
  std::size_t size() const { return tokens.size(); }
  std::size_t feature_count() const { return features.size(); }

  std::uint32_t add_feature(const std::string& name) {
    auto [it, inserted] = feature_ids.emplace(name, features.size());
    if (inserted) features.push_back(name);
    return it->second;
  }

  void serialize(io::ByteWriter& w) const {
    w.u64(tokens.size());
    for (const auto& t : tokens) w.str(t);
    w.u64(features.size());
    for (const auto& f : features) w.str(f);
  }

  static TokenVocab deserialize(io::ByteReader& r) {
    TokenVocab v;
    v.tokens.clear();
    const auto n = r.u64();
    for (std::uint64_t i = 0; i < n; ++i) {
      v.tokens.push_back(r.str());
      if (i > 0) v.token_ids.emplace(v.tokens.back(), i);
    }
    if (v.tokens.empty() || v.tokens[0] != kUnknownSurface)
      throw ModelError("token vocabulary lacks the unknown entry");
    const auto nf = r.u64();
    for (std::uint64_t i = 0; i < nf; ++i) v.add_feature(r.str());
    return v;
  }
};

// ---------------------------------------------------------------------------
// Spelling and context features

namespace detail {

// Byte offsets of UTF-8 code point starts, plus the end offset.
inline std::vector<std::size_t> codepoint_bounds(std::string_view s) {
  std::vector<std::size_t> b;
  for (std::size_t i = 0; i < s.size(); ++i)
    if ((static_cast<unsigned char>(s[i]) & 0xC0) != 0x80) b.push_back(i);
  b.push_back(s.size());
  return b;
}

inline std::string ascii_lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

}  // namespace detail

inline constexpr int kContextWindow = 2;

// Feature strings firing for the token at `position`.
inline std::vector<std::string> feature_names(const Sentence& sentence,
                                              std::size_t position) {
  if (position >= sentence.size())
    throw DataError("feature position " + std::to_string(position) +
                    " out of range for sentence of length " +
                    std::to_string(sentence.size()));
  const std::string& w = sentence.tokens[position].surface;
  std::vector<std::string> f;

  bool has_alpha = false, has_lower = false, has_digit = false, all_digit = true,
       has_hyphen = false, has_punct = false;
  for (unsigned char c : w) {
    has_alpha |= std::isalpha(c) != 0;
    has_lower |= std::islower(c) != 0;
    has_digit |= std::isdigit(c) != 0;
    all_digit &= std::isdigit(c) != 0;
    has_hyphen |= c == '-';
    has_punct |= std::ispunct(c) != 0;
  }
  if (!w.empty() && std::isupper(static_cast<unsigned char>(w[0])))
    f.emplace_back("cap:initial");
  if (has_alpha && !has_lower) f.emplace_back("cap:all");
  if (!w.empty() && all_digit) f.emplace_back("num:all");
  if (has_digit) f.emplace_back("num:has");
  if (has_hyphen) f.emplace_back("hyphen");
  if (has_punct) f.emplace_back("punct");

  const auto b = detail::codepoint_bounds(w);
  const std::size_t n_cp = b.size() - 1;
  for (std::size_t k = 1; k <= 3 && k <= n_cp; ++k) {
    f.push_back("pre" + std::to_string(k) + "=" + w.substr(0, b[k]));
    f.push_back("suf" + std::to_string(k) + "=" + w.substr(b[n_cp - k]));
  }

  for (int off = -kContextWindow; off <= kContextWindow; ++off) {
    const auto pos = static_cast<std::ptrdiff_t>(position) + off;
    std::string word;
    if (pos < 0)
      word = "<s>";
    else if (pos >= static_cast<std::ptrdiff_t>(sentence.size()))
      word = "</s>";
    else
      word = detail::ascii_lower(sentence.tokens[pos].surface);
    f.push_back("w[" + std::to_string(off) + "]=" + word);
  }
  return f;
}

// Known feature ids for a position, sorted and unique. Features never seen
// while building the vocabulary are dropped.
inline std::vector<std::uint32_t> extract_features(const TokenVocab& vocab,
                                                   const Sentence& sentence,
                                                   std::size_t position) {
  std::vector<std::uint32_t> ids;
  for (const auto& name : feature_names(sentence, position)) {
    auto it = vocab.feature_ids.find(name);
    if (it != vocab.feature_ids.end()) ids.push_back(it->second);
  }
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

inline void featurize(const TokenVocab& vocab, Sentence& sentence) {
  for (std::size_t t = 0; t < sentence.size(); ++t)
    sentence.tokens[t].feature_ids = extract_features(vocab, sentence, t);
}

inline void featurize(const TokenVocab& vocab, std::vector<Sentence>& sentences) {
  for (auto& s : sentences) featurize(vocab, s);
}

// Token ids in first-occurrence order for tokens seen at least `min_count`
// times; the feature inventory covers every training position.
inline TokenVocab build_token_vocab(const std::vector<Sentence>& sentences,
                                    std::size_t min_count = 1) {
  if (min_count < 1) throw UsageError("min_count must be at least 1");
  std::unordered_map<std::string, std::size_t> counts;
  std::vector<std::string> order;
  for (const auto& s : sentences)
    for (const auto& tok : s.tokens)
      if (counts[tok.surface]++ == 0) order.push_back(tok.surface);

  TokenVocab vocab;
  for (const auto& w : order) {
    if (counts[w] < min_count) continue;
    vocab.token_ids.emplace(w, vocab.tokens.size());
    vocab.tokens.push_back(w);
  }
  for (const auto& s : sentences)
    for (std::size_t t = 0; t < s.size(); ++t)
      for (const auto& name : feature_names(s, t)) vocab.add_feature(name);
  return vocab;
}

}  // namespace moseq
