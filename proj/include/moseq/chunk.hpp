#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "moseq/error.hpp"

namespace moseq {

// A typed token span, both ends inclusive.
struct ChunkSpan {
  std::size_t start = 0;
  std::size_t end = 0;
  std::string type;

  friend bool operator==(const ChunkSpan&, const ChunkSpan&) = default;
  friend auto operator<=>(const ChunkSpan&, const ChunkSpan&) = default;
};

enum class TagScheme { kIOB1, kBIO, kIOBES };

// A tag split into its scheme prefix ('O', 'B', 'I', 'E', 'S') and type.
struct ParsedTag {
  char prefix = 'O';
  std::string_view type;
};

inline ParsedTag parse_tag(std::string_view tag, TagScheme scheme,
                           std::size_t position) {
  if (tag == "O") return {'O', {}};
  auto fail = [&] {
    return DataError("unparseable tag '" + std::string(tag) +
                     "' at position " + std::to_string(position));
  };
  if (tag.size() < 3 || tag[1] != '-') throw fail();
  const char p = tag[0];
  const bool ok = p == 'B' || p == 'I' ||
                  (scheme == TagScheme::kIOBES && (p == 'E' || p == 'S'));
  if (!ok) throw fail();
  return {p, tag.substr(2)};
}

// Maximal spans under the scheme's semantics. I-/E- tags with no open chunk
// of the same type start a new chunk (conlleval leniency).
inline std::vector<ChunkSpan> chunks_for_scheme(
    const std::vector<std::string>& tags, TagScheme scheme) {
  std::vector<ChunkSpan> spans;
  bool open = false;
  ChunkSpan cur;
  auto close = [&] {
    if (open) spans.push_back(cur);
    open = false;
  };
  for (std::size_t t = 0; t < tags.size(); ++t) {
    const ParsedTag pt = parse_tag(tags[t], scheme, t);
    if (pt.prefix == 'O') {
      close();
      continue;
    }
    const bool continues = open && cur.type == pt.type &&
                           (pt.prefix == 'I' || pt.prefix == 'E');
    // B- and S- always open a chunk. Under IOB1, B- only appears between
    // adjacent chunks of the same type, so the rule is the same.
    if (!continues) {
      close();
      cur = ChunkSpan{t, t, std::string(pt.type)};
      open = true;
    } else {
      cur.end = t;
    }
    if (scheme == TagScheme::kIOBES && (pt.prefix == 'E' || pt.prefix == 'S'))
      close();
  }
  close();
  return spans;
}

// Renders spans as BIO tags over a sentence of length T. Spans must be
// disjoint and sorted.
inline std::vector<std::string> spans_to_bio(const std::vector<ChunkSpan>& spans,
                                             std::size_t length) {
  std::vector<std::string> tags(length, "O");
  for (const auto& s : spans) {
    tags[s.start] = "B-" + s.type;
    for (std::size_t t = s.start + 1; t <= s.end; ++t) tags[t] = "I-" + s.type;
  }
  return tags;
}

}  // namespace moseq
