#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "moseq/chunk.hpp"
#include "moseq/corpus.hpp"
#include "moseq/error.hpp"

namespace moseq {

using TagSequence = std::vector<std::string>;

// BIO chunks with conlleval leniency for orphan I- tags.
inline std::vector<ChunkSpan> extract_chunks(const TagSequence& tags) {
  return chunks_for_scheme(tags, TagScheme::kBIO);
}

// Chunk-level scores. Percentages; 0/0 is reported as 0.
struct ChunkScore {
  std::size_t gold = 0;
  std::size_t predicted = 0;
  std::size_t correct = 0;

  double precision() const { return predicted ? 100.0 * correct / predicted : 0.0; }
  double recall() const { return gold ? 100.0 * correct / gold : 0.0; }
  double f1() const {
    const double p = precision(), r = recall();
    return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
  }

  ChunkScore& operator+=(const ChunkScore& o) {
    gold += o.gold;
    predicted += o.predicted;
    correct += o.correct;
    return *this;
  }
};

namespace detail {

inline bool contains(const std::vector<ChunkSpan>& spans, const ChunkSpan& s) {
  for (const auto& x : spans)
    if (x == s) return true;
  return false;
}

}  // namespace detail

inline ChunkScore score_chunks(const std::vector<ChunkSpan>& gold,
                               const std::vector<ChunkSpan>& predicted) {
  ChunkScore s;
  s.gold = gold.size();
  s.predicted = predicted.size();
  for (const auto& p : predicted)
    if (detail::contains(gold, p)) ++s.correct;
  return s;
}

inline ChunkScore f1(const std::vector<TagSequence>& gold,
                     const std::vector<TagSequence>& predicted) {
  if (gold.size() != predicted.size())
    throw DataError("gold has " + std::to_string(gold.size()) +
                    " sentences, prediction has " + std::to_string(predicted.size()));
  ChunkScore total;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (gold[i].size() != predicted[i].size())
      throw DataError("length mismatch in sentence " + std::to_string(i + 1) + ": gold " +
                      std::to_string(gold[i].size()) + " tokens, prediction " +
                      std::to_string(predicted[i].size()));
    total += score_chunks(extract_chunks(gold[i]), extract_chunks(predicted[i]));
  }
  return total;
}

inline ChunkScore f1(const std::vector<Sentence>& gold,
                     const std::vector<TagSequence>& predicted) {
  std::vector<TagSequence> g;
  g.reserve(gold.size());
  for (const auto& s : gold) g.push_back(s.gold_tags);
  return f1(g, predicted);
}

// ---------------------------------------------------------------------------
// Error taxonomy

enum class ErrorCategory { kType, kBoundary1, kBoundary2, kBoundary3, kNoCommonWords };

inline const char* category_name(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::kType: return "type";
    case ErrorCategory::kBoundary1: return "boundary-1";
    case ErrorCategory::kBoundary2: return "boundary-2";
    case ErrorCategory::kBoundary3: return "boundary-3";
    case ErrorCategory::kNoCommonWords: return "no-common-words";
  }
  return "?";
}

// Category of an incorrect prediction. Precedence when several relations hold:
// type > boundary-1 > boundary-2 > boundary-3 > no-common-words.
inline ErrorCategory categorize(const std::vector<ChunkSpan>& gold, const ChunkSpan& p) {
  bool b1 = false, b2 = false, b3 = false;
  for (const auto& g : gold) {
    if (g.start == p.start && g.end == p.end) return ErrorCategory::kType;
    const bool overlap = g.start <= p.end && p.start <= g.end;
    if (!overlap) continue;
    if (g.start <= p.start && p.end <= g.end)
      b1 = true;  // gold contains prediction
    else if (p.start <= g.start && g.end <= p.end)
      b2 = true;  // prediction contains gold
    else
      b3 = true;
  }
  if (b1) return ErrorCategory::kBoundary1;
  if (b2) return ErrorCategory::kBoundary2;
  if (b3) return ErrorCategory::kBoundary3;
  return ErrorCategory::kNoCommonWords;
}

// Gold entities split by length; a gold entity is an error unless some
// prediction matches it exactly.
struct LengthBuckets {
  std::size_t threshold = 2;
  std::size_t short_total = 0;
  std::size_t short_errors = 0;
  std::size_t long_total = 0;
  std::size_t long_errors = 0;

  double short_rate() const { return short_total ? double(short_errors) / short_total : 0.0; }
  double long_rate() const { return long_total ? double(long_errors) / long_total : 0.0; }

  LengthBuckets& operator+=(const LengthBuckets& o) {
    short_total += o.short_total;
    short_errors += o.short_errors;
    long_total += o.long_total;
    long_errors += o.long_errors;
    return *this;
  }
};

inline LengthBuckets length_buckets(const std::vector<ChunkSpan>& gold,
                                    const std::vector<ChunkSpan>& predicted,
                                    std::size_t threshold = 2) {
  if (threshold < 1) throw UsageError("length threshold must be at least 1");
  LengthBuckets b;
  b.threshold = threshold;
  for (const auto& g : gold) {
    const bool miss = !detail::contains(predicted, g);
    if (g.end - g.start + 1 <= threshold) {
      ++b.short_total;
      b.short_errors += miss;
    } else {
      ++b.long_total;
      b.long_errors += miss;
    }
  }
  return b;
}

struct ErrorReport {
  std::size_t type = 0;
  std::size_t boundary1 = 0;
  std::size_t boundary2 = 0;
  std::size_t boundary3 = 0;
  std::size_t no_common_words = 0;
  std::size_t total_predicted = 0;
  std::size_t total_errors = 0;
  LengthBuckets buckets;

  std::size_t count(ErrorCategory c) const {
    switch (c) {
      case ErrorCategory::kType: return type;
      case ErrorCategory::kBoundary1: return boundary1;
      case ErrorCategory::kBoundary2: return boundary2;
      case ErrorCategory::kBoundary3: return boundary3;
      case ErrorCategory::kNoCommonWords: return no_common_words;
    }
    return 0;
  }
  double rate(ErrorCategory c) const {
    return total_errors ? double(count(c)) / total_errors : 0.0;
  }

  ErrorReport& operator+=(const ErrorReport& o) {
    type += o.type;
    boundary1 += o.boundary1;
    boundary2 += o.boundary2;
    boundary3 += o.boundary3;
    no_common_words += o.no_common_words;
    total_predicted += o.total_predicted;
    total_errors += o.total_errors;
    buckets.threshold = o.buckets.threshold;
    buckets += o.buckets;
    return *this;
  }
};

inline ErrorReport classify_errors(const std::vector<ChunkSpan>& gold,
                                   const std::vector<ChunkSpan>& predicted) {
  ErrorReport r;
  r.total_predicted = predicted.size();
  for (const auto& p : predicted) {
    if (detail::contains(gold, p)) continue;
    ++r.total_errors;
    switch (categorize(gold, p)) {
      case ErrorCategory::kType: ++r.type; break;
      case ErrorCategory::kBoundary1: ++r.boundary1; break;
      case ErrorCategory::kBoundary2: ++r.boundary2; break;
      case ErrorCategory::kBoundary3: ++r.boundary3; break;
      case ErrorCategory::kNoCommonWords: ++r.no_common_words; break;
    }
  }
  return r;
}

// Corpus-level taxonomy plus length buckets.
inline ErrorReport analyze(const std::vector<TagSequence>& gold,
                           const std::vector<TagSequence>& predicted,
                           std::size_t threshold = 2) {
  if (gold.size() != predicted.size())
    throw DataError("gold and prediction differ in sentence count");
  ErrorReport total;
  total.buckets.threshold = threshold;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (gold[i].size() != predicted[i].size())
      throw DataError("length mismatch in sentence " + std::to_string(i + 1));
    const auto g = extract_chunks(gold[i]);
    const auto p = extract_chunks(predicted[i]);
    ErrorReport r = classify_errors(g, p);
    r.buckets = length_buckets(g, p, threshold);
    total += r;
  }
  return total;
}

}  // namespace moseq
