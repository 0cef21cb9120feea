#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "moseq/error.hpp"
#include "moseq/labelspace.hpp"
#include "moseq/tagger.hpp"

namespace moseq {

// Log-score charged for an n-gram that is absent from its order's vocabulary.
inline constexpr double kFloorScore = -1e4;

// Top-k pruning over order-1 scores; `width` unset means no pruning.
struct PruneConfig {
  std::optional<std::size_t> width;

  static PruneConfig off() { return {}; }
  static PruneConfig top(std::size_t w) {
    if (w < 1) throw UsageError("prune width must be at least 1");
    return {w};
  }
  bool enabled() const { return width.has_value(); }
};

// One order's lattice and the vocabulary its columns index.
struct OrderScores {
  const LabelVocab* labels = nullptr;
  const ScoreLattice* lattice = nullptr;
};

struct DecodeResult {
  std::vector<std::uint32_t> tags;  // unigram ids
  double score = 0.0;
  // Largest number of n-gram candidates scored at any one position.
  std::size_t max_candidates = 0;
};

// Per-position search space size: U^n unpruned, width^n pruned.
inline std::uint64_t search_space_size(std::size_t unigram_count, std::size_t max_order,
                                       PruneConfig prune = {}) {
  const std::uint64_t base =
      prune.enabled() ? std::min<std::uint64_t>(*prune.width, unigram_count) : unigram_count;
  std::uint64_t n = 1;
  for (std::size_t i = 0; i < max_order; ++i) n *= base;
  return n;
}

namespace detail {

// Maps n-gram codes (components in base U+1, START = U, most recent tag in
// the least significant digit) to label ids of one order's vocabulary.
class NgramIndex {
 public:
  static constexpr std::int64_t kAbsent = -1;
  static constexpr std::uint64_t kDenseLimit = 1u << 22;

  NgramIndex(const LabelVocab& unigrams, const LabelVocab& labels)
      : order_(labels.order()), size_(labels.size()) {
    const std::uint64_t base = unigrams.size() + 1;
    span_ = 1;
    for (std::size_t i = 0; i < order_; ++i) span_ *= base;
    dense_ = span_ <= kDenseLimit;
    if (dense_) table_.assign(span_, kAbsent);
    for (std::size_t id = 0; id < labels.size(); ++id) {
      std::uint64_t code = 0;
      bool ok = true;
      for (const auto& c : split_label(labels.label(id))) {
        std::uint64_t digit;
        if (c == kStartSymbol) {
          digit = unigrams.size();
        } else if (auto u = unigrams.find(c)) {
          digit = *u;
        } else {
          ok = false;  // tag unknown to the unigram set; never generated
          break;
        }
        code = code * base + digit;
      }
      if (!ok) continue;
      if (dense_)
        table_[code] = static_cast<std::int64_t>(id);
      else
        sparse_.emplace(code, static_cast<std::int64_t>(id));
    }
  }

  std::size_t order() const { return order_; }
  std::size_t size() const { return size_; }
  std::uint64_t span() const { return span_; }

  std::int64_t lookup(std::uint64_t code) const {
    if (dense_) return table_[code];
    auto it = sparse_.find(code);
    return it == sparse_.end() ? kAbsent : it->second;
  }

 private:
  std::size_t order_;
  std::size_t size_;
  std::uint64_t span_ = 1;
  bool dense_ = true;
  std::vector<std::int64_t> table_;
  std::unordered_map<std::uint64_t, std::int64_t> sparse_;
};

// Code tables for a fixed set of vocabularies. Building them parses every
// label, so they are made once per bundle and shared by all sentences.
struct NgramTables {
  std::size_t unigrams = 0;
  std::size_t max_order = 0;
  std::vector<std::size_t> orders;
  std::vector<NgramIndex> indices;
  std::optional<std::size_t> order1;  // position of the order-1 vocabulary
};

inline NgramTables make_tables(const LabelVocab& unigrams,
                               std::span<const LabelVocab* const> vocabs) {
  if (unigrams.order() != 1) throw DataError("unigram vocabulary must have order 1");
  if (vocabs.empty()) throw DataError("no lattices to decode");
  NgramTables tb;
  tb.unigrams = unigrams.size();
  if (tb.unigrams == 0) throw DataError("empty unigram tag set");
  for (std::size_t i = 0; i < vocabs.size(); ++i) {
    if (vocabs[i] == nullptr) throw DataError("missing vocabulary");
    const std::size_t n = vocabs[i]->order();
    if (i > 0 && n <= tb.orders.back()) throw DataError("orders must be strictly increasing");
    tb.orders.push_back(n);
    tb.indices.emplace_back(unigrams, *vocabs[i]);
    if (n == 1) tb.order1 = i;
  }
  tb.max_order = tb.orders.back();
  return tb;
}

// Tables bound to one sentence's lattices.
struct Scorer {
  const NgramTables* tables = nullptr;
  std::size_t length = 0;
  std::vector<const ScoreLattice*> lattices;
  const ScoreLattice* order1 = nullptr;

  // Sum over orders of the log-score of the suffix of `ngram` (an n-gram
  // code of max_order components) at position t.
  double transition(std::size_t t, std::uint64_t ngram) const {
    double s = 0.0;
    for (std::size_t i = 0; i < lattices.size(); ++i) {
      const auto& ix = tables->indices[i];
      const auto id = ix.lookup(ngram % ix.span());
      s += id == NgramIndex::kAbsent ? kFloorScore
                                     : lattices[i]->at(t, static_cast<std::size_t>(id));
    }
    return s;
  }
};

inline Scorer bind_lattices(const NgramTables& tb, std::span<const ScoreLattice* const> lats) {
  if (lats.size() != tb.indices.size())
    throw DataError("expected " + std::to_string(tb.indices.size()) + " lattices, got " +
                    std::to_string(lats.size()));
  Scorer sc;
  sc.tables = &tb;
  for (std::size_t i = 0; i < lats.size(); ++i) {
    const auto* lat = lats[i];
    if (lat == nullptr) throw DataError("missing lattice");
    if (i == 0) sc.length = lat->length;
    if (lat->length != sc.length)
      throw DataError("lattice lengths differ: " + std::to_string(lat->length) + " vs " +
                      std::to_string(sc.length));
    if (lat->order != tb.orders[i])
      throw DataError("lattice order differs from its vocabulary order");
    if (lat->labels != tb.indices[i].size())
      throw DataError("lattice width differs from vocabulary size");
    sc.lattices.push_back(lat);
  }
  if (tb.order1) sc.order1 = lats[*tb.order1];
  return sc;
}

inline std::uint64_t ipow(std::uint64_t b, std::size_t e) {
  std::uint64_t r = 1;
  while (e--) r *= b;
  return r;
}

inline std::vector<const LabelVocab*> vocabs_of(std::span<const OrderScores> orders) {
  std::vector<const LabelVocab*> v;
  for (const auto& o : orders) v.push_back(o.labels);
  return v;
}

inline std::vector<const ScoreLattice*> lattices_of(std::span<const OrderScores> orders) {
  std::vector<const ScoreLattice*> v;
  for (const auto& o : orders) v.push_back(o.lattice);
  return v;
}

}  // namespace detail

// Multi-order search over a fixed set of vocabularies.
//
// decode() is the exact argmax of the product-of-orders objective by dynamic
// programming over (n-1)-gram states. With pruning, the tags considered at
// every position are the `width` best by the order-1 lattice (lowest id on
// ties), so each position scores at most width^n candidate n-grams. Among
// equal-scoring sequences the lexicographically smallest (by tag id) wins.
//
// If `trace` is set, every chart entry is written as
//   t <TAB> state <TAB> score <TAB> backpointer-state
// with states rendered as '|'-joined tags.
class MultiOrderDecoder {
 public:
  MultiOrderDecoder(const LabelVocab& unigrams, std::span<const LabelVocab* const> vocabs)
      : unigrams_(&unigrams), tables_(detail::make_tables(unigrams, vocabs)) {}

  explicit MultiOrderDecoder(const ModelBundle& bundle)
      : MultiOrderDecoder(bundle.unigrams, bundle_vocabs(bundle)) {}

  const detail::NgramTables& tables() const { return tables_; }

  double score(std::span<const ScoreLattice* const> lattices,
               std::span<const std::uint32_t> tags) const;

  DecodeResult decode(std::span<const ScoreLattice* const> lattices,
                      PruneConfig prune = PruneConfig::top(5),
                      std::ostream* trace = nullptr) const;

  DecodeResult brute_force(std::span<const ScoreLattice* const> lattices) const;

  DecodeResult decode(const std::vector<ScoreLattice>& lattices, PruneConfig prune,
                      std::ostream* trace = nullptr) const {
    std::vector<const ScoreLattice*> ptrs;
    for (const auto& l : lattices) ptrs.push_back(&l);
    return decode(ptrs, prune, trace);
  }

 private:
  static std::vector<const LabelVocab*> bundle_vocabs(const ModelBundle& b) {
    std::vector<const LabelVocab*> v;
    for (const auto& m : b.models) v.push_back(&m.labels);
    return v;
  }

  void write_trace(std::ostream& out, std::size_t T, std::uint64_t init,
                   const std::vector<std::vector<std::uint64_t>>& active,
                   const std::vector<double>& score, const std::vector<std::uint64_t>& back,
                   std::uint64_t n_states) const;

  const LabelVocab* unigrams_;
  detail::NgramTables tables_;
};

// Sum over positions and orders of looked-up log-scores (floor for unseen
// n-grams). Accumulates position by position, in the decoder's order.
inline double MultiOrderDecoder::score(std::span<const ScoreLattice* const> lattices,
                                       std::span<const std::uint32_t> tags) const {
  const auto sc = detail::bind_lattices(tables_, lattices);
  if (tags.size() != sc.length)
    throw DataError("sequence length " + std::to_string(tags.size()) +
                    " differs from lattice length " + std::to_string(sc.length));
  const std::uint64_t base = tables_.unigrams + 1;
  const std::uint64_t start = tables_.unigrams;
  const std::uint64_t span = detail::ipow(base, tables_.max_order);
  std::uint64_t window = 0;
  for (std::size_t k = 0; k < tables_.max_order; ++k) window = window * base + start;
  double total = 0.0;
  for (std::size_t t = 0; t < tags.size(); ++t) {
    if (tags[t] >= tables_.unigrams) throw DataError("tag id out of range");
    window = (window * base + tags[t]) % span;
    total += sc.transition(t, window);
  }
  return total;
}

inline DecodeResult MultiOrderDecoder::decode(std::span<const ScoreLattice* const> lattices,
                                              PruneConfig prune, std::ostream* trace) const {
  const auto sc = detail::bind_lattices(tables_, lattices);
  if (prune.enabled() && sc.order1 == nullptr)
    throw DataError("pruning requires an order-1 lattice");
  if (prune.enabled() && *prune.width < 1) throw UsageError("prune width must be at least 1");

  DecodeResult result;
  const std::size_t T = sc.length;
  if (T == 0) return result;
  const std::size_t U = tables_.unigrams;
  const std::uint64_t base = U + 1;
  const std::size_t n = tables_.max_order;
  const std::uint64_t n_states = detail::ipow(base, n - 1);
  constexpr double kNone = -std::numeric_limits<double>::infinity();

  std::uint64_t init = 0;
  for (std::size_t k = 0; k + 1 < n; ++k) init = init * base + U;

  // Chart, flattened (t, state): score, backpointer, last tag. Active states
  // per t are kept sorted.
  std::vector<double> score(T * n_states, kNone);
  std::vector<std::uint64_t> back(T * n_states, 0);
  std::vector<std::uint32_t> choice(T * n_states, 0);
  std::vector<std::vector<std::uint64_t>> active(T);
  const std::vector<std::uint64_t> first{init};

  std::vector<std::uint32_t> candidates(U);
  for (std::uint32_t y = 0; y < U; ++y) candidates[y] = y;
  std::vector<std::uint32_t> ranked(U);

  // Tags of the best path ending in `state` at t, oldest first.
  auto path_to = [&](std::size_t t, std::uint64_t state, std::vector<std::uint32_t>& out) {
    out.assign(t + 1, 0);
    for (std::size_t s = t + 1; s-- > 0;) {
      out[s] = choice[s * n_states + state];
      state = back[s * n_states + state];
    }
  };
  std::vector<std::uint32_t> path_a, path_b;
  // Compares two prefixes ending at t-1; both extend with the same tag.
  auto lex_less = [&](std::size_t t, std::uint64_t prev_a, std::uint64_t prev_b) {
    path_to(t - 1, prev_a, path_a);
    path_to(t - 1, prev_b, path_b);
    return path_a < path_b;
  };

  for (std::size_t t = 0; t < T; ++t) {
    if (prune.enabled()) {
      for (std::uint32_t y = 0; y < U; ++y) ranked[y] = y;
      const std::size_t w = std::min<std::size_t>(*prune.width, U);
      std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(w),
                        ranked.end(), [&](std::uint32_t a, std::uint32_t b) {
                          const double sa = sc.order1->at(t, a), sb = sc.order1->at(t, b);
                          return sa > sb || (sa == sb && a < b);
                        });
      candidates.assign(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(w));
      std::sort(candidates.begin(), candidates.end());
    }
    const auto& prev_states = t == 0 ? first : active[t - 1];
    double* row = score.data() + t * n_states;
    const double* prev_row = t == 0 ? nullptr : score.data() + (t - 1) * n_states;
    std::size_t scored = 0;
    for (std::uint64_t d : prev_states) {
      const double base_score = t == 0 ? 0.0 : prev_row[d];
      for (std::uint32_t y : candidates) {
        const std::uint64_t ngram = d * base + y;
        const std::uint64_t next = n == 1 ? 0 : ngram % n_states;
        const double s = base_score + sc.transition(t, ngram);
        ++scored;
        double& cur = row[next];
        const std::size_t cell = t * n_states + next;
        if (cur == kNone) {
          active[t].push_back(next);
          cur = s;
          back[cell] = d;
          choice[cell] = y;
        } else if (s > cur || (s == cur && t > 0 && lex_less(t, d, back[cell]))) {
          cur = s;
          back[cell] = d;
          choice[cell] = y;
        }
      }
    }
    result.max_candidates = std::max(result.max_candidates, scored);
    std::sort(active[t].begin(), active[t].end());
  }

  // Best final state; ties resolved lexicographically over the full path.
  const double* last = score.data() + (T - 1) * n_states;
  std::uint64_t best = active[T - 1].front();
  for (std::uint64_t s : active[T - 1]) {
    if (last[s] > last[best]) {
      best = s;
    } else if (s != best && last[s] == last[best]) {
      path_to(T - 1, s, path_a);
      path_to(T - 1, best, path_b);
      if (path_a < path_b) best = s;
    }
  }
  result.score = last[best];
  path_to(T - 1, best, result.tags);

  if (trace != nullptr) write_trace(*trace, T, init, active, score, back, n_states);
  return result;
}

inline void MultiOrderDecoder::write_trace(std::ostream& out, std::size_t T, std::uint64_t init,
                                           const std::vector<std::vector<std::uint64_t>>& active,
                                           const std::vector<double>& score,
                                           const std::vector<std::uint64_t>& back,
                                           std::uint64_t n_states) const {
  const std::size_t U = tables_.unigrams;
  const std::uint64_t base = U + 1;
  const std::size_t n = tables_.max_order;
  auto render = [&](std::uint64_t state) {
    std::vector<std::string> parts;
    for (std::size_t k = 0; k + 1 < n; ++k) {
      const auto digit = state % base;
      parts.push_back(digit == U ? std::string(kStartSymbol) : unigrams_->label(digit));
      state /= base;
    }
    std::string s;
    for (auto it = parts.rbegin(); it != parts.rend(); ++it) {
      if (!s.empty()) s.push_back('|');
      s += *it;
    }
    return s.empty() ? std::string("-") : s;
  };
  for (std::size_t t = 0; t < T; ++t)
    for (std::uint64_t s : active[t])
      out << t << '\t' << render(s) << '\t' << score[t * n_states + s] << '\t'
          << render(t == 0 ? init : back[t * n_states + s]) << '\n';
}

// Exhaustive search over all U^T sequences, enumerated in lexicographic
// order; the first maximum wins. Refuses more than 10^6 sequences.
inline constexpr std::uint64_t kBruteForceLimit = 1000000;

inline DecodeResult MultiOrderDecoder::brute_force(
    std::span<const ScoreLattice* const> lattices) const {
  const auto sc = detail::bind_lattices(tables_, lattices);
  const std::size_t T = sc.length;
  const std::size_t U = tables_.unigrams;
  std::uint64_t total = 1;
  for (std::size_t t = 0; t < T; ++t) {
    total *= U;
    if (total > kBruteForceLimit)
      throw UsageError("brute-force enumeration exceeds " + std::to_string(kBruteForceLimit) +
                       " sequences");
  }
  DecodeResult best;
  if (T == 0) return best;
  std::vector<std::uint32_t> seq(T, 0);
  bool first = true;
  for (std::uint64_t k = 0; k < total; ++k) {
    const double s = score(lattices, seq);
    if (first || s > best.score) {
      best.score = s;
      best.tags = seq;
      first = false;
    }
    for (std::size_t t = T; t-- > 0;) {  // odometer, last position fastest
      if (++seq[t] < U) break;
      seq[t] = 0;
    }
  }
  best.max_candidates = search_space_size(U, tables_.max_order);
  return best;
}

// ---------------------------------------------------------------------------
// One-shot wrappers that build the tables per call.

inline double score_sequence(const LabelVocab& unigrams, std::span<const OrderScores> orders,
                             std::span<const std::uint32_t> tags) {
  const auto vocabs = detail::vocabs_of(orders);
  return MultiOrderDecoder(unigrams, vocabs).score(detail::lattices_of(orders), tags);
}

inline std::vector<std::uint32_t> tag_ids(const LabelVocab& unigrams, const TagSequence& tags) {
  std::vector<std::uint32_t> ids;
  ids.reserve(tags.size());
  for (const auto& t : tags) {
    auto id = unigrams.find(t);
    if (!id) throw DataError("unknown tag: " + t);
    ids.push_back(*id);
  }
  return ids;
}

inline TagSequence tag_strings(const LabelVocab& unigrams, std::span<const std::uint32_t> ids) {
  TagSequence out;
  out.reserve(ids.size());
  for (auto id : ids) out.push_back(unigrams.label(id));
  return out;
}

inline double score_sequence(const LabelVocab& unigrams, std::span<const OrderScores> orders,
                             const TagSequence& tags) {
  const auto ids = tag_ids(unigrams, tags);
  return score_sequence(unigrams, orders, ids);
}

inline DecodeResult multi_order_decode(const LabelVocab& unigrams,
                                       std::span<const OrderScores> orders,
                                       PruneConfig prune = PruneConfig::top(5),
                                       std::ostream* trace = nullptr) {
  const auto vocabs = detail::vocabs_of(orders);
  return MultiOrderDecoder(unigrams, vocabs).decode(detail::lattices_of(orders), prune, trace);
}

inline DecodeResult brute_force_decode(const LabelVocab& unigrams,
                                       std::span<const OrderScores> orders) {
  const auto vocabs = detail::vocabs_of(orders);
  return MultiOrderDecoder(unigrams, vocabs).brute_force(detail::lattices_of(orders));
}

// Decodes one sentence of a bundle from its per-model lattices.
inline TagSequence decode_sentence(const MultiOrderDecoder& decoder, const ModelBundle& bundle,
                                   const std::vector<ScoreLattice>& lattices,
                                   PruneConfig prune) {
  return tag_strings(bundle.unigrams, decoder.decode(lattices, prune).tags);
}

inline TagSequence decode_sentence(const ModelBundle& bundle,
                                   const std::vector<ScoreLattice>& lattices,
                                   PruneConfig prune) {
  return decode_sentence(MultiOrderDecoder(bundle), bundle, lattices, prune);
}

}  // namespace moseq
