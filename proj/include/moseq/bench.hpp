#pragma once

#include <chrono>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "moseq/decoder.hpp"
#include "moseq/metrics.hpp"
#include "moseq/tagger.hpp"

namespace moseq {

struct TimingResult {
  std::string variant;
  PruneConfig prune;
  double seconds = 0.0;
  double f1 = 0.0;
  // Every prediction equals the unpruned one (true when no unpruned run).
  bool matches_unpruned = true;
  std::vector<TagSequence> predictions;
};

inline std::string prune_label(PruneConfig p) {
  return p.enabled() ? "top-" + std::to_string(*p.width) : "unpruned";
}

// Decodes every sentence once per prune configuration on the calling thread
// and records wall time and chunk F1. Lattices and code tables are computed
// up front and shared by all configurations, so the timings cover the search
// only.
inline std::vector<TimingResult> bench_decode(const ModelBundle& bundle,
                                              const std::vector<Sentence>& sentences,
                                              const std::vector<PruneConfig>& configs,
                                              std::size_t lattice_threads = 1) {
  if (sentences.empty()) throw DataError("benchmark needs at least one sentence");
  const auto lattices = make_lattices(bundle, sentences, lattice_threads);
  const MultiOrderDecoder decoder(bundle);
  std::vector<TimingResult> out;
  std::optional<std::size_t> reference;
  for (const auto& cfg : configs) {
    TimingResult r;
    r.variant = prune_label(cfg);
    r.prune = cfg;
    r.predictions.reserve(sentences.size());
    const auto t0 = std::chrono::steady_clock::now();
    for (std::size_t i = 0; i < sentences.size(); ++i)
      r.predictions.push_back(decode_sentence(decoder, bundle, lattices[i], cfg));
    const auto t1 = std::chrono::steady_clock::now();
    r.seconds = std::max(1e-9, std::chrono::duration<double>(t1 - t0).count());
    r.f1 = f1(sentences, r.predictions).f1();
    if (!cfg.enabled() && !reference) reference = out.size();
    out.push_back(std::move(r));
  }
  if (reference) {
    const auto ref = out[*reference].predictions;
    for (auto& r : out) r.matches_unpruned = r.predictions == ref;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Reports: "key: value" text and comma-separated tables with a header row.

inline std::string fixed(double v, int digits = 2) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

inline void write_score_text(std::ostream& out, const ChunkScore& s) {
  out << "gold_chunks: " << s.gold << '\n'
      << "predicted_chunks: " << s.predicted << '\n'
      << "correct_chunks: " << s.correct << '\n'
      << "precision: " << fixed(s.precision()) << '\n'
      << "recall: " << fixed(s.recall()) << '\n'
      << "f1: " << fixed(s.f1()) << '\n';
}

inline void write_score_csv(std::ostream& out, const ChunkScore& s) {
  out << "gold_chunks,predicted_chunks,correct_chunks,precision,recall,f1\n"
      << s.gold << ',' << s.predicted << ',' << s.correct << ',' << fixed(s.precision(), 4)
      << ',' << fixed(s.recall(), 4) << ',' << fixed(s.f1(), 4) << '\n';
}

inline constexpr ErrorCategory kCategories[] = {
    ErrorCategory::kBoundary1, ErrorCategory::kBoundary2, ErrorCategory::kBoundary3,
    ErrorCategory::kType, ErrorCategory::kNoCommonWords};

inline void write_errors_text(std::ostream& out, const ErrorReport& r) {
  out << "predicted_entities: " << r.total_predicted << '\n'
      << "error_entities: " << r.total_errors << '\n';
  for (auto c : kCategories)
    out << category_name(c) << ": " << r.count(c) << " (" << fixed(100.0 * r.rate(c)) << "%)\n";
  const auto& b = r.buckets;
  out << "length_threshold: " << b.threshold << '\n'
      << "short_entities: " << b.short_total << '\n'
      << "short_error_rate: " << fixed(100.0 * b.short_rate()) << "%\n"
      << "long_entities: " << b.long_total << '\n'
      << "long_error_rate: " << fixed(100.0 * b.long_rate()) << "%\n";
}

inline void write_errors_csv(std::ostream& out, const ErrorReport& r) {
  out << "category,count,share\n";
  for (auto c : kCategories)
    out << category_name(c) << ',' << r.count(c) << ',' << fixed(r.rate(c), 6) << '\n';
  out << "bucket,entities,errors,error_rate\n";
  const auto& b = r.buckets;
  out << "len<=" << b.threshold << ',' << b.short_total << ',' << b.short_errors << ','
      << fixed(b.short_rate(), 6) << '\n'
      << "len>" << b.threshold << ',' << b.long_total << ',' << b.long_errors << ','
      << fixed(b.long_rate(), 6) << '\n';
}

inline void write_timings_text(std::ostream& out, const std::vector<TimingResult>& rows) {
  for (const auto& r : rows)
    out << r.variant << ": seconds=" << fixed(r.seconds, 4) << " f1=" << fixed(r.f1)
        << " matches_unpruned=" << (r.matches_unpruned ? "yes" : "no") << '\n';
}

inline void write_timings_csv(std::ostream& out, const std::vector<TimingResult>& rows) {
  out << "variant,seconds,f1,matches_unpruned\n";
  for (const auto& r : rows)
    out << r.variant << ',' << fixed(r.seconds, 6) << ',' << fixed(r.f1, 4) << ','
        << (r.matches_unpruned ? 1 : 0) << '\n';
}

}  // namespace moseq
