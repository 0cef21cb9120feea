#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "moseq/corpus.hpp"
#include "moseq/nn.hpp"

namespace moseq::synthetic {

// Chunked corpus drawn from a second-order tag process: each tag is sampled
// conditioned on the two previous tags (START-padded), then a word is emitted
// from a pool shared by B- and I- of the same type, or, with probability
// `noise`, from a pool shared by every tag.
struct Config {
  std::size_t types = 5;
  std::size_t words_per_type = 40;
  std::size_t shared_words = 60;
  double noise = 0.25;
  std::size_t min_length = 8;
  std::size_t max_length = 20;
  // Larger values make the transition tables more peaked.
  double sharpness = 2.0;
  std::uint64_t seed = 2024;
};

inline const std::vector<std::string>& type_names() {
  static const std::vector<std::string> names{"NP", "VP", "PP", "ADJP", "ADVP",
                                              "SBAR", "PRT", "CONJP", "INTJ", "LST"};
  return names;
}

class Generator {
 public:
  explicit Generator(Config config) : cfg_(config), rng_(config.seed) {
    if (cfg_.types < 1 || cfg_.types > type_names().size())
      throw UsageError("synthetic corpus supports 1 to 10 chunk types");
    tags_.push_back("O");
    for (std::size_t k = 0; k < cfg_.types; ++k) {
      tags_.push_back("B-" + type_names()[k]);
      tags_.push_back("I-" + type_names()[k]);
    }
    build_lexicon();
    build_transitions();
  }

  const std::vector<std::string>& tags() const { return tags_; }

  std::vector<Sentence> sample(std::size_t count) {
    std::vector<Sentence> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) out.push_back(sample_one());
    return out;
  }

  // P(next | prev2, prev1); index tags().size() denotes START.
  const std::vector<double>& transition(std::size_t prev2, std::size_t prev1) const {
    return table_.at({prev2, prev1});
  }

 private:
  std::size_t start() const { return tags_.size(); }
  static std::size_t type_of(std::size_t tag) { return (tag - 1) / 2; }
  static bool is_inside(std::size_t tag) { return tag > 0 && tag % 2 == 0; }
  static bool in_chunk(std::size_t tag) { return tag > 0; }

  std::string make_word(std::uint64_t index) {
    static const char* syll[] = {"ka", "ro", "mi", "tu", "se", "la", "po", "ne", "di", "fa",
                                 "gu", "ve", "zo", "bi", "ha", "ju"};
    std::string w;
    std::uint64_t x = index * 0x9e3779b97f4a7c15ull + cfg_.seed;
    const std::size_t n = 2 + (x >> 60) % 2;
    for (std::size_t i = 0; i < n; ++i) {
      x = x * 6364136223846793005ull + 1442695040888963407ull;
      w += syll[(x >> 59) & 15];
    }
    return w + std::to_string(index % 7);
  }

  void build_lexicon() {
    std::uint64_t next = 0;
    auto fresh = [&](std::size_t n) {
      std::vector<std::string> pool;
      for (std::size_t i = 0; i < n; ++i) pool.push_back(make_word(next++));
      return pool;
    };
    pools_.push_back(fresh(cfg_.words_per_type));  // O
    for (std::size_t k = 0; k < cfg_.types; ++k) pools_.push_back(fresh(cfg_.words_per_type));
    shared_ = fresh(cfg_.shared_words);
  }

  // Peaked random weights: uniform draws raised to `sharpness`.
  double weight() { return std::pow(rng_.uniform(), cfg_.sharpness * 2.0) + 1e-3; }

  void build_transitions() {
    const std::size_t n = tags_.size();
    std::vector<std::size_t> contexts;
    for (std::size_t i = 0; i <= n; ++i) contexts.push_back(i);
    for (std::size_t p2 : contexts) {
      for (std::size_t p1 : contexts) {
        if (p1 == start() && p2 != start()) continue;
        std::vector<double> w(n, 0.0);
        for (std::size_t y = 0; y < n; ++y) {
          // I-X continues a chunk of type X only.
          if (is_inside(y) && !(p1 != start() && in_chunk(p1) && type_of(p1) == type_of(y)))
            continue;
          w[y] = weight();
        }
        // Chunks of length two tend to stop, longer ones stop for sure.
        if (p1 != start() && is_inside(p1) && p2 != start() && in_chunk(p2) &&
            type_of(p2) == type_of(p1)) {
          const std::size_t cont = 2 * type_of(p1) + 2;
          w[cont] *= is_inside(p2) ? 0.0 : 0.5;
        }
        double z = 0.0;
        for (double v : w) z += v;
        for (double& v : w) v /= z;
        table_[{p2, p1}] = std::move(w);
      }
    }
  }

  std::size_t draw(const std::vector<double>& p) {
    double u = rng_.uniform();
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (u < p[i]) return i;
      u -= p[i];
    }
    for (std::size_t i = p.size(); i-- > 0;)
      if (p[i] > 0.0) return i;
    return 0;
  }

  Sentence sample_one() {
    const std::size_t len =
        cfg_.min_length + rng_.below(cfg_.max_length - cfg_.min_length + 1);
    Sentence s;
    std::size_t p2 = start(), p1 = start();
    for (std::size_t t = 0; t < len; ++t) {
      const std::size_t y = draw(table_.at({p2, p1}));
      const auto& pool = rng_.uniform() < cfg_.noise
                             ? shared_
                             : pools_[y == 0 ? 0 : type_of(y) + 1];
      s.tokens.push_back(Token{pool[rng_.below(pool.size())], {}});
      s.gold_tags.push_back(tags_[y]);
      p2 = p1;
      p1 = y;
    }
    return s;
  }

  Config cfg_;
  nn::Rng rng_;
  std::vector<std::string> tags_;
  std::vector<std::vector<std::string>> pools_;
  std::vector<std::string> shared_;
  std::map<std::pair<std::size_t, std::size_t>, std::vector<double>> table_;
};

struct Splits {
  std::vector<Sentence> train, dev, test;
};

inline Splits make_splits(const Config& config, std::size_t train, std::size_t dev,
                          std::size_t test) {
  Generator g(config);
  Splits s;
  s.train = g.sample(train);
  s.dev = g.sample(dev);
  s.test = g.sample(test);
  return s;
}

}  // namespace moseq::synthetic
