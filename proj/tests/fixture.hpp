#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "moseq/corpus.hpp"
#include "moseq/metrics.hpp"

namespace moseq::testing {

inline std::string data_path(const std::string& name) {
  return std::string(MOSEQ_TEST_DATA) + "/" + name;
}

struct Fixture {
  std::vector<TagSequence> gold, pred;
  // hand-traced per-sentence gold/predicted/correct counts
  std::vector<ChunkScore> expected;
};

inline Fixture load_conlleval_fixture() {
  Fixture f;
  std::ifstream in(data_path("conlleval_fixture.txt"));
  const auto gold = parse_conll(in, 0, 1);
  std::ifstream in2(data_path("conlleval_fixture.txt"));
  const auto pred = parse_conll(in2, 0, 2);
  for (const auto& s : gold) f.gold.push_back(s.gold_tags);
  for (const auto& s : pred) f.pred.push_back(s.gold_tags);
  std::ifstream ex(data_path("conlleval_fixture.expected"));
  std::string line;
  while (std::getline(ex, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    ChunkScore c;
    ls >> c.gold >> c.predicted >> c.correct;
    f.expected.push_back(c);
  }
  return f;
}

}  // namespace moseq::testing
