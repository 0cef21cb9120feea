#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "moseq/chunk.hpp"
#include "moseq/error.hpp"
#include "moseq/tagger.hpp"

namespace moseq {

struct RunConfig {
  std::string train_path;
  std::string dev_path;
  std::string test_path;
  std::size_t token_column = 0;
  std::size_t tag_column = 2;  // CoNLL-2000; CoNLL-2003 uses 3
  TagScheme scheme = TagScheme::kBIO;
  std::vector<std::size_t> orders{1, 2, 3};
  TrainConfig train;
  std::size_t min_count = 1;
  std::optional<std::size_t> prune_width = 5;
  std::size_t threads = 1;
  bool parallel_orders = false;

  void validate() const {
    if (orders.empty()) throw UsageError("orders must not be empty");
    for (std::size_t i = 0; i < orders.size(); ++i) {
      if (orders[i] < 1) throw UsageError("orders must be >= 1");
      if (i > 0 && orders[i] <= orders[i - 1])
        throw UsageError("orders must be strictly increasing");
    }
    if (train.emb_dim < 1 || train.hidden_dim < 1)
      throw UsageError("embedding and hidden sizes must be positive");
    if (!(train.dropout >= 0.0 && train.dropout < 1.0))
      throw UsageError("dropout must be in [0, 1)");
    if (!(train.learning_rate > 0.0)) throw UsageError("learning rate must be positive");
    if (min_count < 1) throw UsageError("min_count must be >= 1");
    if (prune_width && *prune_width < 1) throw UsageError("prune width must be >= 1");
    if (threads < 1) throw UsageError("threads must be >= 1");
  }
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <typename T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  const auto* end = v.data() + v.size();
  auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end)
    throw UsageError("invalid value for " + key + ": '" + v + "'");
  return out;
}

inline double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw UsageError("invalid value for " + key + ": '" + v + "'");
  }
}

inline std::vector<std::size_t> parse_list(const std::string& key, const std::string& v) {
  std::vector<std::size_t> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ','))
    out.push_back(parse_number<std::size_t>(key, trim(item)));
  return out;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true" || v == "on" || v == "yes") return true;
  if (v == "0" || v == "false" || v == "off" || v == "no") return false;
  throw UsageError("invalid boolean for " + key + ": '" + v + "'");
}

}  // namespace detail

inline TagScheme parse_scheme(const std::string& v) {
  if (v == "bio" || v == "BIO" || v == "iob2" || v == "IOB2") return TagScheme::kBIO;
  if (v == "iob1" || v == "IOB1" || v == "iob" || v == "IOB") return TagScheme::kIOB1;
  if (v == "iobes" || v == "IOBES" || v == "bioes" || v == "BIOES") return TagScheme::kIOBES;
  throw UsageError("unknown tag scheme: " + v);
}

// "token,tag" column indices, e.g. "0,2".
inline std::pair<std::size_t, std::size_t> parse_columns(const std::string& v) {
  const auto cols = detail::parse_list("columns", v);
  if (cols.size() != 2) throw UsageError("columns must be 'token,tag', got '" + v + "'");
  return {cols[0], cols[1]};
}

// Applies one setting. Keys match the long CLI flags with '-' or '_'.
inline void apply_setting(RunConfig& c, std::string key, const std::string& value) {
  for (auto& ch : key)
    if (ch == '-') ch = '_';
  using detail::parse_number;
  if (key == "train") c.train_path = value;
  else if (key == "dev") c.dev_path = value;
  else if (key == "test") c.test_path = value;
  else if (key == "columns") std::tie(c.token_column, c.tag_column) = parse_columns(value);
  else if (key == "token_column") c.token_column = parse_number<std::size_t>(key, value);
  else if (key == "tag_column") c.tag_column = parse_number<std::size_t>(key, value);
  else if (key == "scheme") c.scheme = parse_scheme(value);
  else if (key == "orders") c.orders = detail::parse_list(key, value);
  else if (key == "emb_dim") c.train.emb_dim = parse_number<std::size_t>(key, value);
  else if (key == "hidden_dim") c.train.hidden_dim = parse_number<std::size_t>(key, value);
  else if (key == "dropout") c.train.dropout = detail::parse_double(key, value);
  else if (key == "learning_rate" || key == "lr") c.train.learning_rate = detail::parse_double(key, value);
  else if (key == "epochs") c.train.epochs = parse_number<std::size_t>(key, value);
  else if (key == "seed") c.train.seed = parse_number<std::uint64_t>(key, value);
  else if (key == "min_count") c.min_count = parse_number<std::size_t>(key, value);
  else if (key == "prune_width") c.prune_width = parse_number<std::size_t>(key, value);
  else if (key == "prune") {
    if (!detail::parse_bool(key, value)) c.prune_width.reset();
    else if (!c.prune_width) c.prune_width = 5;
  }
  else if (key == "threads") c.threads = parse_number<std::size_t>(key, value);
  else if (key == "parallel_orders") c.parallel_orders = detail::parse_bool(key, value);
  else throw UsageError("unknown configuration key: " + key);
}

// Flat "key = value" lines; '#' starts a comment.
inline void apply_config_text(RunConfig& c, std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto trimmed = detail::trim(line);
    if (trimmed.empty()) continue;
    const auto eq = trimmed.find('=');
    if (eq == std::string::npos)
      throw UsageError("config line " + std::to_string(line_no) + ": expected key = value");
    apply_setting(c, detail::trim(std::string_view(trimmed).substr(0, eq)),
                  detail::trim(std::string_view(trimmed).substr(eq + 1)));
  }
}

inline void apply_config_file(RunConfig& c, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  apply_config_text(c, ss.str());
}

}  // namespace moseq
