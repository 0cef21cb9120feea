#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "moseq/corpus.hpp"
#include "moseq/error.hpp"
#include "moseq/io.hpp"

namespace moseq {

// Joins the components of an n-gram label. Never valid inside a tag.
inline constexpr char kLabelSeparator = '\x1f';
inline constexpr std::string_view kStartSymbol = "<START>";

inline std::string join_label(const std::vector<std::string>& components) {
  std::string out;
  for (std::size_t i = 0; i < components.size(); ++i) {
    if (i) out.push_back(kLabelSeparator);
    out += components[i];
  }
  return out;
}

inline std::vector<std::string> split_label(std::string_view label) {
  std::vector<std::string> parts;
  std::size_t begin = 0;
  for (std::size_t i = 0; i <= label.size(); ++i) {
    if (i == label.size() || label[i] == kLabelSeparator) {
      parts.emplace_back(label.substr(begin, i - begin));
      begin = i + 1;
    }
  }
  return parts;
}

// Projects an n-gram label onto its final (current-position) tag.
inline std::string last_component(std::string_view label) {
  if (label.empty()) throw DataError("malformed n-gram label: empty");
  const auto pos = label.rfind(kLabelSeparator);
  const auto last = pos == std::string_view::npos ? label : label.substr(pos + 1);
  if (last.empty() || last == kStartSymbol)
    throw DataError("malformed n-gram label: no final tag");
  return std::string(last);
}

// Bijection between order-n labels and dense ids, in first-occurrence order.
class LabelVocab {
 public:
  explicit LabelVocab(std::size_t order = 1) : order_(order) {
    if (order < 1) throw UsageError("label order must be at least 1");
  }

  std::size_t order() const { return order_; }
  std::size_t size() const { return labels_.size(); }
  const std::string& label(std::size_t id) const { return labels_.at(id); }
  const std::vector<std::string>& labels() const { return labels_; }

  std::optional<std::uint32_t> find(const std::string& label) const {
    auto it = ids_.find(label);
    if (it == ids_.end()) return std::nullopt;
    return it->second;
  }
  std::uint32_t id(const std::string& label) const {
    auto found = find(label);
    if (!found) throw DataError("label not in vocabulary: " + printable(label));
    return *found;
  }

  // Adds a label with exactly order() components; returns its id.
  std::uint32_t add(const std::string& label) {
    auto it = ids_.find(label);
    if (it != ids_.end()) return it->second;
    const auto parts = split_label(label);
    if (parts.size() != order_)
      throw DataError("label " + printable(label) + " has " +
                      std::to_string(parts.size()) + " components, expected " +
                      std::to_string(order_));
    for (const auto& p : parts)
      if (p.empty()) throw DataError("empty component in label " + printable(label));
    const auto id = static_cast<std::uint32_t>(labels_.size());
    ids_.emplace(label, id);
    labels_.push_back(label);
    return id;
  }

  // Human-readable form with '|' in place of the separator.
  static std::string printable(std::string_view label) {
    std::string s(label);
    for (auto& c : s)
      if (c == kLabelSeparator) c = '|';
    return s;
  }

  // One label per line, in id order.
  void dump(std::ostream& out) const {
    for (const auto& l : labels_) out << printable(l) << '\n';
  }

  void serialize(io::ByteWriter& w) const {
    w.u64(order_);
    w.u64(labels_.size());
    for (const auto& l : labels_) w.str(l);
  }
  static LabelVocab deserialize(io::ByteReader& r) {
    const auto order = r.u64();
    if (order < 1 || order > 16) throw ModelError("bad label order in model file");
    LabelVocab v(order);
    const auto n = r.u64();
    for (std::uint64_t i = 0; i < n; ++i) {
      try {
        v.add(r.str());
      } catch (const DataError& e) {
        throw ModelError(std::string("bad label vocabulary: ") + e.what());
      }
    }
    if (v.size() != n) throw ModelError("duplicate labels in model file");
    return v;
  }

  friend bool operator==(const LabelVocab& a, const LabelVocab& b) {
    return a.order_ == b.order_ && a.labels_ == b.labels_;
  }

 private:
  std::size_t order_;
  std::vector<std::string> labels_;
  std::unordered_map<std::string, std::uint32_t> ids_;
};

// labels[t] = (y[t-order+1], ..., y[t]) with START before the sentence.
inline std::vector<std::string> to_ngram(const std::vector<std::string>& tags,
                                         std::size_t order) {
  if (order < 1) throw UsageError("label order must be at least 1");
  std::vector<std::string> out;
  out.reserve(tags.size());
  std::vector<std::string> window(order);
  for (std::size_t t = 0; t < tags.size(); ++t) {
    for (std::size_t k = 0; k < order; ++k) {
      const auto src = static_cast<std::ptrdiff_t>(t) - static_cast<std::ptrdiff_t>(order - 1 - k);
      window[k] = src < 0 ? std::string(kStartSymbol) : tags[src];
    }
    out.push_back(join_label(window));
  }
  return out;
}

inline void validate_tag(const std::string& tag) {
  if (tag.empty()) throw DataError("empty tag");
  if (tag.find(kLabelSeparator) != std::string::npos)
    throw DataError("tag contains the reserved separator: " + LabelVocab::printable(tag));
  if (tag == kStartSymbol) throw DataError("tag collides with the START symbol");
}

// Every order-n label observed in training, START padding included.
inline LabelVocab build_label_vocab(const std::vector<Sentence>& sentences,
                                    std::size_t order) {
  if (order < 1) throw UsageError("label order must be at least 1");
  LabelVocab vocab(order);
  for (const auto& s : sentences) {
    for (const auto& tag : s.gold_tags) validate_tag(tag);
    for (const auto& l : to_ngram(s.gold_tags, order)) vocab.add(l);
  }
  return vocab;
}

}  // namespace moseq
