#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "moseq/corpus.hpp"
#include "moseq/error.hpp"
#include "moseq/io.hpp"
#include "moseq/labelspace.hpp"
#include "moseq/metrics.hpp"
#include "moseq/nn.hpp"
#include "moseq/parallel.hpp"

namespace moseq {

// Per-position log-probabilities of one order's labels, T rows x |labels|.
struct ScoreLattice {
  std::size_t order = 1;
  std::size_t length = 0;
  std::size_t labels = 0;
  std::vector<double> scores;  // row-major

  ScoreLattice() = default;
  ScoreLattice(std::size_t order_, std::size_t length_, std::size_t labels_)
      : order(order_), length(length_), labels(labels_), scores(length_ * labels_, 0.0) {}

  double at(std::size_t t, std::size_t id) const { return scores[t * labels + id]; }
  double& at(std::size_t t, std::size_t id) { return scores[t * labels + id]; }

  friend bool operator==(const ScoreLattice&, const ScoreLattice&) = default;
};

struct TrainConfig {
  std::size_t emb_dim = 50;
  std::size_t hidden_dim = 200;
  double dropout = 0.5;
  double learning_rate = 1e-3;
  std::size_t epochs = 30;
  std::uint64_t seed = 1;
};

struct TrainingInfo {
  std::uint64_t seed = 0;
  std::uint64_t epochs = 0;
  std::uint64_t best_epoch = 0;
  double best_dev_f1 = 0.0;
  std::uint64_t dataset_hash = 0;
};

struct EpochRecord {
  std::size_t order = 0;
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double dev_f1 = 0.0;
};

struct SingleOrderModel {
  std::size_t order = 1;
  LabelVocab labels{1};
  nn::TaggerParams params;
  TrainingInfo info;
};

struct ModelBundle {
  TokenVocab tokens;
  LabelVocab unigrams{1};  // training tag set, order 1
  std::vector<SingleOrderModel> models;

  std::size_t max_order() const { return models.empty() ? 0 : models.back().order; }

  const SingleOrderModel* find(std::size_t order) const {
    for (const auto& m : models)
      if (m.order == order) return &m;
    return nullptr;
  }

  void validate() const {
    if (models.empty()) throw ModelError("bundle has no models");
    for (std::size_t i = 0; i < models.size(); ++i) {
      const auto& m = models[i];
      if (i > 0 && m.order <= models[i - 1].order)
        throw ModelError("bundle orders must be strictly increasing");
      if (m.labels.order() != m.order)
        throw ModelError("label vocabulary order differs from model order");
      if (static_cast<std::size_t>(m.params.output.rows()) != m.labels.size())
        throw ModelError("output width differs from label count for order " +
                         std::to_string(m.order));
      if (static_cast<std::size_t>(m.params.token_embedding.rows()) != tokens.size() ||
          static_cast<std::size_t>(m.params.feature_embedding.rows()) != tokens.feature_count())
        throw ModelError("embedding tables do not match the token vocabulary");
    }
  }
};

// ---------------------------------------------------------------------------
// Inputs

inline nn::EncodedSentence encode_sentence(const TokenVocab& vocab, const Sentence& s) {
  nn::EncodedSentence e;
  e.tokens.reserve(s.size());
  e.features.reserve(s.size());
  for (std::size_t t = 0; t < s.size(); ++t) {
    e.tokens.push_back(vocab.id(s.tokens[t].surface));
    e.features.push_back(extract_features(vocab, s, t));
  }
  return e;
}

inline std::uint64_t dataset_hash(const std::vector<Sentence>& sentences) {
  std::uint64_t h = io::fnv1a("");
  for (const auto& s : sentences) {
    for (std::size_t t = 0; t < s.size(); ++t) {
      h = io::fnv1a(s.tokens[t].surface, h);
      h = io::fnv1a("\t", h);
      h = io::fnv1a(s.gold_tags[t], h);
      h = io::fnv1a("\n", h);
    }
    h = io::fnv1a("\n", h);
  }
  return h;
}

// ---------------------------------------------------------------------------
// Prediction

inline ScoreLattice make_lattice(const SingleOrderModel& model,
                                 const nn::EncodedSentence& input) {
  const nn::ForwardTrace tr = nn::forward(model.params, input, 0.0, nullptr);
  ScoreLattice lat(model.order, input.size(), model.labels.size());
  for (std::size_t t = 0; t < input.size(); ++t)
    for (std::size_t y = 0; y < lat.labels; ++y)
      lat.at(t, y) = tr.log_probs(static_cast<Eigen::Index>(y), static_cast<Eigen::Index>(t));
  return lat;
}

inline ScoreLattice make_lattice(const SingleOrderModel& model, const TokenVocab& vocab,
                                 const Sentence& sentence) {
  return make_lattice(model, encode_sentence(vocab, sentence));
}

// Per-position argmax label (lowest id on ties), projected to its final tag.
// Adjacent n-grams need not agree on their overlap.
inline TagSequence greedy_decode(const LabelVocab& labels, const ScoreLattice& lattice) {
  TagSequence out;
  out.reserve(lattice.length);
  for (std::size_t t = 0; t < lattice.length; ++t) {
    std::size_t best = 0;
    for (std::size_t y = 1; y < lattice.labels; ++y)
      if (lattice.at(t, y) > lattice.at(t, best)) best = y;
    out.push_back(last_component(labels.label(best)));
  }
  return out;
}

inline TagSequence greedy_decode(const SingleOrderModel& model, const TokenVocab& vocab,
                                 const Sentence& sentence) {
  return greedy_decode(model.labels, make_lattice(model, vocab, sentence));
}

// ---------------------------------------------------------------------------
// Training

using EpochCallback = std::function<void(const EpochRecord&)>;

inline std::uint64_t model_seed(std::uint64_t seed, std::size_t order) {
  // splitmix64 finalizer so each order gets an unrelated stream
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (order + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Trains one order-n tagger with per-sentence Adam updates. After every epoch
// the dev set is decoded greedily; the parameters of the best dev-F1 epoch
// are kept (earliest on ties). With an empty dev set the last epoch is kept.
inline SingleOrderModel train_single_order(const std::vector<Sentence>& train,
                                           const std::vector<Sentence>& dev,
                                           const TokenVocab& vocab, std::size_t order,
                                           const TrainConfig& config,
                                           const EpochCallback& on_epoch = {}) {
  if (train.empty()) throw DataError("empty training set");
  if (order < 1) throw UsageError("order must be at least 1");
  if (config.dropout < 0.0 || config.dropout >= 1.0)
    throw UsageError("dropout must be in [0, 1)");

  SingleOrderModel model;
  model.order = order;
  model.labels = build_label_vocab(train, order);
  model.info.seed = config.seed;
  model.info.epochs = config.epochs;
  model.info.dataset_hash = dataset_hash(train);

  std::vector<nn::EncodedSentence> inputs;
  std::vector<std::vector<std::uint32_t>> gold;
  for (const auto& s : train) {
    if (s.size() == 0) continue;
    inputs.push_back(encode_sentence(vocab, s));
    std::vector<std::uint32_t> ids;
    for (const auto& l : to_ngram(s.gold_tags, order)) ids.push_back(model.labels.id(l));
    gold.push_back(std::move(ids));
  }
  std::vector<nn::EncodedSentence> dev_inputs;
  for (const auto& s : dev) dev_inputs.push_back(encode_sentence(vocab, s));

  nn::Rng rng(model_seed(config.seed, order));
  nn::Dims dims{vocab.size(), vocab.feature_count(), config.emb_dim, config.hidden_dim,
                model.labels.size()};
  nn::TaggerParams params = nn::TaggerParams::initialize(dims, rng);
  nn::AdamState adam =
      nn::AdamState::for_params(params, nn::AdamConfig{config.learning_rate});

  std::vector<std::size_t> order_idx(inputs.size());
  for (std::size_t i = 0; i < order_idx.size(); ++i) order_idx[i] = i;

  model.params = params;
  double best = -1.0;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    for (std::size_t i = order_idx.size(); i > 1; --i)
      std::swap(order_idx[i - 1], order_idx[rng.below(i)]);
    double loss_sum = 0.0;
    for (std::size_t k : order_idx) {
      auto lg = nn::loss_and_gradients(params, inputs[k], gold[k], config.dropout, &rng);
      loss_sum += lg.loss;
      nn::adam_step(params, lg.grads, adam);
    }
    if (!params.all_finite())
      throw ModelError("non-finite parameters after epoch " + std::to_string(epoch));

    EpochRecord rec{order, epoch, loss_sum / static_cast<double>(inputs.size()), 0.0};
    if (!dev.empty()) {
      SingleOrderModel probe{order, model.labels, params, {}};
      std::vector<TagSequence> pred;
      pred.reserve(dev.size());
      for (const auto& e : dev_inputs)
        pred.push_back(greedy_decode(model.labels, make_lattice(probe, e)));
      rec.dev_f1 = f1(dev, pred).f1();
    }
    if (on_epoch) on_epoch(rec);
    if (dev.empty() || rec.dev_f1 > best) {
      best = rec.dev_f1;
      model.params = params;
      model.info.best_epoch = epoch;
      model.info.best_dev_f1 = rec.dev_f1;
    }
  }
  return model;
}

// Trains one model per order, independently. Orders must be strictly
// increasing. With parallel_orders the models train on separate threads;
// results are identical either way.
inline ModelBundle train_bundle(const std::vector<Sentence>& train,
                                const std::vector<Sentence>& dev, TokenVocab vocab,
                                const std::vector<std::size_t>& orders,
                                const TrainConfig& config, bool parallel_orders = false,
                                const EpochCallback& on_epoch = {}) {
  if (orders.empty()) throw UsageError("at least one order is required");
  for (std::size_t i = 0; i < orders.size(); ++i) {
    if (orders[i] < 1) throw UsageError("orders must be >= 1");
    if (i > 0 && orders[i] <= orders[i - 1])
      throw UsageError("orders must be strictly increasing");
  }
  ModelBundle bundle;
  bundle.tokens = std::move(vocab);
  bundle.unigrams = build_label_vocab(train, 1);
  bundle.models.resize(orders.size());
  std::mutex log_mu;
  EpochCallback locked = [&](const EpochRecord& r) {
    std::lock_guard lock(log_mu);
    if (on_epoch) on_epoch(r);
  };
  parallel_for(orders.size(), parallel_orders ? orders.size() : 1, [&](std::size_t i) {
    bundle.models[i] =
        train_single_order(train, dev, bundle.tokens, orders[i], config, locked);
  });
  bundle.validate();
  return bundle;
}

// One lattice per model, for every sentence; parallel across sentences.
inline std::vector<std::vector<ScoreLattice>> make_lattices(
    const ModelBundle& bundle, const std::vector<Sentence>& sentences,
    std::size_t threads = 1) {
  std::vector<std::vector<ScoreLattice>> out(sentences.size());
  parallel_for(sentences.size(), threads, [&](std::size_t i) {
    const auto input = encode_sentence(bundle.tokens, sentences[i]);
    for (const auto& m : bundle.models)
      out[i].push_back(make_lattice(m, input));
  });
  return out;
}

// ---------------------------------------------------------------------------
// Bundle files
//
// magic "MOSEQBND" | u32 version | u64 payload size | payload | u64 FNV-1a
// of payload. All integers and tensors little-endian.

inline constexpr std::string_view kBundleMagic = "MOSEQBND";
inline constexpr std::uint32_t kBundleVersion = 1;

inline std::string serialize_bundle(const ModelBundle& bundle) {
  bundle.validate();
  io::ByteWriter payload;
  bundle.tokens.serialize(payload);
  bundle.unigrams.serialize(payload);
  payload.u64(bundle.models.size());
  for (const auto& m : bundle.models) {
    payload.u64(m.order);
    m.labels.serialize(payload);
    m.params.serialize(payload);
    payload.u64(m.info.seed);
    payload.u64(m.info.epochs);
    payload.u64(m.info.best_epoch);
    payload.f64(m.info.best_dev_f1);
    payload.u64(m.info.dataset_hash);
  }
  io::ByteWriter file;
  file.bytes(kBundleMagic);
  file.u32(kBundleVersion);
  file.u64(payload.data().size());
  file.bytes(payload.data());
  file.u64(io::fnv1a(payload.data()));
  return file.take();
}

inline ModelBundle deserialize_bundle(std::string_view bytes) {
  io::ByteReader r(bytes);
  if (bytes.size() < kBundleMagic.size() + 4 ||
      bytes.substr(0, kBundleMagic.size()) != kBundleMagic)
    throw ModelError("not a model bundle: missing magic or format version");
  r.bytes(kBundleMagic.size());
  const auto version = r.u32();
  if (version != kBundleVersion)
    throw ModelError("unsupported bundle format version " + std::to_string(version) +
                     " (expected " + std::to_string(kBundleVersion) + ")");
  const auto size = r.u64();
  if (size > r.remaining()) throw ModelError("truncated bundle: payload incomplete");
  const auto payload = r.bytes(size);
  const auto checksum = r.u64();
  if (r.remaining() != 0) throw ModelError("trailing bytes after bundle checksum");
  if (checksum != io::fnv1a(payload)) throw ModelError("bundle checksum mismatch");

  io::ByteReader p(payload);
  ModelBundle b;
  b.tokens = TokenVocab::deserialize(p);
  b.unigrams = LabelVocab::deserialize(p);
  const auto n = p.u64();
  if (n > 64) throw ModelError("implausible model count in bundle");
  for (std::uint64_t i = 0; i < n; ++i) {
    SingleOrderModel m;
    m.order = p.u64();
    m.labels = LabelVocab::deserialize(p);
    m.params = nn::TaggerParams::deserialize(p);
    m.info.seed = p.u64();
    m.info.epochs = p.u64();
    m.info.best_epoch = p.u64();
    m.info.best_dev_f1 = p.f64();
    m.info.dataset_hash = p.u64();
    b.models.push_back(std::move(m));
  }
  if (p.remaining() != 0) throw ModelError("unexpected bytes at end of bundle payload");
  b.validate();
  return b;
}

// Writes through a temporary file and renames it into place.
inline void save_bundle(const ModelBundle& bundle, const std::filesystem::path& path) {
  const std::string bytes = serialize_bundle(bundle);
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw UsageError("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw UsageError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline ModelBundle load_bundle(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ModelError("cannot read bundle " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_bundle(bytes);
}

}  // namespace moseq
