// moseq: train multi-order taggers, decode, evaluate, analyze errors and
// benchmark pruned decoding.
//
// Exit codes: 0 success, 2 usage error, 3 data error, 4 model/format error.

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "moseq/moseq.hpp"

namespace {

using namespace moseq;

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitModel = 4;

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("moseq");
  logger->set_pattern("[%l] %v");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::info);
  if (const char* env = std::getenv("MOSEQ_LOG")) {
    const auto level = spdlog::level::from_str(env);
    // from_str maps unknown names to "off"; only honor real matches
    if (level != spdlog::level::off || std::string(env) == "off") spdlog::set_level(level);
  }
}

// Options shared by subcommands. Each value is applied on top of the config
// file only when given on the command line.
struct Overrides {
  std::string config_path;
  std::map<std::string, std::string> values;
  std::vector<std::pair<std::string, CLI::Option*>> options;
  bool prune_off = false;
  CLI::Option* prune_off_opt = nullptr;
  bool parallel_orders = false;

  void add(CLI::App* app, const std::string& key, const std::string& help) {
    std::string flag = "--" + key;
    for (auto& c : flag)
      if (c == '_') c = '-';
    options.emplace_back(key, app->add_option(flag, values[key], help));
  }

  RunConfig resolve() const {
    RunConfig c;
    if (!config_path.empty()) apply_config_file(c, config_path);
    for (const auto& [key, opt] : options)
      if (opt->count() > 0) apply_setting(c, key, values.at(key));
    if (prune_off_opt != nullptr && prune_off_opt->count() > 0) {
      if (prune_off) c.prune_width.reset();
    }
    if (parallel_orders) c.parallel_orders = true;
    c.validate();
    return c;
  }
};

void add_common(CLI::App* app, Overrides& o) {
  app->add_option("--config", o.config_path, "Flat key = value configuration file");
  o.add(app, "columns", "Token and tag column indices, e.g. 0,2");
  o.add(app, "scheme", "Tag scheme of the input: bio, iob1 or iobes");
  o.add(app, "threads", "Worker threads for per-sentence work");
}

std::vector<Sentence> read_conll(const std::string& path, std::size_t token_col,
                                 std::size_t tag_col) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read data file " + path);
  try {
    return parse_conll(in, token_col, tag_col);
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

std::vector<Sentence> read_tagged(const std::string& path, const RunConfig& c) {
  return normalize_to_bio(read_conll(path, c.token_column, c.tag_column), c.scheme);
}

// Tags taken from the final column of every line.
std::vector<TagSequence> read_last_column(const std::string& path, TagScheme scheme) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read prediction file " + path);
  std::vector<TagSequence> out;
  TagSequence cur;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string col, last;
    while (ls >> col) last = col;
    if (last.empty()) {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
      continue;
    }
    if (last == "-DOCSTART-" || line.rfind("-DOCSTART-", 0) == 0) continue;
    cur.push_back(last);
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  for (auto& tags : out) tags = spans_to_bio(chunks_for_scheme(tags, scheme), tags.size());
  return out;
}

void check_aligned(const std::vector<TagSequence>& gold, const std::vector<TagSequence>& pred) {
  const std::size_t n = std::min(gold.size(), pred.size());
  for (std::size_t i = 0; i < n; ++i)
    if (gold[i].size() != pred[i].size())
      throw DataError("files are misaligned at sentence " + std::to_string(i + 1) + ": gold " +
                      std::to_string(gold[i].size()) + " tokens, prediction " +
                      std::to_string(pred[i].size()));
  if (gold.size() != pred.size())
    throw DataError("files are misaligned at sentence " + std::to_string(n + 1) + ": gold has " +
                    std::to_string(gold.size()) + " sentences, prediction has " +
                    std::to_string(pred.size()));
}

std::vector<TagSequence> gold_of(const std::vector<Sentence>& s) {
  std::vector<TagSequence> g;
  for (const auto& x : s) g.push_back(x.gold_tags);
  return g;
}

template <typename Fn>
void write_file(const std::string& path, Fn&& fn) {
  std::ofstream out(path);
  if (!out) throw UsageError("cannot write " + path);
  fn(out);
}

// ---------------------------------------------------------------------------

int cmd_train(const Overrides& o, const std::string& out_path) {
  RunConfig c = o.resolve();
  if (c.train_path.empty()) throw UsageError("train requires --train or 'train' in --config");
  if (out_path.empty()) throw UsageError("train requires --out");

  const auto train = read_tagged(c.train_path, c);
  const auto dev = c.dev_path.empty() ? std::vector<Sentence>{} : read_tagged(c.dev_path, c);
  if (train.empty()) throw DataError("training file has no sentences: " + c.train_path);
  for (std::size_t order : c.orders) (void)build_label_vocab(train, order);

  auto vocab = build_token_vocab(train, c.min_count);
  std::string orders;
  for (auto k : c.orders) orders += (orders.empty() ? "" : ",") + std::to_string(k);
  spdlog::info("training orders {} on {} sentences ({} tokens in vocab, {} features)", orders,
               train.size(), vocab.size(), vocab.feature_count());

  std::vector<EpochRecord> epochs;
  auto bundle = train_bundle(train, dev, std::move(vocab), c.orders, c.train, c.parallel_orders,
                             [&](const EpochRecord& r) {
                               spdlog::info("order {} epoch {} loss {:.6f} dev_f1 {:.2f}",
                                            r.order, r.epoch, r.train_loss, r.dev_f1);
                               epochs.push_back(r);
                             });
  // parallel orders report in arrival order; the log is kept in a fixed one
  std::sort(epochs.begin(), epochs.end(), [](const EpochRecord& a, const EpochRecord& b) {
    return std::tie(a.order, a.epoch) < std::tie(b.order, b.epoch);
  });
  std::ostringstream log;
  for (const auto& r : epochs)
    log << "order=" << r.order << " epoch=" << r.epoch << " loss=" << fixed(r.train_loss, 6)
        << " dev_f1=" << fixed(r.dev_f1) << '\n';
  for (const auto& m : bundle.models) {
    spdlog::info("order {}: {} labels, best epoch {} (dev F1 {:.2f})", m.order, m.labels.size(),
                 m.info.best_epoch, m.info.best_dev_f1);
    log << "order=" << m.order << " labels=" << m.labels.size()
        << " best_epoch=" << m.info.best_epoch << " best_dev_f1=" << fixed(m.info.best_dev_f1)
        << '\n';
  }
  if (!c.test_path.empty()) {
    const auto test = read_tagged(c.test_path, c);
    const auto lattices = make_lattices(bundle, test, c.threads);
    const MultiOrderDecoder decoder(bundle);
    const PruneConfig prune = c.prune_width && bundle.find(1) != nullptr
                                  ? PruneConfig::top(*c.prune_width)
                                  : PruneConfig::off();
    std::vector<TagSequence> pred(test.size());
    parallel_for(test.size(), c.threads, [&](std::size_t i) {
      pred[i] = decode_sentence(decoder, bundle, lattices[i], prune);
    });
    const double score = f1(test, pred).f1();
    spdlog::info("test F1 {:.2f} ({})", score, prune_label(prune));
    log << "test_f1=" << fixed(score) << " decode=" << prune_label(prune) << '\n';
  }
  save_bundle(bundle, out_path);
  write_file(out_path + ".log", [&](std::ostream& f) { f << log.str(); });
  spdlog::info("wrote {}", out_path);
  return 0;
}

int cmd_decode(const Overrides& o, const std::string& bundle_path, const std::string& input,
               const std::string& output, const std::string& trace_path) {
  RunConfig c = o.resolve();
  const auto bundle = load_bundle(bundle_path);
  const PruneConfig prune =
      c.prune_width ? PruneConfig::top(*c.prune_width) : PruneConfig::off();
  if (prune.enabled() && bundle.find(1) == nullptr)
    throw UsageError("pruning needs an order-1 model in the bundle; pass --prune off");

  std::vector<Sentence> sentences;
  if (input.empty() || input == "-")
    sentences = parse_conll(std::cin, c.token_column, c.token_column);
  else
    sentences = read_conll(input, c.token_column, c.token_column);

  const auto lattices = make_lattices(bundle, sentences, c.threads);
  const MultiOrderDecoder decoder(bundle);
  std::vector<TagSequence> pred(sentences.size());
  parallel_for(sentences.size(), c.threads, [&](std::size_t i) {
    pred[i] = decode_sentence(decoder, bundle, lattices[i], prune);
  });

  if (!trace_path.empty()) {
    write_file(trace_path, [&](std::ostream& f) {
      for (std::size_t i = 0; i < sentences.size(); ++i) {
        f << "# sentence " << i + 1 << '\n';
        decoder.decode(lattices[i], prune, &f);
      }
    });
  }

  auto emit = [&](std::ostream& out) {
    for (std::size_t i = 0; i < sentences.size(); ++i) {
      for (std::size_t t = 0; t < sentences[i].size(); ++t)
        out << sentences[i].lines[t] << ' ' << pred[i][t] << '\n';
      out << '\n';
    }
  };
  if (output.empty() || output == "-")
    emit(std::cout);
  else
    write_file(output, emit);
  return 0;
}

int cmd_eval(const Overrides& o, const std::string& gold_path, const std::string& pred_path,
             const std::string& csv_path, bool analyze, std::size_t threshold) {
  RunConfig c = o.resolve();
  const auto gold = gold_of(read_tagged(gold_path, c));
  const auto pred = read_last_column(pred_path, c.scheme);
  check_aligned(gold, pred);
  if (!analyze) {
    const auto score = f1(gold, pred);
    write_score_text(std::cout, score);
    if (!csv_path.empty()) write_file(csv_path, [&](std::ostream& f) { write_score_csv(f, score); });
  } else {
    const auto report = moseq::analyze(gold, pred, threshold);
    write_errors_text(std::cout, report);
    if (!csv_path.empty())
      write_file(csv_path, [&](std::ostream& f) { write_errors_csv(f, report); });
  }
  return 0;
}

int cmd_bench(const Overrides& o, const std::string& bundle_path, const std::string& data_path,
              const std::string& widths, const std::string& csv_path) {
  RunConfig c = o.resolve();
  const auto bundle = load_bundle(bundle_path);
  const auto data = read_tagged(data_path, c);
  if (data.empty()) throw DataError("benchmark data has no sentences: " + data_path);
  std::vector<PruneConfig> configs{PruneConfig::off()};
  std::vector<std::size_t> ws;
  if (!widths.empty()) {
    std::stringstream ss(widths);
    std::string item;
    while (std::getline(ss, item, ',')) {
      RunConfig tmp;
      apply_setting(tmp, "prune_width", item);
      ws.push_back(*tmp.prune_width);
    }
  } else if (c.prune_width) {
    ws.push_back(*c.prune_width);
  }
  if (!ws.empty() && bundle.find(1) == nullptr)
    throw UsageError("pruning needs an order-1 model in the bundle");
  for (auto w : ws) configs.push_back(PruneConfig::top(w));
  const auto rows = bench_decode(bundle, data, configs, c.threads);
  write_timings_text(std::cout, rows);
  if (!csv_path.empty()) write_file(csv_path, [&](std::ostream& f) { write_timings_csv(f, rows); });
  return 0;
}

int cmd_synth(const std::string& out_dir, const synthetic::Config& cfg, std::size_t n_train,
              std::size_t n_dev, std::size_t n_test) {
  const auto splits = synthetic::make_splits(cfg, n_train, n_dev, n_test);
  std::filesystem::create_directories(out_dir);
  auto dump = [&](const char* name, const std::vector<Sentence>& s) {
    write_file((std::filesystem::path(out_dir) / name).string(),
               [&](std::ostream& f) { write_conll(f, s); });
  };
  dump("train.txt", splits.train);
  dump("dev.txt", splits.dev);
  dump("test.txt", splits.test);
  spdlog::info("wrote {} / {} / {} sentences to {} (columns 0,1)", n_train, n_dev, n_test,
               out_dir);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"Multi-order sequence labeling: train, decode, eval, analyze, bench"};
  app.require_subcommand(1);

  Overrides train_o, decode_o, eval_o, analyze_o, bench_o;
  std::string out_path, bundle_path, input, output, trace_path, gold, pred, csv, data, widths;
  std::size_t threshold = 2;

  auto* train = app.add_subcommand("train", "Train one tagger per order and write a bundle");
  add_common(train, train_o);
  for (const char* k : {"train", "dev", "test"}) train_o.add(train, k, std::string(k) + " data file");
  train_o.add(train, "orders", "Strictly increasing orders, e.g. 1,2,3");
  train_o.add(train, "epochs", "Training epochs per order");
  train_o.add(train, "seed", "Random seed");
  train_o.add(train, "emb_dim", "Embedding size");
  train_o.add(train, "hidden_dim", "LSTM size per direction");
  train_o.add(train, "dropout", "Dropout rate on encoder output");
  train_o.add(train, "lr", "Adam learning rate");
  train_o.add(train, "min_count", "Minimum token frequency for the vocabulary");
  train->add_flag("--parallel-orders", train_o.parallel_orders, "Train the orders concurrently");
  train->add_option("--out", out_path, "Bundle file to write")->required();

  auto* decode = app.add_subcommand("decode", "Append predicted tags to CoNLL input");
  add_common(decode, decode_o);
  decode->add_option("--bundle", bundle_path, "Model bundle")->required();
  decode->add_option("--input", input, "CoNLL input (default stdin)");
  decode->add_option("--output", output, "Output file (default stdout)");
  decode->add_option("--trace", trace_path, "Write the decoder chart to this file");
  decode_o.add(decode, "prune_width", "Keep the top-k order-1 tags per position");
  decode_o.prune_off_opt =
      decode->add_flag("--prune-off,--no-prune", decode_o.prune_off, "Disable pruning");

  auto* eval = app.add_subcommand("eval", "Chunk precision, recall and F1");
  add_common(eval, eval_o);
  eval->add_option("--gold", gold, "Gold CoNLL file")->required();
  eval->add_option("--pred", pred, "Predictions; tag in the last column")->required();
  eval->add_option("--csv", csv, "Also write a CSV report");

  auto* analyze = app.add_subcommand("analyze", "Error taxonomy and entity-length buckets");
  add_common(analyze, analyze_o);
  analyze->add_option("--gold", gold, "Gold CoNLL file")->required();
  analyze->add_option("--pred", pred, "Predictions; tag in the last column")->required();
  analyze->add_option("--threshold", threshold, "Entities longer than this are long")
      ->check(CLI::PositiveNumber);
  analyze->add_option("--csv", csv, "Also write a CSV report");

  auto* bench = app.add_subcommand("bench", "Time decoding with and without pruning");
  add_common(bench, bench_o);
  bench->add_option("--bundle", bundle_path, "Model bundle")->required();
  bench->add_option("--data", data, "Gold CoNLL data to decode")->required();
  bench->add_option("--widths", widths, "Comma-separated prune widths (default: config width)");
  bench_o.add(bench, "prune_width", "Single prune width");
  bench->add_option("--csv", csv, "Also write a CSV table");

  synthetic::Config synth_cfg;
  std::size_t n_train = 2000, n_dev = 500, n_test = 500;
  std::string synth_dir;
  auto* synth = app.add_subcommand("synth", "Write a synthetic second-order chunking corpus");
  synth->add_option("--out-dir", synth_dir, "Output directory")->required();
  synth->add_option("--seed", synth_cfg.seed, "Generator seed");
  synth->add_option("--types", synth_cfg.types, "Chunk types (tags = 2*types+1)");
  synth->add_option("--noise", synth_cfg.noise, "Probability of an ambiguous word");
  synth->add_option("--train-size", n_train);
  synth->add_option("--dev-size", n_dev);
  synth->add_option("--test-size", n_test);

  // "--prune off" reads as a value; rewrite it to the flag form.
  std::vector<std::string> args(argv + 1, argv + argc);
  for (std::size_t i = 0; i + 1 < args.size(); ++i) {
    if (args[i] == "--prune") {
      const std::string v = args[i + 1];
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i), args.begin() + static_cast<std::ptrdiff_t>(i) + 2);
      if (v == "off" || v == "false" || v == "0") args.insert(args.begin() + static_cast<std::ptrdiff_t>(i), "--prune-off");
      else if (v != "on" && v != "true" && v != "1") args.insert(args.begin() + static_cast<std::ptrdiff_t>(i), {"--prune-width", v});
      --i;
    }
  }
  std::reverse(args.begin(), args.end());

  try {
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  try {
    if (*train) return cmd_train(train_o, out_path);
    if (*decode) return cmd_decode(decode_o, bundle_path, input, output, trace_path);
    if (*eval) return cmd_eval(eval_o, gold, pred, csv, false, threshold);
    if (*analyze) return cmd_eval(analyze_o, gold, pred, csv, true, threshold);
    if (*bench) return cmd_bench(bench_o, bundle_path, data, widths, csv);
    if (*synth) return cmd_synth(synth_dir, synth_cfg, n_train, n_dev, n_test);
  } catch (const UsageError& e) {
    spdlog::error("{}", e.what());
    return kExitUsage;
  } catch (const DataError& e) {
    spdlog::error("{}", e.what());
    return kExitData;
  } catch (const ModelError& e) {
    spdlog::error("{}", e.what());
    return kExitModel;
  } catch (const std::filesystem::filesystem_error& e) {
    spdlog::error("{}", e.what());
    return kExitUsage;
  }
  return 0;
}
