#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "moseq/error.hpp"
#include "moseq/io.hpp"

namespace moseq::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Seeded generator with a platform-independent mapping to [0, 1).
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) { return static_cast<std::uint64_t>(uniform() * n); }
  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

struct Dims {
  std::size_t vocab = 0;
  std::size_t features = 0;
  std::size_t emb = 50;
  std::size_t hidden = 200;
  std::size_t labels = 0;

  std::size_t input() const { return 2 * emb; }
  friend bool operator==(const Dims&, const Dims&) = default;
};

// Gate rows are stacked as [input; forget; output; candidate], H rows each.
struct LstmParams {
  Matrix input;      // 4H x 2E
  Matrix recurrent;  // 4H x H
  Matrix bias;       // 4H x 1
};

inline constexpr double kInitRange = 0.08;
inline constexpr double kForgetBias = 1.0;

struct TaggerParams {
  Matrix token_embedding;    // V x E
  Matrix feature_embedding;  // F x E
  LstmParams forward;
  LstmParams backward;
  Matrix output;       // L x 2H
  Matrix output_bias;  // L x 1

  Dims dims() const {
    return Dims{static_cast<std::size_t>(token_embedding.rows()),
                static_cast<std::size_t>(feature_embedding.rows()),
                static_cast<std::size_t>(token_embedding.cols()),
                static_cast<std::size_t>(forward.recurrent.cols()),
                static_cast<std::size_t>(output.rows())};
  }

  // Calls f(name, tensor) for every parameter tensor in a fixed order.
  template <typename F>
  void for_each(F&& f) {
    visit(*this, f);
  }
  template <typename F>
  void for_each(F&& f) const {
    visit(*this, f);
  }

  static TaggerParams zeros(const Dims& d) {
    TaggerParams p;
    const auto h4 = 4 * d.hidden;
    p.token_embedding = Matrix::Zero(d.vocab, d.emb);
    p.feature_embedding = Matrix::Zero(d.features, d.emb);
    for (auto* l : {&p.forward, &p.backward}) {
      l->input = Matrix::Zero(h4, d.input());
      l->recurrent = Matrix::Zero(h4, d.hidden);
      l->bias = Matrix::Zero(h4, 1);
    }
    p.output = Matrix::Zero(d.labels, 2 * d.hidden);
    p.output_bias = Matrix::Zero(d.labels, 1);
    return p;
  }

  // Weights uniform in [-0.08, 0.08]; forget-gate bias 1, other biases 0.
  static TaggerParams initialize(const Dims& d, Rng& rng) {
    TaggerParams p = zeros(d);
    auto fill = [&](Matrix& m) {
      for (Eigen::Index j = 0; j < m.cols(); ++j)
        for (Eigen::Index i = 0; i < m.rows(); ++i)
          m(i, j) = rng.uniform(-kInitRange, kInitRange);
    };
    fill(p.token_embedding);
    fill(p.feature_embedding);
    for (auto* l : {&p.forward, &p.backward}) {
      fill(l->input);
      fill(l->recurrent);
      l->bias.block(d.hidden, 0, d.hidden, 1).setConstant(kForgetBias);
    }
    fill(p.output);
    return p;
  }

  bool all_finite() const {
    bool ok = true;
    for_each([&](const char*, const Matrix& m) { ok = ok && m.allFinite(); });
    return ok;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for_each([&](const char*, const Matrix& m) { n += m.size(); });
    return n;
  }

  void serialize(io::ByteWriter& w) const {
    for_each([&](const char*, const Matrix& m) {
      w.u64(m.rows());
      w.u64(m.cols());
      w.f64s(m.data(), m.size());
    });
  }
  static TaggerParams deserialize(io::ByteReader& r) {
    TaggerParams p;
    p.for_each([&](const char* name, Matrix& m) {
      const auto rows = r.u64();
      const auto cols = r.u64();
      if (rows > (1u << 28) || cols > (1u << 28) || rows * cols > (1ull << 32))
        throw ModelError(std::string("implausible shape for tensor ") + name);
      m.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
      r.f64s(m.data(), m.size());
    });
    if (!p.consistent()) throw ModelError("inconsistent tensor shapes in model file");
    return p;
  }

  bool consistent() const {
    const auto d = dims();
    const auto h4 = static_cast<Eigen::Index>(4 * d.hidden);
    const auto in = static_cast<Eigen::Index>(d.input());
    const auto hh = static_cast<Eigen::Index>(d.hidden);
    bool ok = feature_embedding.cols() == static_cast<Eigen::Index>(d.emb);
    for (const auto* l : {&forward, &backward})
      ok = ok && l->input.rows() == h4 && l->input.cols() == in &&
           l->recurrent.rows() == h4 && l->recurrent.cols() == hh &&
           l->bias.rows() == h4 && l->bias.cols() == 1;
    return ok && output.cols() == 2 * hh && output_bias.rows() == output.rows() &&
           output_bias.cols() == 1;
  }

  friend bool operator==(const TaggerParams& a, const TaggerParams& b) {
    bool eq = true;
    std::vector<const Matrix*> bs;
    b.for_each([&](const char*, const Matrix& m) { bs.push_back(&m); });
    std::size_t i = 0;
    a.for_each([&](const char*, const Matrix& m) {
      const Matrix& o = *bs[i++];
      eq = eq && m.rows() == o.rows() && m.cols() == o.cols() && m == o;
    });
    return eq;
  }

 private:
  template <typename Self, typename F>
  static void visit(Self& s, F& f) {
    f("token_embedding", s.token_embedding);
    f("feature_embedding", s.feature_embedding);
    f("forward.input", s.forward.input);
    f("forward.recurrent", s.forward.recurrent);
    f("forward.bias", s.forward.bias);
    f("backward.input", s.backward.input);
    f("backward.recurrent", s.backward.recurrent);
    f("backward.bias", s.backward.bias);
    f("output", s.output);
    f("output_bias", s.output_bias);
  }
};

using Gradients = TaggerParams;

// Token ids plus sparse feature ids per position.
struct EncodedSentence {
  std::vector<std::uint32_t> tokens;
  std::vector<std::vector<std::uint32_t>> features;

  std::size_t size() const { return tokens.size(); }
};

// ---------------------------------------------------------------------------
// Softmax

inline Vector log_softmax(const Vector& logits) {
  const double m = logits.maxCoeff();
  const double lse = m + std::log((logits.array() - m).exp().sum());
  return (logits.array() - lse).matrix();
}

inline Vector softmax(const Vector& logits) { return log_softmax(logits).array().exp().matrix(); }

// Class distribution for one encoder state.
inline Vector score_distribution(const TaggerParams& p, const Vector& state) {
  return softmax(p.output * state + p.output_bias.col(0));
}

inline Vector score_log_distribution(const TaggerParams& p, const Vector& state) {
  return log_softmax(p.output * state + p.output_bias.col(0));
}

// ---------------------------------------------------------------------------
// Encoder

namespace detail {

inline Matrix sigmoid(const Matrix& x) {
  return (1.0 / (1.0 + (-x.array()).exp())).matrix();
}

struct LstmTrace {
  Matrix gates;   // 4H x T, post-activation
  Matrix cell;    // H x T
  Matrix cell_tanh;
  Matrix hidden;  // H x T
};

inline void run_lstm(const LstmParams& p, const Matrix& inputs, bool reverse,
                     LstmTrace& tr) {
  const Eigen::Index T = inputs.cols();
  const Eigen::Index H = p.recurrent.cols();
  Matrix pre = p.input * inputs;
  pre.colwise() += p.bias.col(0);
  tr.gates.resize(4 * H, T);
  tr.cell.resize(H, T);
  tr.cell_tanh.resize(H, T);
  tr.hidden.resize(H, T);
  Vector h = Vector::Zero(H), c = Vector::Zero(H);
  for (Eigen::Index s = 0; s < T; ++s) {
    const Eigen::Index t = reverse ? T - 1 - s : s;
    Vector a = pre.col(t) + p.recurrent * h;
    Vector ifo = sigmoid(a.head(3 * H));
    Vector g = a.tail(H).array().tanh();
    c = ifo.segment(H, H).cwiseProduct(c) + ifo.head(H).cwiseProduct(g);
    Vector ct = c.array().tanh();
    h = ifo.segment(2 * H, H).cwiseProduct(ct);
    tr.gates.col(t).head(3 * H) = ifo;
    tr.gates.col(t).tail(H) = g;
    tr.cell.col(t) = c;
    tr.cell_tanh.col(t) = ct;
    tr.hidden.col(t) = h;
  }
}

// Backpropagation through time; accumulates into grads and input_grads.
inline void backprop_lstm(const LstmParams& p, const Matrix& inputs,
                          const LstmTrace& tr, const Matrix& d_hidden,
                          bool reverse, LstmParams& grads, Matrix& input_grads) {
  const Eigen::Index T = inputs.cols();
  const Eigen::Index H = p.recurrent.cols();
  Matrix d_pre(4 * H, T);
  Matrix h_prev = Matrix::Zero(H, T);
  Vector dh_next = Vector::Zero(H), dc_next = Vector::Zero(H);
  for (Eigen::Index s = T - 1; s >= 0; --s) {
    const Eigen::Index t = reverse ? T - 1 - s : s;
    const Eigen::Index tp = reverse ? t + 1 : t - 1;
    const bool has_prev = s > 0;
    const auto gi = tr.gates.col(t).segment(0, H).array();
    const auto gf = tr.gates.col(t).segment(H, H).array();
    const auto go = tr.gates.col(t).segment(2 * H, H).array();
    const auto gg = tr.gates.col(t).segment(3 * H, H).array();
    const auto ct = tr.cell_tanh.col(t).array();
    Vector c_prev = has_prev ? Vector(tr.cell.col(tp)) : Vector::Zero(H);
    if (has_prev) h_prev.col(t) = tr.hidden.col(tp);

    const Vector dh = d_hidden.col(t) + dh_next;
    const Vector dc = (dh.array() * go * (1.0 - ct.square())).matrix() + dc_next;
    d_pre.col(t).segment(0, H) = dc.array() * gg * gi * (1.0 - gi);
    d_pre.col(t).segment(H, H) = dc.array() * c_prev.array() * gf * (1.0 - gf);
    d_pre.col(t).segment(2 * H, H) = dh.array() * ct * go * (1.0 - go);
    d_pre.col(t).segment(3 * H, H) = dc.array() * gi * (1.0 - gg.square());
    dc_next = dc.cwiseProduct(tr.gates.col(t).segment(H, H));
    dh_next = p.recurrent.transpose() * d_pre.col(t);
  }
  grads.input.noalias() += d_pre * inputs.transpose();
  grads.recurrent.noalias() += d_pre * h_prev.transpose();
  grads.bias.col(0) += d_pre.rowwise().sum();
  input_grads.noalias() += p.input.transpose() * d_pre;
}

}  // namespace detail

// Everything the backward pass needs from one forward pass.
struct ForwardTrace {
  Matrix inputs;  // 2E x T
  detail::LstmTrace fwd, bwd;
  Matrix mask;    // 2H x T inverted-dropout multipliers; empty when disabled
  Matrix states;  // 2H x T encoder output after dropout
  Matrix log_probs;  // L x T
};

inline void check_ids(const TaggerParams& p, const EncodedSentence& s) {
  const auto V = static_cast<std::size_t>(p.token_embedding.rows());
  const auto F = static_cast<std::size_t>(p.feature_embedding.rows());
  if (s.features.size() != s.tokens.size())
    throw DataError("feature list length differs from token count");
  for (std::size_t t = 0; t < s.size(); ++t) {
    if (s.tokens[t] >= V)
      throw DataError("token id " + std::to_string(s.tokens[t]) +
                      " out of range (vocab size " + std::to_string(V) + ")");
    for (auto f : s.features[t])
      if (f >= F)
        throw DataError("feature id " + std::to_string(f) + " out of range (" +
                        std::to_string(F) + " features)");
  }
}

inline Matrix embed(const TaggerParams& p, const EncodedSentence& s) {
  const auto E = p.token_embedding.cols();
  Matrix x = Matrix::Zero(2 * E, static_cast<Eigen::Index>(s.size()));
  for (std::size_t t = 0; t < s.size(); ++t) {
    const auto col = static_cast<Eigen::Index>(t);
    x.col(col).head(E) = p.token_embedding.row(s.tokens[t]).transpose();
    for (auto f : s.features[t]) x.col(col).tail(E) += p.feature_embedding.row(f).transpose();
  }
  return x;
}

// Full forward pass. dropout <= 0 disables the mask.
inline ForwardTrace forward(const TaggerParams& p, const EncodedSentence& s,
                            double dropout, Rng* rng) {
  check_ids(p, s);
  ForwardTrace tr;
  const auto T = static_cast<Eigen::Index>(s.size());
  const Eigen::Index H = p.forward.recurrent.cols();
  tr.inputs = embed(p, s);
  detail::run_lstm(p.forward, tr.inputs, false, tr.fwd);
  detail::run_lstm(p.backward, tr.inputs, true, tr.bwd);
  tr.states.resize(2 * H, T);
  tr.states.topRows(H) = tr.fwd.hidden;
  tr.states.bottomRows(H) = tr.bwd.hidden;
  if (dropout > 0.0) {
    if (rng == nullptr) throw UsageError("dropout requires a random generator");
    const double keep = 1.0 - dropout;
    tr.mask.resize(2 * H, T);
    for (Eigen::Index t = 0; t < T; ++t)
      for (Eigen::Index i = 0; i < 2 * H; ++i)
        tr.mask(i, t) = rng->uniform() < keep ? 1.0 / keep : 0.0;
    tr.states.array() *= tr.mask.array();
  }
  Matrix logits = p.output * tr.states;
  logits.colwise() += p.output_bias.col(0);
  tr.log_probs.resize(logits.rows(), T);
  for (Eigen::Index t = 0; t < T; ++t) tr.log_probs.col(t) = log_softmax(logits.col(t));
  return tr;
}

// Encoder output, 2H x T: column t stacks forward and backward states at t.
inline Matrix encode(const TaggerParams& p, const EncodedSentence& s,
                     bool dropout_enabled, Rng& rng, double dropout = 0.5) {
  return forward(p, s, dropout_enabled ? dropout : 0.0, &rng).states;
}

struct LossAndGradients {
  double loss = 0.0;
  Gradients grads;
};

// Mean per-token negative log-probability of the gold labels.
inline LossAndGradients loss_and_gradients(const TaggerParams& p,
                                           const EncodedSentence& s,
                                           const std::vector<std::uint32_t>& gold,
                                           double dropout, Rng* rng) {
  if (gold.size() != s.size()) throw DataError("gold label count differs from token count");
  if (s.size() == 0) throw DataError("empty sentence");
  const auto L = static_cast<std::size_t>(p.output.rows());
  for (auto g : gold)
    if (g >= L)
      throw DataError("gold label id " + std::to_string(g) + " out of range (" +
                      std::to_string(L) + " labels)");

  const ForwardTrace tr = forward(p, s, dropout, rng);
  const auto T = static_cast<Eigen::Index>(s.size());
  const Eigen::Index H = p.forward.recurrent.cols();
  const Eigen::Index E = p.token_embedding.cols();
  const double inv_t = 1.0 / static_cast<double>(T);

  LossAndGradients out;
  out.grads = Gradients::zeros(p.dims());
  Gradients& g = out.grads;

  Matrix d_logits = tr.log_probs.array().exp().matrix();
  for (Eigen::Index t = 0; t < T; ++t) {
    out.loss -= tr.log_probs(gold[t], t);
    d_logits(gold[t], t) -= 1.0;
  }
  out.loss *= inv_t;
  d_logits *= inv_t;

  g.output.noalias() = d_logits * tr.states.transpose();
  g.output_bias.col(0) = d_logits.rowwise().sum();
  Matrix d_states = p.output.transpose() * d_logits;
  if (tr.mask.size() > 0) d_states.array() *= tr.mask.array();

  Matrix d_inputs = Matrix::Zero(2 * E, T);
  detail::backprop_lstm(p.forward, tr.inputs, tr.fwd, d_states.topRows(H), false,
                        g.forward, d_inputs);
  detail::backprop_lstm(p.backward, tr.inputs, tr.bwd, d_states.bottomRows(H), true,
                        g.backward, d_inputs);

  for (Eigen::Index t = 0; t < T; ++t) {
    g.token_embedding.row(s.tokens[t]) += d_inputs.col(t).head(E).transpose();
    for (auto f : s.features[t])
      g.feature_embedding.row(f) += d_inputs.col(t).tail(E).transpose();
  }
  return out;
}

// ---------------------------------------------------------------------------
// Adam

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  AdamConfig config;
  Gradients first;
  Gradients second;
  std::uint64_t step = 0;

  static AdamState for_params(const TaggerParams& p, AdamConfig config = {}) {
    AdamState s;
    s.config = config;
    s.first = Gradients::zeros(p.dims());
    s.second = Gradients::zeros(p.dims());
    return s;
  }
};

// One bias-corrected Adam update. Non-finite gradients abort with ModelError
// before any parameter is touched.
inline void adam_step(TaggerParams& params, const Gradients& grads, AdamState& state) {
  grads.for_each([](const char* name, const Matrix& m) {
    if (!m.allFinite())
      throw ModelError(std::string("non-finite gradient in ") + name);
  });
  if (!(grads.dims() == params.dims()) || !(state.first.dims() == params.dims()))
    throw ModelError("Adam state shape does not match parameters");

  const auto& c = state.config;
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double corr1 = 1.0 - std::pow(c.beta1, t);
  const double corr2 = 1.0 - std::pow(c.beta2, t);

  std::vector<Matrix*> ps, ms, vs;
  std::vector<const Matrix*> gs;
  params.for_each([&](const char*, Matrix& m) { ps.push_back(&m); });
  state.first.for_each([&](const char*, Matrix& m) { ms.push_back(&m); });
  state.second.for_each([&](const char*, Matrix& m) { vs.push_back(&m); });
  grads.for_each([&](const char*, const Matrix& m) { gs.push_back(&m); });
  for (std::size_t i = 0; i < ps.size(); ++i) {
    auto p = ps[i]->array();
    auto m = ms[i]->array();
    auto v = vs[i]->array();
    const auto gr = gs[i]->array();
    m = c.beta1 * m + (1.0 - c.beta1) * gr;
    v = c.beta2 * v + (1.0 - c.beta2) * gr.square();
    p -= c.learning_rate * (m / corr1) / ((v / corr2).sqrt() + c.epsilon);
  }
}

}  // namespace moseq::nn
