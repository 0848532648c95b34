#include "pltr/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "pltr/error.hpp"
#include "pltr/log.hpp"

namespace pltr {
namespace {

constexpr double kLayerNormEps = 1e-5;

// out[n x m] = bias + a[n x k] * w[k x m]
void linear(const double* a, const double* w, const double* bias, double* out, std::size_t n, std::size_t k,
            std::size_t m) {
  for (std::size_t i = 0; i < n; ++i) {
    double* row = out + i * m;
    for (std::size_t j = 0; j < m; ++j) row[j] = bias ? bias[j] : 0.0;
    const double* ai = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ai[p];
      const double* wp = w + p * m;
      for (std::size_t j = 0; j < m; ++j) row[j] += av * wp[j];
    }
  }
}

// Accumulates gradients of linear(): da += dout w^T, dw += a^T dout, db += colsum(dout).
void linear_backward(const double* a, const double* w, const double* dout, double* da, double* dw, double* db,
                     std::size_t n, std::size_t k, std::size_t m) {
  for (std::size_t i = 0; i < n; ++i) {
    const double* di = dout + i * m;
    const double* ai = a + i * k;
    double* dai = da + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double* wp = w + p * m;
      double* dwp = dw + p * m;
      const double av = ai[p];
      double acc = 0.0;
      for (std::size_t j = 0; j < m; ++j) {
        acc += di[j] * wp[j];
        dwp[j] += av * di[j];
      }
      dai[p] += acc;
    }
    if (db) {
      for (std::size_t j = 0; j < m; ++j) db[j] += di[j];
    }
  }
}

void layer_norm(const double* x, const double* gain, const double* bias, double* y, double* xhat, double* rstd,
                std::size_t n, std::size_t d) {
  for (std::size_t i = 0; i < n; ++i) {
    const double* xi = x + i * d;
    double mean = 0.0;
    for (std::size_t c = 0; c < d; ++c) mean += xi[c];
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t c = 0; c < d; ++c) var += (xi[c] - mean) * (xi[c] - mean);
    var /= static_cast<double>(d);
    const double r = 1.0 / std::sqrt(var + kLayerNormEps);
    rstd[i] = r;
    for (std::size_t c = 0; c < d; ++c) {
      const double h = (xi[c] - mean) * r;
      xhat[i * d + c] = h;
      y[i * d + c] = gain[c] * h + bias[c];
    }
  }
}

// dx += LN'(dy); dgain/dbias accumulated.
void layer_norm_backward(const double* dy, const double* xhat, const double* rstd, const double* gain, double* dx,
                         double* dgain, double* dbias, std::size_t n, std::size_t d) {
  std::vector<double> dxhat(d);
  for (std::size_t i = 0; i < n; ++i) {
    const double* dyi = dy + i * d;
    const double* hi = xhat + i * d;
    double mean_dxhat = 0.0;
    double mean_dxhat_xhat = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
      dgain[c] += dyi[c] * hi[c];
      dbias[c] += dyi[c];
      dxhat[c] = dyi[c] * gain[c];
      mean_dxhat += dxhat[c];
      mean_dxhat_xhat += dxhat[c] * hi[c];
    }
    mean_dxhat /= static_cast<double>(d);
    mean_dxhat_xhat /= static_cast<double>(d);
    for (std::size_t c = 0; c < d; ++c) {
      dx[i * d + c] += rstd[i] * (dxhat[c] - mean_dxhat - hi[c] * mean_dxhat_xhat);
    }
  }
}

constexpr double kGeluC = 0.7978845608028654;  // sqrt(2 / pi)
constexpr double kGeluA = 0.044715;

double gelu(double x) { return 0.5 * x * (1.0 + std::tanh(kGeluC * (x + kGeluA * x * x * x))); }

double gelu_grad(double x) {
  const double t = std::tanh(kGeluC * (x + kGeluA * x * x * x));
  return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * kGeluC * (1.0 + 3.0 * kGeluA * x * x);
}

void log_softmax_rows(const double* logits, double* out, std::size_t n, std::size_t m) {
  for (std::size_t i = 0; i < n; ++i) {
    const double* li = logits + i * m;
    const double mx = *std::max_element(li, li + m);
    double sum = 0.0;
    for (std::size_t j = 0; j < m; ++j) sum += std::exp(li[j] - mx);
    const double lse = mx + std::log(sum);
    for (std::size_t j = 0; j < m; ++j) out[i * m + j] = li[j] - lse;
  }
}

}  // namespace

nlohmann::json ModelConfig::to_json() const {
  return {{"dim", dim},         {"depth", depth},       {"heads", heads}, {"ffn_dim", ffn_dim},
          {"max_len", max_len}, {"init_std", init_std}, {"seed", seed}};
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.dim = j.value("dim", c.dim);
  c.depth = j.value("depth", c.depth);
  c.heads = j.value("heads", c.heads);
  c.ffn_dim = j.value("ffn_dim", c.ffn_dim);
  c.max_len = j.value("max_len", c.max_len);
  c.init_std = j.value("init_std", c.init_std);
  c.seed = j.value("seed", c.seed);
  return c;
}

void ModelConfig::validate() const {
  if (dim == 0 || depth == 0 || heads == 0 || ffn_dim == 0) throw ValidationError("model sizes must be positive");
  if (dim % heads != 0) throw ValidationError("dim must be divisible by heads");
  if (max_len == 0 || max_len > kMaxSequenceLength) throw ValidationError("max_len must be in [1, 256]");
  if (!(init_std > 0.0)) throw ValidationError("init_std must be positive");
}

TagSet::TagSet(std::vector<std::string> types) : types_(std::move(types)) {}

int TagSet::index(const EntityLabel& label) const {
  if (label.is_outside()) return 0;
  auto it = std::find(types_.begin(), types_.end(), label.type());
  if (it == types_.end()) throw ValidationError("label type '" + label.type() + "' not in tag set");
  const int type = static_cast<int>(it - types_.begin());
  int pos = 0;
  switch (label.tag()) {
    case PositionTag::B: pos = 0; break;
    case PositionTag::I: pos = 1; break;
    case PositionTag::E: pos = 2; break;
    case PositionTag::S: pos = 3; break;
    case PositionTag::O: break;
  }
  return 1 + 4 * type + pos;
}

EntityLabel TagSet::label(int index) const {
  if (index < 0 || static_cast<std::size_t>(index) >= size()) throw ValidationError("tag index out of range");
  if (index == 0) return EntityLabel::outside();
  const auto type = static_cast<std::size_t>((index - 1) / 4);
  static constexpr PositionTag kOrder[] = {PositionTag::B, PositionTag::I, PositionTag::E, PositionTag::S};
  return {kOrder[(index - 1) % 4], types_[type]};
}

ParameterVector& ParameterVector::operator+=(const ParameterVector& other) {
  if (other.values.empty()) return *this;
  if (values.empty()) values.assign(other.values.size(), 0.0);
  if (other.values.size() != values.size()) throw ValidationError("parameter vector size mismatch");
  for (std::size_t i = 0; i < values.size(); ++i) values[i] += other.values[i];
  return *this;
}

ParameterVector& ParameterVector::operator*=(double s) {
  for (double& v : values) v *= s;
  return *this;
}

double ParameterVector::squared_norm() const {
  double s = 0.0;
  for (double v : values) s += v * v;
  return s;
}

LossNode LossNode::scaled(double s) const {
  LossNode out = *this;
  out.value *= s;
  for (double& v : out.d_hidden) v *= s;
  out.direct *= s;
  return out;
}

LossNode& LossNode::operator+=(const LossNode& other) {
  if (pass != other.pass) throw ValidationError("cannot add loss nodes from different forward passes");
  value += other.value;
  if (d_hidden.empty()) d_hidden.assign(other.d_hidden.size(), 0.0);
  for (std::size_t i = 0; i < d_hidden.size(); ++i) d_hidden[i] += other.d_hidden[i];
  direct += other.direct;
  return *this;
}

EncoderModel::EncoderModel(ModelConfig config, Vocabulary vocab, TagSet tags)
    : config_(config), vocab_(std::move(vocab)), tags_(std::move(tags)) {
  config_.validate();
  build_layout();
  initialize();
}

void EncoderModel::build_layout() {
  const std::size_t d = config_.dim;
  const std::size_t f = config_.ffn_dim;
  std::size_t off = 0;
  auto take = [&off](std::size_t n) {
    const std::size_t at = off;
    off += n;
    return at;
  };
  layout_ = {};
  layout_.tok_emb = take(vocab_.size() * d);
  layout_.pos_emb = take(config_.max_len * d);
  for (std::size_t l = 0; l < config_.depth; ++l) {
    Layout::Layer L{};
    L.ln1_g = take(d);
    L.ln1_b = take(d);
    L.wq = take(d * d);
    L.bq = take(d);
    L.wk = take(d * d);
    L.bk = take(d);
    L.wv = take(d * d);
    L.bv = take(d);
    L.wo = take(d * d);
    L.bo = take(d);
    L.ln2_g = take(d);
    L.ln2_b = take(d);
    L.w1 = take(d * f);
    L.b1 = take(f);
    L.w2 = take(f * d);
    L.b2 = take(d);
    layout_.layers.push_back(L);
  }
  layout_.lnf_g = take(d);
  layout_.lnf_b = take(d);
  layout_.tag_w = take(d * tags_.size());
  layout_.tag_b = take(tags_.size());
  layout_.lm_b = take(vocab_.size());
  layout_.total = off;
}

void EncoderModel::initialize() {
  params_ = ParameterVector(layout_.total);
  std::mt19937_64 rng(config_.seed);
  std::normal_distribution<double> normal(0.0, config_.init_std);
  auto fill_normal = [&](std::size_t at, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) params_.values[at + i] = normal(rng);
  };
  auto fill_const = [&](std::size_t at, std::size_t n, double v) {
    std::fill_n(params_.values.begin() + static_cast<std::ptrdiff_t>(at), n, v);
  };
  const std::size_t d = config_.dim;
  const std::size_t f = config_.ffn_dim;
  fill_normal(layout_.tok_emb, vocab_.size() * d);
  fill_normal(layout_.pos_emb, config_.max_len * d);
  for (const auto& L : layout_.layers) {
    fill_const(L.ln1_g, d, 1.0);
    fill_normal(L.wq, d * d);
    fill_normal(L.wk, d * d);
    fill_normal(L.wv, d * d);
    fill_normal(L.wo, d * d);
    fill_const(L.ln2_g, d, 1.0);
    fill_normal(L.w1, d * f);
    fill_normal(L.w2, f * d);
  }
  fill_const(layout_.lnf_g, d, 1.0);
  fill_normal(layout_.tag_w, d * tags_.size());
}

std::span<const double> EncoderModel::embedding_row(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= vocab_.size()) throw ValidationError("token id out of range");
  return {params_.values.data() + layout_.tok_emb + static_cast<std::size_t>(id) * config_.dim, config_.dim};
}

std::vector<double> EncoderModel::token_embedding(std::string_view token) const {
  auto row = embedding_row(vocab_.id(token));
  return {row.begin(), row.end()};
}

ForwardOutput EncoderModel::encode(std::span<const std::string> tokens) const {
  const auto ids = vocab_.encode(tokens);
  return forward(ids).output();
}

ForwardPass EncoderModel::forward(std::span<const int> input_ids, bool with_lm_head) const {
  if (input_ids.empty()) throw ValidationError("cannot encode an empty sequence");
  ForwardPass pass;
  std::size_t n = input_ids.size();
  if (n > config_.max_len) {
    log::warn("encoder.truncated", {{"length", n}, {"max_len", config_.max_len}});
    n = config_.max_len;
    pass.out_.truncated = true;
  }
  pass.ids_.assign(input_ids.begin(), input_ids.begin() + static_cast<std::ptrdiff_t>(n));
  for (int id : pass.ids_) {
    if (id < 0 || static_cast<std::size_t>(id) >= vocab_.size()) throw ValidationError("token id out of range");
  }

  const std::size_t d = config_.dim;
  const std::size_t f = config_.ffn_dim;
  const std::size_t heads = config_.heads;
  const std::size_t hd = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(hd));
  const double* P = params_.values.data();

  std::vector<double> x(n * d);
  for (std::size_t i = 0; i < n; ++i) {
    const double* e = P + layout_.tok_emb + static_cast<std::size_t>(pass.ids_[i]) * d;
    const double* p = P + layout_.pos_emb + i * d;
    for (std::size_t c = 0; c < d; ++c) x[i * d + c] = e[c] + p[c];
  }

  std::vector<char> key_pad(n);
  for (std::size_t j = 0; j < n; ++j) key_pad[j] = pass.ids_[j] == Vocabulary::kPad;

  pass.layers_.resize(config_.depth);
  for (std::size_t l = 0; l < config_.depth; ++l) {
    const auto& L = layout_.layers[l];
    auto& C = pass.layers_[l];
    C.x_in = x;
    C.a.resize(n * d);
    C.xhat1.resize(n * d);
    C.rstd1.resize(n);
    layer_norm(x.data(), P + L.ln1_g, P + L.ln1_b, C.a.data(), C.xhat1.data(), C.rstd1.data(), n, d);

    C.q.resize(n * d);
    C.k.resize(n * d);
    C.v.resize(n * d);
    linear(C.a.data(), P + L.wq, P + L.bq, C.q.data(), n, d, d);
    linear(C.a.data(), P + L.wk, P + L.bk, C.k.data(), n, d, d);
    linear(C.a.data(), P + L.wv, P + L.bv, C.v.data(), n, d, d);

    C.probs.assign(heads * n * n, 0.0);
    C.ctx.assign(n * d, 0.0);
    for (std::size_t h = 0; h < heads; ++h) {
      const std::size_t c0 = h * hd;
      for (std::size_t i = 0; i < n; ++i) {
        double* row = C.probs.data() + (h * n + i) * n;
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < n; ++j) {
          if (key_pad[j]) continue;
          double s = 0.0;
          for (std::size_t c = 0; c < hd; ++c) s += C.q[i * d + c0 + c] * C.k[j * d + c0 + c];
          row[j] = s * scale;
          mx = std::max(mx, row[j]);
        }
        double sum = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
          if (key_pad[j]) {
            row[j] = 0.0;
            continue;
          }
          row[j] = std::exp(row[j] - mx);
          sum += row[j];
        }
        if (sum > 0.0) {
          for (std::size_t j = 0; j < n; ++j) row[j] /= sum;
        }
        double* out = C.ctx.data() + i * d + c0;
        for (std::size_t j = 0; j < n; ++j) {
          const double pij = row[j];
          if (pij == 0.0) continue;
          const double* vj = C.v.data() + j * d + c0;
          for (std::size_t c = 0; c < hd; ++c) out[c] += pij * vj[c];
        }
      }
    }

    std::vector<double> attn_out(n * d);
    linear(C.ctx.data(), P + L.wo, P + L.bo, attn_out.data(), n, d, d);
    C.x_mid.resize(n * d);
    for (std::size_t i = 0; i < n * d; ++i) C.x_mid[i] = x[i] + attn_out[i];

    C.b.resize(n * d);
    C.xhat2.resize(n * d);
    C.rstd2.resize(n);
    layer_norm(C.x_mid.data(), P + L.ln2_g, P + L.ln2_b, C.b.data(), C.xhat2.data(), C.rstd2.data(), n, d);
    C.h1.resize(n * f);
    linear(C.b.data(), P + L.w1, P + L.b1, C.h1.data(), n, d, f);
    C.g.resize(n * f);
    for (std::size_t i = 0; i < n * f; ++i) C.g[i] = gelu(C.h1[i]);
    std::vector<double> ffn_out(n * d);
    linear(C.g.data(), P + L.w2, P + L.b2, ffn_out.data(), n, f, d);
    for (std::size_t i = 0; i < n * d; ++i) x[i] = C.x_mid[i] + ffn_out[i];
  }

  pass.x_out = x;
  auto& out = pass.out_;
  out.length = n;
  out.dim = d;
  out.num_tags = tags_.size();
  out.hidden.resize(n * d);
  pass.xhatf.resize(n * d);
  pass.rstdf.resize(n);
  layer_norm(x.data(), P + layout_.lnf_g, P + layout_.lnf_b, out.hidden.data(), pass.xhatf.data(), pass.rstdf.data(),
             n, d);

  const std::size_t T = tags_.size();
  pass.tag_logits.resize(n * T);
  linear(out.hidden.data(), P + layout_.tag_w, P + layout_.tag_b, pass.tag_logits.data(), n, d, T);
  out.tag_logprobs.resize(n * T);
  log_softmax_rows(pass.tag_logits.data(), out.tag_logprobs.data(), n, T);

  if (with_lm_head) {
    const std::size_t V = vocab_.size();
    out.vocab_size = V;
    std::vector<double> logits(n * V);
    for (std::size_t i = 0; i < n; ++i) {
      const double* hi = out.hidden.data() + i * d;
      for (std::size_t v = 0; v < V; ++v) {
        const double* ev = P + layout_.tok_emb + v * d;
        double s = P[layout_.lm_b + v];
        for (std::size_t c = 0; c < d; ++c) s += hi[c] * ev[c];
        logits[i * V + v] = s;
      }
    }
    out.lm_logprobs.resize(n * V);
    log_softmax_rows(logits.data(), out.lm_logprobs.data(), n, V);
  }

  for (std::size_t i = 0; i < n; ++i) {
    if (pass.ids_[i] == Vocabulary::kMask) out.mask_positions.push_back(i);
  }
  return pass;
}

Gradients EncoderModel::gradients(const LossNode& loss) const {
  if (!loss.pass) throw ValidationError("loss node is not attached to a forward pass");
  const ForwardPass& pass = *loss.pass;
  const std::size_t n = pass.length();
  const std::size_t d = config_.dim;
  const std::size_t f = config_.ffn_dim;
  const std::size_t heads = config_.heads;
  const std::size_t hd = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(hd));
  const double* P = params_.values.data();

  Gradients grad = loss.direct.values.empty() ? Gradients(layout_.total) : loss.direct;
  if (grad.size() != layout_.total) throw ValidationError("loss gradient has the wrong size");
  double* G = grad.values.data();
  if (loss.d_hidden.empty()) return grad;
  if (loss.d_hidden.size() != n * d) throw ValidationError("loss hidden gradient has the wrong shape");

  std::vector<double> dx(n * d, 0.0);
  layer_norm_backward(loss.d_hidden.data(), pass.xhatf.data(), pass.rstdf.data(), P + layout_.lnf_g, dx.data(),
                      G + layout_.lnf_g, G + layout_.lnf_b, n, d);

  for (std::size_t li = config_.depth; li-- > 0;) {
    const auto& L = layout_.layers[li];
    const auto& C = pass.layers_[li];

    // FFN block: x = x_mid + W2 gelu(W1 LN2(x_mid))
    std::vector<double> dg(n * f, 0.0);
    linear_backward(C.g.data(), P + L.w2, dx.data(), dg.data(), G + L.w2, G + L.b2, n, f, d);
    for (std::size_t i = 0; i < n * f; ++i) dg[i] *= gelu_grad(C.h1[i]);
    std::vector<double> db(n * d, 0.0);
    linear_backward(C.b.data(), P + L.w1, dg.data(), db.data(), G + L.w1, G + L.b1, n, d, f);
    std::vector<double> dx_mid = dx;
    layer_norm_backward(db.data(), C.xhat2.data(), C.rstd2.data(), P + L.ln2_g, dx_mid.data(), G + L.ln2_g,
                        G + L.ln2_b, n, d);

    // Attention block: x_mid = x_in + Wo attn(LN1(x_in))
    std::vector<double> dctx(n * d, 0.0);
    linear_backward(C.ctx.data(), P + L.wo, dx_mid.data(), dctx.data(), G + L.wo, G + L.bo, n, d, d);

    std::vector<double> dq(n * d, 0.0), dk(n * d, 0.0), dv(n * d, 0.0);
    std::vector<double> dp(n);
    for (std::size_t h = 0; h < heads; ++h) {
      const std::size_t c0 = h * hd;
      for (std::size_t i = 0; i < n; ++i) {
        const double* row = C.probs.data() + (h * n + i) * n;
        const double* dci = dctx.data() + i * d + c0;
        double dot = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
          double s = 0.0;
          const double* vj = C.v.data() + j * d + c0;
          for (std::size_t c = 0; c < hd; ++c) s += dci[c] * vj[c];
          dp[j] = s;
          dot += row[j] * s;
          if (row[j] != 0.0) {
            double* dvj = dv.data() + j * d + c0;
            for (std::size_t c = 0; c < hd; ++c) dvj[c] += row[j] * dci[c];
          }
        }
        for (std::size_t j = 0; j < n; ++j) {
          if (row[j] == 0.0) continue;
          const double ds = row[j] * (dp[j] - dot) * scale;
          const double* kj = C.k.data() + j * d + c0;
          const double* qi = C.q.data() + i * d + c0;
          double* dqi = dq.data() + i * d + c0;
          double* dkj = dk.data() + j * d + c0;
          for (std::size_t c = 0; c < hd; ++c) {
            dqi[c] += ds * kj[c];
            dkj[c] += ds * qi[c];
          }
        }
      }
    }

    std::vector<double> da(n * d, 0.0);
    linear_backward(C.a.data(), P + L.wq, dq.data(), da.data(), G + L.wq, G + L.bq, n, d, d);
    linear_backward(C.a.data(), P + L.wk, dk.data(), da.data(), G + L.wk, G + L.bk, n, d, d);
    linear_backward(C.a.data(), P + L.wv, dv.data(), da.data(), G + L.wv, G + L.bv, n, d, d);
    dx = dx_mid;
    layer_norm_backward(da.data(), C.xhat1.data(), C.rstd1.data(), P + L.ln1_g, dx.data(), G + L.ln1_g, G + L.ln1_b,
                        n, d);
  }

  for (std::size_t i = 0; i < n; ++i) {
    double* ge = G + layout_.tok_emb + static_cast<std::size_t>(pass.ids_[i]) * d;
    double* gp = G + layout_.pos_emb + i * d;
    for (std::size_t c = 0; c < d; ++c) {
      ge[c] += dx[i * d + c];
      gp[c] += dx[i * d + c];
    }
  }
  return grad;
}

}  // namespace pltr
