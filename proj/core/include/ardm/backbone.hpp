#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ardm/ordering.hpp"
#include "ardm/rng.hpp"
#include "ardm/transitions.hpp"

namespace ardm {

enum class Parametrization { data, direct };

// Architecture of the conditional network f(input, mask, stage, t).
// The data parametrization outputs K logits per dimension; the direct
// parametrization outputs one logit per branch child and only makes sense
// with at least two stages.
struct ModelConfig {
  uint32_t dims = 0;
  uint32_t num_classes = 0;
  uint32_t stages = 1;
  uint32_t branching = 2;
  uint32_t embed_width = 8;
  uint32_t hidden_width = 32;
  uint32_t depth = 2;
  Parametrization parametrization = Parametrization::data;
  bool time_input = true;
  bool positional = true;

  uint32_t output_width() const {
    return parametrization == Parametrization::data ? num_classes : branching;
  }
  // Per-dimension input: class embedding, normalized value, mask bit,
  // stage one-hot, optional t/D scalar.
  uint32_t feature_width() const {
    return embed_width + 2 + stages + (time_input ? 1 : 0);
  }

  void validate() const {
    if (dims == 0) throw std::invalid_argument("dims must be positive");
    if (num_classes < 2) throw std::invalid_argument("need at least 2 classes");
    if (stages == 0) throw std::invalid_argument("stages must be positive");
    if (embed_width == 0 || hidden_width == 0) {
      throw std::invalid_argument("widths must be positive");
    }
    if (parametrization == Parametrization::direct && stages < 2) {
      throw std::invalid_argument(
          "direct parametrization requires a multi-stage model");
    }
  }
};

// Offsets of the named parameter slices inside the flat array.
struct ParamLayout {
  struct Block {
    size_t w1, b1, w2, b2;
  };
  size_t class_embed = 0;
  size_t w_in = 0, b_in = 0;
  size_t pos = 0;
  bool has_pos = false;
  std::vector<Block> blocks;
  size_t w_out = 0, b_out = 0;
  size_t total = 0;
};

inline ParamLayout make_layout(const ModelConfig& cfg) {
  ParamLayout lay;
  size_t at = 0;
  size_t e = cfg.embed_width, h = cfg.hidden_width;
  size_t f = cfg.feature_width(), o = cfg.output_width();
  lay.class_embed = at;
  at += static_cast<size_t>(cfg.num_classes) * e;
  lay.w_in = at;
  at += h * f;
  lay.b_in = at;
  at += h;
  lay.has_pos = cfg.positional;
  lay.pos = at;
  if (cfg.positional) at += static_cast<size_t>(cfg.dims) * h;
  for (uint32_t l = 0; l < cfg.depth; ++l) {
    ParamLayout::Block b;
    b.w1 = at;
    at += h * 2 * h;
    b.b1 = at;
    at += h;
    b.w2 = at;
    at += h * h;
    b.b2 = at;
    at += h;
    lay.blocks.push_back(b);
  }
  lay.w_out = at;
  at += o * h;
  lay.b_out = at;
  at += o;
  lay.total = at;
  return lay;
}

template <typename T>
struct ParamStore {
  std::vector<T> params;
  std::vector<T> grads;
  std::vector<T> ema;
  std::vector<T> adam_m;
  std::vector<T> adam_v;
  uint64_t step = 0;
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  uint64_t warmup_steps = 100;
  double clip_norm = 100.0;
};

// Saved forward-pass state for one example, consumed by the backward pass.
template <typename T>
struct Activations {
  std::vector<T> features;                  // D x F
  std::vector<T> z_in;                      // D x H
  std::vector<std::vector<T>> block_in;     // depth of D x H
  std::vector<std::vector<T>> context;      // depth of H
  std::vector<std::vector<T>> z1;           // depth of D x H
  std::vector<std::vector<T>> a1;           // depth of D x H
  std::vector<T> h_final;                   // D x H
  std::vector<T> logits;                    // D x O
};

template <typename T>
class Network {
 public:
  explicit Network(ModelConfig cfg) : cfg_(cfg), layout_(make_layout(cfg)) {
    cfg_.validate();
    store_.params.assign(layout_.total, T(0));
    store_.grads.assign(layout_.total, T(0));
    store_.ema.assign(layout_.total, T(0));
    store_.adam_m.assign(layout_.total, T(0));
    store_.adam_v.assign(layout_.total, T(0));
  }

  const ModelConfig& config() const { return cfg_; }
  const ParamLayout& layout() const { return layout_; }
  ParamStore<T>& store() { return store_; }
  const ParamStore<T>& store() const { return store_; }
  size_t param_count() const { return layout_.total; }

  // Trunk weights scaled by fan-in, output head zeroed so an untrained
  // network is exactly uniform. The EMA shadow starts as a copy.
  void init_params(Rng& rng) {
    auto fill_normal = [&](size_t off, size_t n, double scale) {
      for (size_t i = 0; i < n; ++i) {
        store_.params[off + i] = static_cast<T>(rng.normal() * scale);
      }
    };
    size_t e = cfg_.embed_width, h = cfg_.hidden_width;
    size_t f = cfg_.feature_width(), o = cfg_.output_width();
    fill_normal(layout_.class_embed, cfg_.num_classes * e, 0.5);
    fill_normal(layout_.w_in, h * f, 1.0 / std::sqrt(double(f)));
    std::fill_n(&store_.params[layout_.b_in], h, T(0));
    if (layout_.has_pos) fill_normal(layout_.pos, size_t(cfg_.dims) * h, 0.02);
    for (const auto& blk : layout_.blocks) {
      fill_normal(blk.w1, h * 2 * h, 1.0 / std::sqrt(double(2 * h)));
      std::fill_n(&store_.params[blk.b1], h, T(0));
      fill_normal(blk.w2, h * h, 1.0 / std::sqrt(double(h)));
      std::fill_n(&store_.params[blk.b2], h, T(0));
    }
    std::fill_n(&store_.params[layout_.w_out], o * h, T(0));
    std::fill_n(&store_.params[layout_.b_out], o, T(0));
    store_.ema = store_.params;
    std::fill(store_.adam_m.begin(), store_.adam_m.end(), T(0));
    std::fill(store_.adam_v.begin(), store_.adam_v.end(), T(0));
    store_.step = 0;
  }

  // One example. input holds class values (absorbed where mask is 0),
  // mask marks already-generated dimensions, stage is 1-based, t in 1..D.
  std::vector<T> forward(std::span<const uint32_t> input,
                         std::span<const uint8_t> mask, uint32_t stage,
                         uint32_t t, Activations<T>* acts = nullptr) const {
    size_t d_count = cfg_.dims;
    if (input.size() != d_count || mask.size() != d_count) {
      throw std::invalid_argument("input shape does not match the model");
    }
    if (stage < 1 || stage > cfg_.stages || t < 1 || t > cfg_.dims) {
      throw std::invalid_argument("stage or step out of range");
    }
    size_t e = cfg_.embed_width, h = cfg_.hidden_width;
    size_t f = cfg_.feature_width(), o = cfg_.output_width();
    const T* p = store_.params.data();

    std::vector<T> features(d_count * f, T(0));
    for (size_t d = 0; d < d_count; ++d) {
      uint32_t cls = input[d];
      if (cls >= cfg_.num_classes) {
        throw std::invalid_argument("class value out of range");
      }
      T* row = &features[d * f];
      const T* emb = p + layout_.class_embed + size_t(cls) * e;
      for (size_t i = 0; i < e; ++i) row[i] = emb[i];
      row[e] = static_cast<T>((cls + 0.5) / cfg_.num_classes - 0.5);
      row[e + 1] = mask[d] ? T(1) : T(0);
      row[e + 2 + (stage - 1)] = T(1);
      if (cfg_.time_input) {
        row[f - 1] = static_cast<T>(double(t) / cfg_.dims);
      }
    }

    std::vector<T> z_in(d_count * h);
    std::vector<T> hcur(d_count * h);
    for (size_t d = 0; d < d_count; ++d) {
      const T* row = &features[d * f];
      for (size_t j = 0; j < h; ++j) {
        T acc = p[layout_.b_in + j];
        const T* w = p + layout_.w_in + j * f;
        for (size_t i = 0; i < f; ++i) acc += w[i] * row[i];
        if (layout_.has_pos) acc += p[layout_.pos + d * h + j];
        z_in[d * h + j] = acc;
        hcur[d * h + j] = silu(acc);
      }
    }

    if (acts) {
      acts->features = features;
      acts->z_in = z_in;
      acts->block_in.clear();
      acts->context.clear();
      acts->z1.clear();
      acts->a1.clear();
    }

    std::vector<T> z1(d_count * h), a1(d_count * h), ctx(h);
    for (const auto& blk : layout_.blocks) {
      for (size_t j = 0; j < h; ++j) {
        T acc = T(0);
        for (size_t d = 0; d < d_count; ++d) acc += hcur[d * h + j];
        ctx[j] = acc / static_cast<T>(d_count);
      }
      if (acts) {
        acts->block_in.push_back(hcur);
        acts->context.push_back(ctx);
      }
      for (size_t d = 0; d < d_count; ++d) {
        for (size_t j = 0; j < h; ++j) {
          T acc = p[blk.b1 + j];
          const T* w = p + blk.w1 + j * 2 * h;
          const T* hd = &hcur[d * h];
          for (size_t i = 0; i < h; ++i) acc += w[i] * hd[i];
          for (size_t i = 0; i < h; ++i) acc += w[h + i] * ctx[i];
          z1[d * h + j] = acc;
          a1[d * h + j] = silu(acc);
        }
      }
      if (acts) {
        acts->z1.push_back(z1);
        acts->a1.push_back(a1);
      }
      for (size_t d = 0; d < d_count; ++d) {
        for (size_t j = 0; j < h; ++j) {
          T acc = p[blk.b2 + j];
          const T* w = p + blk.w2 + j * h;
          const T* ad = &a1[d * h];
          for (size_t i = 0; i < h; ++i) acc += w[i] * ad[i];
          hcur[d * h + j] += acc;
        }
      }
    }

    std::vector<T> logits(d_count * o);
    for (size_t d = 0; d < d_count; ++d) {
      for (size_t k = 0; k < o; ++k) {
        T acc = p[layout_.b_out + k];
        const T* w = p + layout_.w_out + k * h;
        const T* hd = &hcur[d * h];
        for (size_t i = 0; i < h; ++i) acc += w[i] * hd[i];
        logits[d * o + k] = acc;
      }
    }
    if (acts) {
      acts->h_final = hcur;
      acts->logits = logits;
    }
    return logits;
  }

  // Accumulates parameter gradients for one example given the gradient of
  // the loss with respect to the logits. Mirrors forward() layer by layer.
  void accumulate_grad(std::span<const uint32_t> input,
                       const Activations<T>& acts, std::span<const T> dlogits) {
    size_t d_count = cfg_.dims;
    size_t e = cfg_.embed_width, h = cfg_.hidden_width;
    size_t f = cfg_.feature_width(), o = cfg_.output_width();
    const T* p = store_.params.data();
    T* g = store_.grads.data();

    std::vector<T> dh(d_count * h, T(0));
    for (size_t d = 0; d < d_count; ++d) {
      const T* hd = &acts.h_final[d * h];
      for (size_t k = 0; k < o; ++k) {
        T gd = dlogits[d * o + k];
        if (gd == T(0)) continue;
        g[layout_.b_out + k] += gd;
        T* wrow = g + layout_.w_out + k * h;
        const T* w = p + layout_.w_out + k * h;
        for (size_t i = 0; i < h; ++i) {
          wrow[i] += gd * hd[i];
          dh[d * h + i] += gd * w[i];
        }
      }
    }

    std::vector<T> dctx(h), du2(h);
    for (size_t l = layout_.blocks.size(); l-- > 0;) {
      const auto& blk = layout_.blocks[l];
      const std::vector<T>& hin = acts.block_in[l];
      const std::vector<T>& ctx = acts.context[l];
      const std::vector<T>& z1 = acts.z1[l];
      const std::vector<T>& a1 = acts.a1[l];
      std::fill(dctx.begin(), dctx.end(), T(0));

      for (size_t d = 0; d < d_count; ++d) {
        // dh holds the gradient at the block output; the residual path
        // passes it straight through while the branch contributes more.
        const T* dout = &dh[d * h];
        std::vector<T> da1(h, T(0));
        for (size_t j = 0; j < h; ++j) {
          T gd = dout[j];
          if (gd == T(0)) continue;
          g[blk.b2 + j] += gd;
          T* wrow = g + blk.w2 + j * h;
          const T* w = p + blk.w2 + j * h;
          const T* ad = &a1[d * h];
          for (size_t i = 0; i < h; ++i) {
            wrow[i] += gd * ad[i];
            da1[i] += gd * w[i];
          }
        }
        std::fill(du2.begin(), du2.end(), T(0));
        for (size_t j = 0; j < h; ++j) {
          T dz = da1[j] * silu_grad(z1[d * h + j]);
          if (dz == T(0)) continue;
          g[blk.b1 + j] += dz;
          T* wrow = g + blk.w1 + j * 2 * h;
          const T* w = p + blk.w1 + j * 2 * h;
          const T* hd = &hin[d * h];
          for (size_t i = 0; i < h; ++i) {
            wrow[i] += dz * hd[i];
            wrow[h + i] += dz * ctx[i];
          }
          for (size_t i = 0; i < h; ++i) dh[d * h + i] += dz * w[i];
          for (size_t i = 0; i < h; ++i) du2[i] += dz * w[h + i];
        }
        for (size_t i = 0; i < h; ++i) dctx[i] += du2[i];
      }
      // The context was a mean over dimensions of the block input.
      for (size_t d = 0; d < d_count; ++d) {
        for (size_t i = 0; i < h; ++i) {
          dh[d * h + i] += dctx[i] / static_cast<T>(d_count);
        }
      }
    }

    for (size_t d = 0; d < d_count; ++d) {
      const T* frow = &acts.features[d * f];
      std::vector<T> df(f, T(0));
      for (size_t j = 0; j < h; ++j) {
        T dz = dh[d * h + j] * silu_grad(acts.z_in[d * h + j]);
        if (dz == T(0)) continue;
        g[layout_.b_in + j] += dz;
        if (layout_.has_pos) g[layout_.pos + d * h + j] += dz;
        T* wrow = g + layout_.w_in + j * f;
        const T* w = p + layout_.w_in + j * f;
        for (size_t i = 0; i < f; ++i) {
          wrow[i] += dz * frow[i];
          df[i] += dz * w[i];
        }
      }
      T* emb = g + layout_.class_embed + size_t(input[d]) * e;
      for (size_t i = 0; i < e; ++i) emb[i] += df[i];
    }
  }

  void zero_grads() {
    std::fill(store_.grads.begin(), store_.grads.end(), T(0));
  }

  // Global-norm clip, linear warmup, bias-corrected Adam. Throws if any
  // parameter stops being finite.
  void adam_step(const AdamConfig& opt) {
    double norm_sq = 0.0;
    for (T gv : store_.grads) norm_sq += double(gv) * double(gv);
    double norm = std::sqrt(norm_sq);
    double scale = 1.0;
    if (opt.clip_norm > 0.0 && norm > opt.clip_norm) {
      scale = opt.clip_norm / norm;
    }
    double mult = opt.warmup_steps == 0
                      ? 1.0
                      : std::min(1.0, double(store_.step) / opt.warmup_steps);
    double lr = opt.lr * mult;
    uint64_t t = store_.step + 1;
    double bc1 = 1.0 - std::pow(opt.beta1, double(t));
    double bc2 = 1.0 - std::pow(opt.beta2, double(t));
    for (size_t i = 0; i < store_.params.size(); ++i) {
      double gv = double(store_.grads[i]) * scale;
      double m = opt.beta1 * double(store_.adam_m[i]) + (1.0 - opt.beta1) * gv;
      double v = opt.beta2 * double(store_.adam_v[i]) + (1.0 - opt.beta2) * gv * gv;
      store_.adam_m[i] = static_cast<T>(m);
      store_.adam_v[i] = static_cast<T>(v);
      double update = lr * (m / bc1) / (std::sqrt(v / bc2) + opt.eps);
      store_.params[i] = static_cast<T>(double(store_.params[i]) - update);
      if (!std::isfinite(double(store_.params[i]))) {
        throw std::domain_error("parameter " + std::to_string(i) +
                                " became non-finite during the update");
      }
    }
    store_.step += 1;
  }

  void ema_update(double momentum) {
    if (!(momentum > 0.0 && momentum < 1.0)) {
      throw std::invalid_argument("EMA momentum must be in (0, 1)");
    }
    for (size_t i = 0; i < store_.params.size(); ++i) {
      store_.ema[i] = static_cast<T>(momentum * double(store_.ema[i]) +
                                     (1.0 - momentum) * double(store_.params[i]));
    }
  }

  // Evaluation uses the averaged parameters; callers swap back afterwards.
  void swap_ema() { std::swap(store_.params, store_.ema); }

  static T silu(T z) {
    T s = T(1) / (T(1) + std::exp(-z));
    return z * s;
  }
  static T silu_grad(T z) {
    T s = T(1) / (T(1) + std::exp(-z));
    return s * (T(1) + z * (T(1) - s));
  }

 private:
  ModelConfig cfg_;
  ParamLayout layout_;
  ParamStore<T> store_;
};

}  // namespace ardm
