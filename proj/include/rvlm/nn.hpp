// Transformer building blocks shared by the base encoder, retrieval heads,
// value-compression head, fusion stack and decoder. Single-head attention and
// a 2x-width GELU MLP keep parameter counts small enough for exhaustive
// finite-difference checks.

#pragma once

#include "rvlm/rng.hpp"
#include "rvlm/tensor.hpp"

#include <string>
#include <utility>
#include <vector>

namespace rvlm {

// Named parameter handles; shared across collection, SGD, FD checks.
struct ParamMap {
    std::vector<std::pair<std::string, Tensor>> items;

    void add(std::string name, Tensor t) { items.emplace_back(std::move(name), std::move(t)); }
    void zero_grads() {
        for (auto& [name, t] : items) t.zero_grad();
    }
};

struct LayerNormParams {
    Tensor gain;  // 1 x d, init 1
    Tensor bias;  // 1 x d, init 0

    static LayerNormParams init(int d);
    void collect(ParamMap& out, const std::string& prefix) const;
};

struct AttentionParams {
    Tensor wq, wk, wv, wo;  // d x d

    static AttentionParams init(int d, Rng& rng);
    void collect(ParamMap& out, const std::string& prefix) const;
};

struct MlpParams {
    Tensor w1, b1;  // d x h, 1 x h
    Tensor w2, b2;  // h x d, 1 x d

    static MlpParams init(int d, Rng& rng);
    void collect(ParamMap& out, const std::string& prefix) const;
};

// Pre-norm encoder layer: x += Attn(LN(x)); x += MLP(LN(x)).
struct EncoderLayerParams {
    LayerNormParams ln_attn, ln_mlp;
    AttentionParams attn;
    MlpParams mlp;

    static EncoderLayerParams init(int d, Rng& rng);
    void collect(ParamMap& out, const std::string& prefix) const;
};

struct DecoderLayerParams {
    LayerNormParams ln_self, ln_cross, ln_mlp;
    AttentionParams self_attn, cross_attn;
    MlpParams mlp;

    static DecoderLayerParams init(int d, Rng& rng);
    void collect(ParamMap& out, const std::string& prefix) const;
};

// One value-compression layer: pre-norm cross-attention onto the compressed
// sequence, then pre-norm self-attention, then pre-norm MLP, residuals each.
struct PerceiverLayerParams {
    LayerNormParams ln_query, ln_self, ln_mlp;
    AttentionParams cross_attn, self_attn;
    MlpParams mlp;

    static PerceiverLayerParams init(int d, Rng& rng);
    void collect(ParamMap& out, const std::string& prefix) const;
};

Mat uniform_init(Eigen::Index rows, Eigen::Index cols, double bound, Rng& rng);

// Sinusoidal positional encodings for rows [0, len); optionally zero the
// first `skip` rows (the CLS slot carries none).
Mat sinusoidal_positions(Eigen::Index len, int d, Eigen::Index skip = 0);

Tensor layer_norm_affine(const Tensor& x, const LayerNormParams& ln);

// Single-head scaled dot-product attention. `additive_mask`, when present,
// is added to the score matrix before the softmax (causal masking).
Tensor attention(const Tensor& queries, const Tensor& keys_values, const AttentionParams& p,
                 const Mat* additive_mask = nullptr);

Tensor mlp(const Tensor& x, const MlpParams& p);

// mask, when present, is a rows(x) x 1 column multiplied into the
// pre-normalized representation before self-attention. With mask == nullptr
// the op sequence is bit-identical to the plain pre-norm layer.
Tensor encoder_layer(const Tensor& x, const EncoderLayerParams& p, const Tensor* mask = nullptr);

Tensor decoder_layer(const Tensor& x, const Tensor& memory, const DecoderLayerParams& p,
                     const Mat* causal_mask);

Tensor perceiver_layer(const Tensor& latent, const Tensor& compressed, const PerceiverLayerParams& p);

Mat causal_mask(Eigen::Index len);

// Plain SGD over every named parameter; zeroes grads after the update.
void sgd_step(ParamMap& params, double lr);

}  // namespace rvlm
