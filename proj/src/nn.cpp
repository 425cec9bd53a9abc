#include "rvlm/nn.hpp"

#include <cmath>

namespace rvlm {

namespace {
constexpr int kMlpWidthRatio = 2;
}

Mat uniform_init(Eigen::Index rows, Eigen::Index cols, double bound, Rng& rng) {
    Mat m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = rng.uniform(-bound, bound);
    return m;
}

LayerNormParams LayerNormParams::init(int d) {
    return {Tensor::param(Mat::Ones(1, d)), Tensor::param(Mat::Zero(1, d))};
}

void LayerNormParams::collect(ParamMap& out, const std::string& prefix) const {
    out.add(prefix + ".gain", gain);
    out.add(prefix + ".bias", bias);
}

AttentionParams AttentionParams::init(int d, Rng& rng) {
    double b = 1.0 / std::sqrt(static_cast<double>(d));
    return {Tensor::param(uniform_init(d, d, b, rng)), Tensor::param(uniform_init(d, d, b, rng)),
            Tensor::param(uniform_init(d, d, b, rng)), Tensor::param(uniform_init(d, d, b, rng))};
}

void AttentionParams::collect(ParamMap& out, const std::string& prefix) const {
    out.add(prefix + ".wq", wq);
    out.add(prefix + ".wk", wk);
    out.add(prefix + ".wv", wv);
    out.add(prefix + ".wo", wo);
}

MlpParams MlpParams::init(int d, Rng& rng) {
    int h = kMlpWidthRatio * d;
    double b = 1.0 / std::sqrt(static_cast<double>(d));
    double bh = 1.0 / std::sqrt(static_cast<double>(h));
    return {Tensor::param(uniform_init(d, h, b, rng)), Tensor::param(Mat::Zero(1, h)),
            Tensor::param(uniform_init(h, d, bh, rng)), Tensor::param(Mat::Zero(1, d))};
}

void MlpParams::collect(ParamMap& out, const std::string& prefix) const {
    out.add(prefix + ".w1", w1);
    out.add(prefix + ".b1", b1);
    out.add(prefix + ".w2", w2);
    out.add(prefix + ".b2", b2);
}

EncoderLayerParams EncoderLayerParams::init(int d, Rng& rng) {
    return {LayerNormParams::init(d), LayerNormParams::init(d), AttentionParams::init(d, rng),
            MlpParams::init(d, rng)};
}

void EncoderLayerParams::collect(ParamMap& out, const std::string& prefix) const {
    ln_attn.collect(out, prefix + ".ln_attn");
    ln_mlp.collect(out, prefix + ".ln_mlp");
    attn.collect(out, prefix + ".attn");
    mlp.collect(out, prefix + ".mlp");
}

DecoderLayerParams DecoderLayerParams::init(int d, Rng& rng) {
    return {LayerNormParams::init(d), LayerNormParams::init(d), LayerNormParams::init(d),
            AttentionParams::init(d, rng), AttentionParams::init(d, rng), MlpParams::init(d, rng)};
}

void DecoderLayerParams::collect(ParamMap& out, const std::string& prefix) const {
    ln_self.collect(out, prefix + ".ln_self");
    ln_cross.collect(out, prefix + ".ln_cross");
    ln_mlp.collect(out, prefix + ".ln_mlp");
    self_attn.collect(out, prefix + ".self_attn");
    cross_attn.collect(out, prefix + ".cross_attn");
    mlp.collect(out, prefix + ".mlp");
}

PerceiverLayerParams PerceiverLayerParams::init(int d, Rng& rng) {
    return {LayerNormParams::init(d), LayerNormParams::init(d), LayerNormParams::init(d),
            AttentionParams::init(d, rng), AttentionParams::init(d, rng), MlpParams::init(d, rng)};
}

void PerceiverLayerParams::collect(ParamMap& out, const std::string& prefix) const {
    ln_query.collect(out, prefix + ".ln_query");
    ln_self.collect(out, prefix + ".ln_self");
    ln_mlp.collect(out, prefix + ".ln_mlp");
    cross_attn.collect(out, prefix + ".cross_attn");
    self_attn.collect(out, prefix + ".self_attn");
    mlp.collect(out, prefix + ".mlp");
}

Mat sinusoidal_positions(Eigen::Index len, int d, Eigen::Index skip) {
    Mat pe = Mat::Zero(len, d);
    for (Eigen::Index pos = skip; pos < len; ++pos) {
        for (int i = 0; i < d; i += 2) {
            double angle = static_cast<double>(pos - skip) /
                           std::pow(10000.0, static_cast<double>(i) / static_cast<double>(d));
            pe(pos, i) = std::sin(angle);
            if (i + 1 < d) pe(pos, i + 1) = std::cos(angle);
        }
    }
    return pe;
}

Tensor layer_norm_affine(const Tensor& x, const LayerNormParams& ln) {
    return add_row_broadcast(mul_row_broadcast(layer_norm_rows(x), ln.gain), ln.bias);
}

Tensor attention(const Tensor& queries, const Tensor& keys_values, const AttentionParams& p,
                 const Mat* additive_mask) {
    Tensor q = matmul(queries, p.wq);
    Tensor k = matmul(keys_values, p.wk);
    Tensor v = matmul(keys_values, p.wv);
    double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(q.cols()));
    Tensor scores = scale(matmul(q, transpose(k)), inv_sqrt_d);
    if (additive_mask) scores = add(scores, Tensor::constant(*additive_mask));
    Tensor attn = softmax_rows(scores);
    return matmul(matmul(attn, v), p.wo);
}

Tensor mlp(const Tensor& x, const MlpParams& p) {
    Tensor h = gelu(add_row_broadcast(matmul(x, p.w1), p.b1));
    return add_row_broadcast(matmul(h, p.w2), p.b2);
}

Tensor encoder_layer(const Tensor& x, const EncoderLayerParams& p, const Tensor* mask) {
    Tensor normed = layer_norm_affine(x, p.ln_attn);
    if (mask) normed = scale_rows(normed, *mask);
    Tensor h = add(attention(normed, normed, p.attn), x);
    return add(mlp(layer_norm_affine(h, p.ln_mlp), p.mlp), h);
}

Tensor decoder_layer(const Tensor& x, const Tensor& memory, const DecoderLayerParams& p,
                     const Mat* causal) {
    Tensor h = x;
    Tensor n1 = layer_norm_affine(h, p.ln_self);
    h = add(attention(n1, n1, p.self_attn, causal), h);
    h = add(attention(layer_norm_affine(h, p.ln_cross), memory, p.cross_attn), h);
    return add(mlp(layer_norm_affine(h, p.ln_mlp), p.mlp), h);
}

Tensor perceiver_layer(const Tensor& latent, const Tensor& compressed,
                       const PerceiverLayerParams& p) {
    Tensor zhat = add(attention(layer_norm_affine(latent, p.ln_query), compressed, p.cross_attn),
                      latent);
    Tensor n = layer_norm_affine(zhat, p.ln_self);
    zhat = add(attention(n, n, p.self_attn), zhat);
    return add(mlp(layer_norm_affine(zhat, p.ln_mlp), p.mlp), zhat);
}

Mat causal_mask(Eigen::Index len) {
    Mat m = Mat::Zero(len, len);
    for (Eigen::Index i = 0; i < len; ++i)
        for (Eigen::Index j = i + 1; j < len; ++j) m(i, j) = -1e9;
    return m;
}

void sgd_step(ParamMap& params, double lr) {
    for (auto& [name, t] : params.items) {
        t.value_mut() -= lr * t.grad();
        t.zero_grad();
    }
}

}  // namespace rvlm
