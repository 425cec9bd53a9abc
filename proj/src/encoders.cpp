#include "rvlm/encoders.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <stdexcept>

namespace rvlm {

std::vector<int> featurize_text(const std::string& raw, int vocab) {
    if (vocab < 2) throw std::invalid_argument("featurize_text: vocab must be >= 2");
    std::vector<int> ids;
    std::string word;
    auto flush = [&] {
        if (!word.empty()) {
            ids.push_back(static_cast<int>(fnv1a64(word) % static_cast<std::uint64_t>(vocab)));
            word.clear();
        }
    };
    for (char c : raw) {
        if (std::isspace(static_cast<unsigned char>(c)))
            flush();
        else
            word.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
    flush();
    return ids;
}

std::vector<Eigen::VectorXd> featurize_image(const std::string& descriptor, int num_patches,
                                             int d_img) {
    if (num_patches < 1) throw std::invalid_argument("featurize_image: need at least one patch");
    std::vector<Eigen::VectorXd> patches;
    patches.reserve(static_cast<size_t>(num_patches));
    for (int p = 0; p < num_patches; ++p) {
        Rng rng(fnv1a64(descriptor) ^ (0x517cc1b727220a95ull * static_cast<std::uint64_t>(p + 1)));
        Eigen::VectorXd v(d_img);
        for (int i = 0; i < d_img; ++i) v(i) = rng.normal();
        double n = v.norm();
        if (n == 0.0) v(0) = 1.0;  // astronomically unlikely; keep the contract anyway
        else v /= n;
        patches.push_back(std::move(v));
    }
    return patches;
}

EncoderStack EncoderStack::init(const EncoderConfig& cfg, Rng& rng) {
    EncoderStack s;
    s.cfg = cfg;
    double b = 1.0 / std::sqrt(static_cast<double>(cfg.d));
    s.token_embedding = Tensor::param(uniform_init(cfg.vocab, cfg.d, b, rng));
    s.image_projection = Tensor::param(uniform_init(cfg.d_img, cfg.d, b, rng));
    s.cls_embedding = Tensor::param(uniform_init(1, cfg.d, b, rng));
    for (int i = 0; i < cfg.base_layers; ++i) s.base_layers.push_back(EncoderLayerParams::init(cfg.d, rng));
    for (int i = 0; i < cfg.head_layers; ++i) {
        s.query_head_layers.push_back(EncoderLayerParams::init(cfg.d, rng));
        s.key_head_layers.push_back(EncoderLayerParams::init(cfg.d, rng));
    }
    s.query_proj = Tensor::param(uniform_init(cfg.d, cfg.d, b, rng));
    s.key_proj = Tensor::param(uniform_init(cfg.d, cfg.d, b, rng));
    return s;
}

namespace {

void collect_layers(const std::vector<EncoderLayerParams>& layers, ParamMap& out,
                    const std::string& prefix) {
    for (size_t i = 0; i < layers.size(); ++i)
        layers[i].collect(out, prefix + "." + std::to_string(i));
}

std::vector<EncoderLayerParams> freeze_layers(const std::vector<EncoderLayerParams>& layers) {
    std::vector<EncoderLayerParams> out;
    out.reserve(layers.size());
    for (const auto& l : layers) {
        EncoderLayerParams f;
        f.ln_attn = {Tensor::constant(l.ln_attn.gain.value()), Tensor::constant(l.ln_attn.bias.value())};
        f.ln_mlp = {Tensor::constant(l.ln_mlp.gain.value()), Tensor::constant(l.ln_mlp.bias.value())};
        f.attn = {Tensor::constant(l.attn.wq.value()), Tensor::constant(l.attn.wk.value()),
                  Tensor::constant(l.attn.wv.value()), Tensor::constant(l.attn.wo.value())};
        f.mlp = {Tensor::constant(l.mlp.w1.value()), Tensor::constant(l.mlp.b1.value()),
                 Tensor::constant(l.mlp.w2.value()), Tensor::constant(l.mlp.b2.value())};
        out.push_back(std::move(f));
    }
    return out;
}

}  // namespace

void EncoderStack::collect(ParamMap& out, const std::string& prefix) const {
    out.add(prefix + ".token_embedding", token_embedding);
    out.add(prefix + ".image_projection", image_projection);
    out.add(prefix + ".cls_embedding", cls_embedding);
    collect_layers(base_layers, out, prefix + ".base");
    collect_layers(query_head_layers, out, prefix + ".query_head");
    collect_layers(key_head_layers, out, prefix + ".key_head");
    out.add(prefix + ".query_proj", query_proj);
    out.add(prefix + ".key_proj", key_proj);
}

EncoderStack EncoderStack::clone_frozen() const {
    EncoderStack s;
    s.cfg = cfg;
    s.token_embedding = Tensor::constant(token_embedding.value());
    s.image_projection = Tensor::constant(image_projection.value());
    s.cls_embedding = Tensor::constant(cls_embedding.value());
    s.base_layers = freeze_layers(base_layers);
    s.query_head_layers = freeze_layers(query_head_layers);
    s.key_head_layers = freeze_layers(key_head_layers);
    s.query_proj = Tensor::constant(query_proj.value());
    s.key_proj = Tensor::constant(key_proj.value());
    return s;
}

Query make_query(std::string id, const std::string& text, const std::string& image_descriptor,
                 const EncoderConfig& cfg) {
    Query q;
    q.id = std::move(id);
    q.text_tokens = featurize_text(text, cfg.vocab);
    if (!image_descriptor.empty())
        q.patches = featurize_image(image_descriptor, cfg.patches_per_image, cfg.d_img);
    return q;
}

Query query_from_item(const KnowledgeItem& item, const EncoderConfig& cfg) {
    return make_query(item.id, item.surface_text(), item.image_descriptor, cfg);
}

Tensor base_encode(const Query& input, const EncoderStack& enc) {
    if (input.empty()) throw std::invalid_argument("base_encode: query has no modality");
    std::vector<Tensor> parts;
    parts.push_back(enc.cls_embedding);
    if (input.has_image()) {
        Mat pm(static_cast<Eigen::Index>(input.patches.size()), enc.cfg.d_img);
        for (size_t i = 0; i < input.patches.size(); ++i)
            pm.row(static_cast<Eigen::Index>(i)) = input.patches[i].transpose();
        parts.push_back(matmul(Tensor::constant(std::move(pm)), enc.image_projection));
    }
    if (input.has_text()) parts.push_back(gather_rows(enc.token_embedding, input.text_tokens));
    Tensor x = concat_rows(parts);
    x = add(x, Tensor::constant(sinusoidal_positions(x.rows(), enc.cfg.d, /*skip=*/1)));
    for (const auto& layer : enc.base_layers) x = encoder_layer(x, layer);
    return x;
}

namespace {

Tensor head_embed(const Tensor& base_out, const std::vector<EncoderLayerParams>& layers,
                  const Tensor& proj) {
    Tensor h = base_out;
    for (const auto& layer : layers) h = encoder_layer(h, layer);
    Tensor cls = slice_rows(h, 0, 1);
    return l2_normalize(matmul(cls, proj));
}

}  // namespace

Tensor query_head_embed(const Tensor& base_out, const EncoderStack& enc) {
    return head_embed(base_out, enc.query_head_layers, enc.query_proj);
}

Tensor key_head_embed(const Tensor& base_out, const EncoderStack& enc) {
    return head_embed(base_out, enc.key_head_layers, enc.key_proj);
}

Tensor query_embed(const Query& x, const EncoderStack& enc) {
    return query_head_embed(base_encode(x, enc), enc);
}

Tensor key_embed(const KnowledgeItem& z, const EncoderStack& enc) {
    return key_head_embed(base_encode(query_from_item(z, enc.cfg), enc), enc);
}

}  // namespace rvlm
