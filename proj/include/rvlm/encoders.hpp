// Deterministic toy featurizers plus the learnable base encoder and the
// query/key summarization heads.

#pragma once

#include "rvlm/data.hpp"
#include "rvlm/nn.hpp"
#include "rvlm/tensor.hpp"

#include <string>
#include <vector>

namespace rvlm {

// Whitespace-split, lowercased, stable 64-bit hash of each word modulo V.
std::vector<int> featurize_text(const std::string& raw, int vocab);

// P pseudo-random unit vectors, seeded by (descriptor, patch index).
std::vector<Eigen::VectorXd> featurize_image(const std::string& descriptor, int num_patches,
                                             int d_img);

struct EncoderConfig {
    int d = 32;
    int d_img = 16;
    int vocab = 1024;
    int base_layers = 2;
    int head_layers = 1;  // upper layers for each of the query/key heads
    int patches_per_image = 4;
};

struct EncoderStack {
    EncoderConfig cfg;
    Tensor token_embedding;   // V x d
    Tensor image_projection;  // d_img x d
    Tensor cls_embedding;     // 1 x d
    std::vector<EncoderLayerParams> base_layers;
    std::vector<EncoderLayerParams> query_head_layers;
    std::vector<EncoderLayerParams> key_head_layers;
    Tensor query_proj, key_proj;  // d x d

    static EncoderStack init(const EncoderConfig& cfg, Rng& rng);
    void collect(ParamMap& out, const std::string& prefix = "encoder") const;
    // Value copy with detached (constant) parameters; used by the refresher.
    EncoderStack clone_frozen() const;
};

Query make_query(std::string id, const std::string& text, const std::string& image_descriptor,
                 const EncoderConfig& cfg);
Query query_from_item(const KnowledgeItem& item, const EncoderConfig& cfg);

// [CLS; projected patches; embedded text tokens] through the base layers.
// Output is (1 + P + T) x d with the contextualized CLS in row 0.
Tensor base_encode(const Query& input, const EncoderStack& enc);

Tensor query_embed(const Query& x, const EncoderStack& enc);            // unit row 1 x d
Tensor key_embed(const KnowledgeItem& z, const EncoderStack& enc);      // unit row 1 x d

// Heads applied to an existing base encoding (shared by encode paths that
// need both the key and the value of one item).
Tensor query_head_embed(const Tensor& base_out, const EncoderStack& enc);
Tensor key_head_embed(const Tensor& base_out, const EncoderStack& enc);

}  // namespace rvlm
