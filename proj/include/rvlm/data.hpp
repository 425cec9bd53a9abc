// Multimodal record types: queries and knowledge items with a corpus tag.

#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <string>
#include <vector>

namespace rvlm {

struct Triplet {
    std::string subject, relation, object;
};

enum class ItemKind { passage, caption, qa_pairs, kg_triplets };

const char* to_string(ItemKind k);
ItemKind item_kind_from_string(const std::string& s);

struct KnowledgeItem {
    std::string id;
    std::uint32_t corpus_id = 0;
    std::string text;
    std::string image_descriptor;  // empty = no image
    ItemKind kind = ItemKind::passage;
    std::vector<Triplet> triplets;  // kg_triplets only

    bool has_image() const { return !image_descriptor.empty(); }
    // Text fed to the encoder; kg items are linearized first.
    std::string surface_text() const;
};

struct Query {
    std::string id;
    std::vector<int> text_tokens;
    std::vector<Eigen::VectorXd> patches;  // empty = no image

    bool has_text() const { return !text_tokens.empty(); }
    bool has_image() const { return !patches.empty(); }
    bool empty() const { return !has_text() && !has_image(); }
};

// "subject relation object. " per triplet, input order preserved.
std::string linearize_triplets(const std::vector<Triplet>& triplets);

}  // namespace rvlm
