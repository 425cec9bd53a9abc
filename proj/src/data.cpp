#include "rvlm/data.hpp"

#include <stdexcept>

namespace rvlm {

const char* to_string(ItemKind k) {
    switch (k) {
        case ItemKind::passage: return "passage";
        case ItemKind::caption: return "caption";
        case ItemKind::qa_pairs: return "qa_pairs";
        case ItemKind::kg_triplets: return "kg_triplets";
    }
    return "?";
}

ItemKind item_kind_from_string(const std::string& s) {
    if (s == "passage") return ItemKind::passage;
    if (s == "caption") return ItemKind::caption;
    if (s == "qa_pairs") return ItemKind::qa_pairs;
    if (s == "kg_triplets") return ItemKind::kg_triplets;
    throw std::invalid_argument("unknown item kind: " + s);
}

std::string KnowledgeItem::surface_text() const {
    if (kind == ItemKind::kg_triplets) return linearize_triplets(triplets);
    return text;
}

std::string linearize_triplets(const std::vector<Triplet>& triplets) {
    if (triplets.empty()) throw std::invalid_argument("linearize_triplets: empty triplet list");
    std::string out;
    for (size_t i = 0; i < triplets.size(); ++i) {
        const auto& t = triplets[i];
        out += t.subject;
        out += ' ';
        out += t.relation;
        out += ' ';
        out += t.object;
        out += '.';
        if (i + 1 < triplets.size()) out += ' ';
    }
    return out;
}

}  // namespace rvlm
