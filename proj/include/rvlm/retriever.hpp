// Corpus-gated relevance scoring, exact sharded top-K search and the merged
// top-K probability renormalization.

#pragma once

#include "rvlm/memory.hpp"

#include <cstddef>
#include <vector>

namespace rvlm {

struct GateParams {
    Tensor w;  // S x d
    Tensor b;  // 1 x S
    double tau = 0.05;

    int num_corpora() const { return static_cast<int>(w.rows()); }
    static GateParams init(int num_corpora, int d, double tau, Rng& rng);
    void collect(ParamMap& out, const std::string& prefix = "gate") const;
};

// softmax(W q + b); sums to one.
Eigen::VectorXd gate_scores(const Eigen::RowVectorXd& q, const GateParams& g);
Tensor gate_scores_graph(const Tensor& q, const GateParams& g);  // q is 1 x d

// Dot product of two unit vectors; lies in [-1, 1].
double relevance(const Eigen::RowVectorXd& q, const Eigen::RowVectorXd& key);

// Full-memory probability of one entry: gate[corpus] times the softmax of
// Rel / tau across that entry's own corpus. Sums to one over the snapshot.
double entry_probability(const Eigen::RowVectorXd& q, const MemorySnapshot& snap,
                         std::size_t global_index, const GateParams& g);

struct ScoredEntry {
    std::size_t global_index = 0;
    double rel = 0.0;
    double gated_score = 0.0;  // gate[corpus] * rel
};

// Exact top-min(K, |shard|) of one shard by gated score; ties break on
// ascending item id. The shard is a list of global entry indices.
std::vector<ScoredEntry> local_topk(const Eigen::RowVectorXd& q, const MemorySnapshot& snap,
                                    const std::vector<std::size_t>& shard_indices,
                                    const Eigen::VectorXd& gate_probs, int k);

struct RetrievedSet {
    SnapshotPtr snapshot;
    std::vector<std::size_t> global_ids;  // descending gated score, id tie-break
    std::vector<double> rel_scores;
    Eigen::VectorXd gate_probs;        // all S corpora
    std::vector<double> topk_probs;    // sums to one
    std::uint32_t snapshot_version = 0;

    std::size_t size() const { return global_ids.size(); }
    const MemoryEntry& entry(std::size_t i) const { return snapshot->entry(global_ids[i]); }
};

// Per-shard exact search capped at K, merged to the exact global top-K.
// Equals brute force over the whole snapshot for every shard count.
RetrievedSet distributed_topk(const Eigen::RowVectorXd& q, SnapshotPtr snap, int k,
                              const GateParams& g);

// Softmax over the K gated exponents (already divided by tau).
std::vector<double> topk_renormalize(const std::vector<double>& gated_exponents);
Tensor topk_renormalize_graph(const Tensor& gated_exponents);  // 1 x K

}  // namespace rvlm
