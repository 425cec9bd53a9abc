// Multi-source key/value knowledge memory: value compression, the two
// compression regularizers, immutable versioned snapshots with binary
// persistence, and asynchronous full refresh.

#pragma once

#include "rvlm/encoders.hpp"

#include <future>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <vector>

namespace rvlm {

struct PerceiverConfig {
    int d = 32;
    int c = 4;  // compressed value length
    int layers = 1;
};

struct PerceiverHead {
    PerceiverConfig cfg;
    Tensor latent;  // c x d learnable latent embedding
    LayerNormParams input_ln;
    std::vector<PerceiverLayerParams> layers;

    static PerceiverHead init(const PerceiverConfig& cfg, Rng& rng);
    void collect(ParamMap& out, const std::string& prefix = "perceiver") const;
    PerceiverHead clone_frozen() const;
};

enum class ValueHeadMode { perceiver, first_c_tokens };

// Cross-attention compression of a (len x d) sequence to (c x d).
Tensor perceiver_compress(const Tensor& tokens, const PerceiverHead& head);

// Ablation head: first c rows of the base encoding, zero-padded.
Tensor first_c_tokens(const Tensor& tokens, int c);

Tensor compress_value(const Tensor& tokens, const PerceiverHead& head, ValueHeadMode mode);

// Sum over all (i, j) pairs, i = j included, of the squared Frobenius norm of
// the token cross-covariance between value matrices i and j. Tokens are the
// samples: each c x d value is mean-centered over its c rows, divisor c - 1.
Tensor decor_loss(const std::vector<Tensor>& values);

// | 1 - value_norm_sum / query_norm_sum |
Tensor align_loss(const Tensor& value_norm_sum, const Tensor& query_norm_sum);

struct MemoryEntry {
    Eigen::RowVectorXd key;  // unit norm, d
    Mat value;               // c x d
    std::string item_id;
    std::uint32_t corpus_id = 0;
    std::uint32_t encoded_at_version = 0;
};

struct MemorySnapshot {
    std::uint32_t version = 0;
    int d = 0;
    int c = 0;
    int num_shards = 1;
    std::vector<std::vector<MemoryEntry>> corpora;  // corpus-major entry storage

    std::size_t total_entries() const;
    // Global corpus-major index; shard assignment is index mod num_shards.
    const MemoryEntry& entry(std::size_t global_index) const;
    std::size_t shard_of(std::size_t global_index) const {
        return global_index % static_cast<std::size_t>(num_shards);
    }
    std::vector<std::size_t> shard_members(std::size_t shard) const;
    // -1 when absent
    long find_global_index(const std::string& item_id) const;
};

using SnapshotPtr = std::shared_ptr<const MemorySnapshot>;

// Numeric (no-grad) encoding of one item under the current parameters.
MemoryEntry encode_entry(const KnowledgeItem& z, const EncoderStack& enc, const PerceiverHead& head,
                         ValueHeadMode mode = ValueHeadMode::perceiver,
                         std::uint32_t version = 0);

SnapshotPtr build_snapshot(const std::vector<KnowledgeItem>& items, const EncoderStack& enc,
                           const PerceiverHead& head, int num_shards,
                           ValueHeadMode mode = ValueHeadMode::perceiver);

// Full re-encode under the given (possibly updated) parameters; version + 1.
SnapshotPtr refresh_snapshot(const MemorySnapshot& old, const std::vector<KnowledgeItem>& items,
                             const EncoderStack& enc, const PerceiverHead& head,
                             ValueHeadMode mode = ValueHeadMode::perceiver);

enum class SnapshotIoCode { bad_magic, unsupported_version, truncated, dim_mismatch, io_error };

class SnapshotIoError : public std::runtime_error {
  public:
    SnapshotIoError(SnapshotIoCode code, const std::string& what)
        : std::runtime_error(what), code(code) {}
    SnapshotIoCode code;
};

// Binary format, little-endian: magic "RVLM", format version u32, snapshot
// version u32, d u32, c u32, corpus count u32, per-corpus entry counts u32,
// then per entry: id length u16 + UTF-8 id, corpus id u32, key d x f32,
// value c*d x f32. Keys and values are stored at f32 resolution.
void save_snapshot(const MemorySnapshot& s, const std::string& path);
SnapshotPtr load_snapshot(const std::string& path, int expected_d = 0, int expected_c = 0);

// Atomically swapped handle to the current snapshot. Readers always observe
// one fully-published version.
class SnapshotStore {
  public:
    explicit SnapshotStore(SnapshotPtr initial) : cur_(std::move(initial)) {}
    SnapshotPtr current() const {
        std::lock_guard<std::mutex> lock(mu_);
        return cur_;
    }
    void publish(SnapshotPtr next) {
        std::lock_guard<std::mutex> lock(mu_);
        cur_ = std::move(next);
    }

  private:
    mutable std::mutex mu_;
    SnapshotPtr cur_;
};

// Background full refresh against frozen parameter copies; publishes into the
// store when done. Callers keep at most one refresh in flight.
std::future<std::uint32_t> refresh_async(SnapshotStore& store, std::vector<KnowledgeItem> items,
                                         EncoderStack frozen_enc, PerceiverHead frozen_head,
                                         ValueHeadMode mode = ValueHeadMode::perceiver);

}  // namespace rvlm
