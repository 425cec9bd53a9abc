#include "rvlm/memory.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <unordered_set>

namespace rvlm {

PerceiverHead PerceiverHead::init(const PerceiverConfig& cfg, Rng& rng) {
    PerceiverHead h;
    h.cfg = cfg;
    double b = 1.0 / std::sqrt(static_cast<double>(cfg.d));
    h.latent = Tensor::param(uniform_init(cfg.c, cfg.d, b, rng));
    h.input_ln = LayerNormParams::init(cfg.d);
    for (int i = 0; i < cfg.layers; ++i) h.layers.push_back(PerceiverLayerParams::init(cfg.d, rng));
    return h;
}

void PerceiverHead::collect(ParamMap& out, const std::string& prefix) const {
    out.add(prefix + ".latent", latent);
    input_ln.collect(out, prefix + ".input_ln");
    for (size_t i = 0; i < layers.size(); ++i)
        layers[i].collect(out, prefix + ".layer." + std::to_string(i));
}

PerceiverHead PerceiverHead::clone_frozen() const {
    PerceiverHead h;
    h.cfg = cfg;
    h.latent = Tensor::constant(latent.value());
    h.input_ln = {Tensor::constant(input_ln.gain.value()), Tensor::constant(input_ln.bias.value())};
    for (const auto& l : layers) {
        PerceiverLayerParams f;
        f.ln_query = {Tensor::constant(l.ln_query.gain.value()), Tensor::constant(l.ln_query.bias.value())};
        f.ln_self = {Tensor::constant(l.ln_self.gain.value()), Tensor::constant(l.ln_self.bias.value())};
        f.ln_mlp = {Tensor::constant(l.ln_mlp.gain.value()), Tensor::constant(l.ln_mlp.bias.value())};
        f.cross_attn = {Tensor::constant(l.cross_attn.wq.value()), Tensor::constant(l.cross_attn.wk.value()),
                        Tensor::constant(l.cross_attn.wv.value()), Tensor::constant(l.cross_attn.wo.value())};
        f.self_attn = {Tensor::constant(l.self_attn.wq.value()), Tensor::constant(l.self_attn.wk.value()),
                       Tensor::constant(l.self_attn.wv.value()), Tensor::constant(l.self_attn.wo.value())};
        f.mlp = {Tensor::constant(l.mlp.w1.value()), Tensor::constant(l.mlp.b1.value()),
                 Tensor::constant(l.mlp.w2.value()), Tensor::constant(l.mlp.b2.value())};
        h.layers.push_back(std::move(f));
    }
    return h;
}

Tensor perceiver_compress(const Tensor& tokens, const PerceiverHead& head) {
    if (tokens.rows() < 1) throw std::invalid_argument("perceiver_compress: empty token sequence");
    Tensor compressed = layer_norm_affine(tokens, head.input_ln);
    Tensor z = head.latent;
    for (const auto& layer : head.layers) z = perceiver_layer(z, compressed, layer);
    return z;
}

Tensor first_c_tokens(const Tensor& tokens, int c) {
    if (tokens.rows() >= c) return slice_rows(tokens, 0, c);
    Tensor pad = Tensor::zeros(c - tokens.rows(), tokens.cols());
    return concat_rows({tokens, pad});
}

Tensor compress_value(const Tensor& tokens, const PerceiverHead& head, ValueHeadMode mode) {
    if (mode == ValueHeadMode::first_c_tokens) return first_c_tokens(tokens, head.cfg.c);
    return perceiver_compress(tokens, head);
}

Tensor decor_loss(const std::vector<Tensor>& values) {
    if (values.empty()) throw std::invalid_argument("decor_loss: need at least one value matrix");
    const Eigen::Index c = values[0].rows();
    if (c < 2) throw std::invalid_argument("decor_loss: covariance needs c >= 2 rows");
    for (const auto& v : values)
        if (v.rows() != c)
            throw std::invalid_argument("decor_loss: value matrices disagree on row count");

    const double inv_c = 1.0 / static_cast<double>(c);
    Tensor row_mean_op = Tensor::constant(Mat::Constant(1, c, inv_c));

    std::vector<Tensor> centered;
    centered.reserve(values.size());
    for (const auto& v : values) {
        Tensor mean_row = matmul(row_mean_op, v);  // 1 x d column means
        centered.push_back(add_row_broadcast(v, scale(mean_row, -1.0)));
    }

    const double inv_cm1 = 1.0 / static_cast<double>(c - 1);
    Tensor total = Tensor::scalar(0.0);
    for (const auto& zi : centered)
        for (const auto& zj : centered) {
            Tensor cov = scale(matmul(transpose(zi), zj), inv_cm1);
            total = add(total, frobenius_sq(cov));
        }
    return total;
}

Tensor align_loss(const Tensor& value_norm_sum, const Tensor& query_norm_sum) {
    if (query_norm_sum.item() == 0.0)
        throw std::invalid_argument("align_loss: query norm sum must be positive");
    Tensor one = Tensor::scalar(1.0);
    return abs(sub(one, div(value_norm_sum, query_norm_sum)));
}

std::size_t MemorySnapshot::total_entries() const {
    std::size_t n = 0;
    for (const auto& c : corpora) n += c.size();
    return n;
}

const MemoryEntry& MemorySnapshot::entry(std::size_t global_index) const {
    for (const auto& c : corpora) {
        if (global_index < c.size()) return c[global_index];
        global_index -= c.size();
    }
    throw std::out_of_range("MemorySnapshot::entry: index past end");
}

std::vector<std::size_t> MemorySnapshot::shard_members(std::size_t shard) const {
    std::vector<std::size_t> out;
    for (std::size_t i = shard; i < total_entries(); i += static_cast<std::size_t>(num_shards))
        out.push_back(i);
    return out;
}

long MemorySnapshot::find_global_index(const std::string& item_id) const {
    std::size_t at = 0;
    for (const auto& c : corpora) {
        for (const auto& e : c) {
            if (e.item_id == item_id) return static_cast<long>(at);
            ++at;
        }
    }
    return -1;
}

MemoryEntry encode_entry(const KnowledgeItem& z, const EncoderStack& enc, const PerceiverHead& head,
                         ValueHeadMode mode, std::uint32_t version) {
    NoGradGuard ng;
    Tensor base = base_encode(query_from_item(z, enc.cfg), enc);
    Tensor key = key_head_embed(base, enc);
    Tensor value = compress_value(base, head, mode);
    MemoryEntry e;
    e.key = key.value().row(0);
    e.value = value.value();
    e.item_id = z.id;
    e.corpus_id = z.corpus_id;
    e.encoded_at_version = version;
    return e;
}

namespace {

SnapshotPtr encode_all(const std::vector<KnowledgeItem>& items, const EncoderStack& enc,
                       const PerceiverHead& head, ValueHeadMode mode, int num_shards,
                       std::uint32_t version) {
    if (items.empty()) throw std::invalid_argument("build_snapshot: no items");
    if (num_shards < 1) throw std::invalid_argument("build_snapshot: num_shards must be >= 1");

    std::unordered_set<std::string> ids;
    std::uint32_t max_corpus = 0;
    for (const auto& it : items) {
        if (!ids.insert(it.id).second)
            throw std::invalid_argument("build_snapshot: duplicate item id '" + it.id + "'");
        max_corpus = std::max(max_corpus, it.corpus_id);
    }

    auto snap = std::make_shared<MemorySnapshot>();
    snap->version = version;
    snap->d = enc.cfg.d;
    snap->c = head.cfg.c;
    snap->num_shards = num_shards;
    snap->corpora.resize(max_corpus + 1);
    for (const auto& it : items)
        snap->corpora[it.corpus_id].push_back(encode_entry(it, enc, head, mode, version));
    return snap;
}

}  // namespace

SnapshotPtr build_snapshot(const std::vector<KnowledgeItem>& items, const EncoderStack& enc,
                           const PerceiverHead& head, int num_shards, ValueHeadMode mode) {
    return encode_all(items, enc, head, mode, num_shards, /*version=*/0);
}

SnapshotPtr refresh_snapshot(const MemorySnapshot& old, const std::vector<KnowledgeItem>& items,
                             const EncoderStack& enc, const PerceiverHead& head,
                             ValueHeadMode mode) {
    return encode_all(items, enc, head, mode, old.num_shards, old.version + 1);
}

// --- persistence -------------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'R', 'V', 'L', 'M'};
constexpr std::uint32_t kFormatVersion = 1;

void put_u16(std::ostream& os, std::uint16_t v) {
    unsigned char b[2] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>(v >> 8)};
    os.write(reinterpret_cast<const char*>(b), 2);
}

void put_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    os.write(reinterpret_cast<const char*>(b), 4);
}

void put_f32(std::ostream& os, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(os, bits);
}

std::uint16_t get_u16(std::istream& is) {
    unsigned char b[2];
    if (!is.read(reinterpret_cast<char*>(b), 2))
        throw SnapshotIoError(SnapshotIoCode::truncated, "snapshot truncated");
    return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

std::uint32_t get_u32(std::istream& is) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4))
        throw SnapshotIoError(SnapshotIoCode::truncated, "snapshot truncated");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
}

float get_f32(std::istream& is) {
    std::uint32_t bits = get_u32(is);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
}

}  // namespace

void save_snapshot(const MemorySnapshot& s, const std::string& path) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw SnapshotIoError(SnapshotIoCode::io_error, "cannot open '" + path + "' for write");
    os.write(kMagic, 4);
    put_u32(os, kFormatVersion);
    put_u32(os, s.version);
    put_u32(os, static_cast<std::uint32_t>(s.d));
    put_u32(os, static_cast<std::uint32_t>(s.c));
    put_u32(os, static_cast<std::uint32_t>(s.corpora.size()));
    for (const auto& corpus : s.corpora) put_u32(os, static_cast<std::uint32_t>(corpus.size()));
    for (const auto& corpus : s.corpora) {
        for (const auto& e : corpus) {
            put_u16(os, static_cast<std::uint16_t>(e.item_id.size()));
            os.write(e.item_id.data(), static_cast<std::streamsize>(e.item_id.size()));
            put_u32(os, e.corpus_id);
            for (int i = 0; i < s.d; ++i) put_f32(os, static_cast<float>(e.key(i)));
            for (int r = 0; r < s.c; ++r)
                for (int i = 0; i < s.d; ++i) put_f32(os, static_cast<float>(e.value(r, i)));
        }
    }
    if (!os) throw SnapshotIoError(SnapshotIoCode::io_error, "write failed for '" + path + "'");
}

SnapshotPtr load_snapshot(const std::string& path, int expected_d, int expected_c) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw SnapshotIoError(SnapshotIoCode::io_error, "cannot open '" + path + "'");
    char magic[4];
    if (!is.read(magic, 4)) throw SnapshotIoError(SnapshotIoCode::truncated, "snapshot truncated");
    if (std::memcmp(magic, kMagic, 4) != 0)
        throw SnapshotIoError(SnapshotIoCode::bad_magic, "bad magic in '" + path + "'");
    std::uint32_t fmt = get_u32(is);
    if (fmt != kFormatVersion)
        throw SnapshotIoError(SnapshotIoCode::unsupported_version,
                              "unsupported snapshot format version " + std::to_string(fmt));
    auto snap = std::make_shared<MemorySnapshot>();
    snap->version = get_u32(is);
    snap->d = static_cast<int>(get_u32(is));
    snap->c = static_cast<int>(get_u32(is));
    if (snap->d < 1 || snap->c < 1)
        throw SnapshotIoError(SnapshotIoCode::truncated, "snapshot header has zero dims");
    if ((expected_d && snap->d != expected_d) || (expected_c && snap->c != expected_c))
        throw SnapshotIoError(SnapshotIoCode::dim_mismatch,
                              "dimension mismatch: snapshot has d=" + std::to_string(snap->d) +
                                  " c=" + std::to_string(snap->c) + ", expected d=" +
                                  std::to_string(expected_d) + " c=" + std::to_string(expected_c));
    std::uint32_t num_corpora = get_u32(is);
    std::vector<std::uint32_t> counts(num_corpora);
    for (auto& n : counts) n = get_u32(is);
    snap->corpora.resize(num_corpora);
    for (std::uint32_t ci = 0; ci < num_corpora; ++ci) {
        snap->corpora[ci].reserve(counts[ci]);
        for (std::uint32_t k = 0; k < counts[ci]; ++k) {
            MemoryEntry e;
            std::uint16_t id_len = get_u16(is);
            e.item_id.resize(id_len);
            if (id_len && !is.read(e.item_id.data(), id_len))
                throw SnapshotIoError(SnapshotIoCode::truncated, "snapshot truncated");
            e.corpus_id = get_u32(is);
            e.key.resize(snap->d);
            for (int i = 0; i < snap->d; ++i) e.key(i) = static_cast<double>(get_f32(is));
            e.value.resize(snap->c, snap->d);
            for (int r = 0; r < snap->c; ++r)
                for (int i = 0; i < snap->d; ++i) e.value(r, i) = static_cast<double>(get_f32(is));
            e.encoded_at_version = snap->version;
            snap->corpora[ci].push_back(std::move(e));
        }
    }
    return snap;
}

std::future<std::uint32_t> refresh_async(SnapshotStore& store, std::vector<KnowledgeItem> items,
                                         EncoderStack frozen_enc, PerceiverHead frozen_head,
                                         ValueHeadMode mode) {
    SnapshotPtr old = store.current();
    return std::async(std::launch::async,
                      [&store, old, items = std::move(items), enc = std::move(frozen_enc),
                       head = std::move(frozen_head), mode]() {
                          SnapshotPtr next = refresh_snapshot(*old, items, enc, head, mode);
                          std::uint32_t v = next->version;
                          store.publish(std::move(next));
                          return v;
                      });
}

}  // namespace rvlm
