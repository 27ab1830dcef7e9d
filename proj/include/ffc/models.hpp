#pragma once

#include <array>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ffc/common.hpp"
#include "ffc/layers.hpp"
#include "ffc/tensor.hpp"

namespace ffc {

enum class Arch { dsc, dsc_se, m_dsc };

inline const char* arch_name(Arch a) {
    switch (a) {
        case Arch::dsc: return "dsc";
        case Arch::dsc_se: return "dsc-se";
        case Arch::m_dsc: return "m-dsc";
    }
    return "?";
}

inline Arch arch_from_name(const std::string& s) {
    if (s == "dsc") return Arch::dsc;
    if (s == "dsc-se") return Arch::dsc_se;
    if (s == "m-dsc") return Arch::m_dsc;
    throw UsageError("unknown architecture '" + s + "' (expected dsc, dsc-se, or m-dsc)");
}

struct ModelConfig {
    Arch architecture = Arch::dsc;
    std::int64_t fragment_size = 4096;
    std::int64_t num_classes = 75;
    std::int64_t embed_dim = 32;
    std::int64_t stem_channels = 32;
    std::int64_t stem_kernel = 11;
    std::array<std::int64_t, 3> block_channels{64, 96, 128};
    std::array<std::int64_t, 3> branch_kernels{11, 19, 27};
    std::int64_t shortcut_stride = 4;
    std::int64_t pool_window = 4;
    std::int64_t head_channels = 128;
    std::int64_t se_reduction = 16;   // dsc-se
    double dropout_p = 0.1;           // m-dsc
    std::int64_t norm_groups = 8;     // m-dsc
    double norm_epsilon = 1e-5;
    double norm_momentum = 0.1;

    void validate() const {
        const std::int64_t chain = pool_window * pool_window * pool_window;
        if (fragment_size <= 0 || fragment_size % chain != 0)
            throw UsageError("fragment_size must be a positive multiple of " + std::to_string(chain) + ", got " +
                             std::to_string(fragment_size));
        if (num_classes < 2) throw UsageError("num_classes must be at least 2");
        if (embed_dim <= 0 || stem_channels <= 0) throw UsageError("embed_dim and stem_channels must be positive");
        if (stem_kernel <= 0 || stem_kernel % 2 == 0) throw UsageError("stem_kernel must be odd and positive");
        for (auto k : branch_kernels)
            if (k <= 0 || k % 2 == 0) throw UsageError("branch kernels must be odd and positive");
        if (head_channels != block_channels[2])
            throw UsageError("head_channels must equal the last block's output channels");
        if (dropout_p < 0.0 || dropout_p >= 1.0) throw UsageError("dropout_p must lie in [0,1)");
        if (architecture == Arch::m_dsc) {
            if (stem_channels != embed_dim)
                throw UsageError("m-dsc stem is depthwise: stem_channels must equal embed_dim");
            std::array<std::int64_t, 4> widths{stem_channels, block_channels[0], block_channels[1], block_channels[2]};
            for (auto c : widths)
                if (norm_groups <= 0 || c % norm_groups != 0)
                    throw UsageError("norm_groups (" + std::to_string(norm_groups) + ") must divide channel width " +
                                     std::to_string(c));
        }
        if (architecture == Arch::dsc_se) {
            for (auto c : block_channels)
                if (se_reduction <= 0 || c % se_reduction != 0)
                    throw UsageError("se_reduction (" + std::to_string(se_reduction) +
                                     ") must divide block channel width " + std::to_string(c));
        }
    }

    // spatial length after the stem and each block
    std::array<std::int64_t, 4> length_chain() const {
        std::int64_t l = fragment_size;
        std::array<std::int64_t, 4> out{l, 0, 0, 0};
        for (int i = 0; i < 3; ++i) {
            l /= pool_window;
            out[std::size_t(i + 1)] = l;
        }
        return out;
    }

    bool operator==(const ModelConfig&) const = default;
};

inline void to_json(nlohmann::json& j, const ModelConfig& c) {
    j = nlohmann::json{{"architecture", arch_name(c.architecture)},
                       {"fragment_size", c.fragment_size},
                       {"num_classes", c.num_classes},
                       {"embed_dim", c.embed_dim},
                       {"stem_channels", c.stem_channels},
                       {"stem_kernel", c.stem_kernel},
                       {"block_channels", c.block_channels},
                       {"branch_kernels", c.branch_kernels},
                       {"shortcut_stride", c.shortcut_stride},
                       {"pool_window", c.pool_window},
                       {"head_channels", c.head_channels},
                       {"se_reduction", c.se_reduction},
                       {"dropout_p", c.dropout_p},
                       {"norm_groups", c.norm_groups},
                       {"norm_epsilon", c.norm_epsilon},
                       {"norm_momentum", c.norm_momentum}};
}

inline void from_json(const nlohmann::json& j, ModelConfig& c) {
    c.architecture = arch_from_name(j.at("architecture").get<std::string>());
    j.at("fragment_size").get_to(c.fragment_size);
    j.at("num_classes").get_to(c.num_classes);
    j.at("embed_dim").get_to(c.embed_dim);
    j.at("stem_channels").get_to(c.stem_channels);
    j.at("stem_kernel").get_to(c.stem_kernel);
    j.at("block_channels").get_to(c.block_channels);
    j.at("branch_kernels").get_to(c.branch_kernels);
    j.at("shortcut_stride").get_to(c.shortcut_stride);
    j.at("pool_window").get_to(c.pool_window);
    j.at("head_channels").get_to(c.head_channels);
    j.at("se_reduction").get_to(c.se_reduction);
    j.at("dropout_p").get_to(c.dropout_p);
    j.at("norm_groups").get_to(c.norm_groups);
    j.at("norm_epsilon").get_to(c.norm_epsilon);
    j.at("norm_momentum").get_to(c.norm_momentum);
}

// ---------------------------------------------------------------------------
// Layer parameter bundles

template <typename T>
struct SepBranchParams {
    std::int64_t kernel = 0;
    Tensor<T> dw_weight;   // [K, M]
    NormState<T> norm1;    // over M
    Tensor<T> pw_weight;   // [M, N]
    NormState<T> norm2;    // over N
};

template <typename T>
struct InceptionBlockParams {
    std::int64_t in_channels = 0, out_channels = 0;
    NormKind norm_kind = NormKind::batch;
    std::int64_t norm_groups = 1;
    double norm_epsilon = 1e-5;
    double norm_momentum = 0.1;
    bool relu_after_norm = false;
    std::int64_t pool_window = 4;
    std::int64_t shortcut_stride = 4;
    std::array<SepBranchParams<T>, 3> branches;
    bool projected = false;  // in_channels != out_channels
    Tensor<T> shortcut_weight;  // [1, M, N]
    Tensor<T> shortcut_bias;    // [N]
    std::optional<SEParams<T>> se;
};

// ---------------------------------------------------------------------------
// Inception block forward: three depthwise-separable branches (stride 1,
// each conv followed by normalization) summed and max-pooled; the shortcut
// is a stride-4 1x1 convolution, or the max-pooled input itself when the
// channel counts match.

template <typename T>
Tensor<T> inception_block_forward(const Tensor<T>& x, InceptionBlockParams<T>& blk, Mode mode) {
    auto d = detail::as3(x, "inception_block_forward");
    if (d.l % blk.pool_window != 0)
        throw UsageError("inception_block_forward: length " + std::to_string(d.l) + " not divisible by " +
                         std::to_string(blk.pool_window));
    if (d.c != blk.in_channels)
        throw UsageError("inception_block_forward: input channels " + std::to_string(d.c) + " do not match block M=" +
                         std::to_string(blk.in_channels));
    const std::int64_t M = blk.in_channels, N = blk.out_channels;

    NormSpec n1{blk.norm_kind, M, blk.norm_groups, blk.norm_epsilon, blk.norm_momentum};
    NormSpec n2{blk.norm_kind, N, blk.norm_groups, blk.norm_epsilon, blk.norm_momentum};

    Tensor<T> summed;
    for (auto& br : blk.branches) {
        ConvLayerSpec dw{d.l, br.kernel, M, M, 1, ConvKind::depthwise};
        Tensor<T> h = depthwise_conv1d_forward(x, dw, br.dw_weight);
        h = normalize(h, n1, br.norm1, mode);
        if (blk.relu_after_norm) h = activation(h, Act::relu);
        h = pointwise_conv1d_forward(h, br.pw_weight);
        h = normalize(h, n2, br.norm2, mode);
        if (blk.relu_after_norm) h = activation(h, Act::relu);
        summed = summed.defined() ? add(summed, h) : h;
    }
    Tensor<T> pooled = maxpool1d(summed, blk.pool_window, blk.pool_window);
    if (blk.projected) {
        ConvLayerSpec sc{d.l, 1, M, N, blk.shortcut_stride, ConvKind::standard};
        Tensor<T> proj = conv1d_forward(x, sc, blk.shortcut_weight, &blk.shortcut_bias);
        return add(pooled, proj);
    }
    return add(pooled, maxpool1d(x, blk.pool_window, blk.pool_window));
}

// Group-normalized variant with ReLU after each normalization.
template <typename T>
Tensor<T> modified_inception_block_forward(const Tensor<T>& x, InceptionBlockParams<T>& blk, Mode mode) {
    if (blk.norm_kind != NormKind::group || !blk.relu_after_norm)
        throw UsageError("modified_inception_block_forward: block must use group norm with ReLU");
    return inception_block_forward(x, blk, mode);
}

// ---------------------------------------------------------------------------
// Model graph: ordered layer structure plus a named weight store. The store
// holds every tensor (trainable parameters and running statistics) in a
// fixed creation order; layer structs share the same underlying buffers.

template <typename T>
class ModelGraph {
public:
    struct Entry {
        std::string name;
        Tensor<T> tensor;
        bool trainable = true;
    };

    ModelConfig config;
    Tensor<T> embedding;                 // [256, embed_dim]
    Tensor<T> stem_weight, stem_bias;    // standard [K,E,S]+[S] or depthwise [K,E]+[E]
    std::array<InceptionBlockParams<T>, 3> blocks;
    Tensor<T> head_weight, head_bias;    // [C, K], [K]
    std::vector<Entry> store;
    Rng dropout_rng{0};

    Tensor<T>* find(const std::string& name) {
        for (auto& e : store)
            if (e.name == name) return &e.tensor;
        return nullptr;
    }

    std::vector<Entry*> trainable_entries() {
        std::vector<Entry*> out;
        for (auto& e : store)
            if (e.trainable) out.push_back(&e);
        return out;
    }

    std::int64_t parameter_count() const {
        std::int64_t n = 0;
        for (const auto& e : store)
            if (e.trainable) n += e.tensor.numel();
        return n;
    }

    void reseed_dropout(std::uint64_t seed) { dropout_rng = Rng(seed ^ 0xD509EF77C1A5ull); }

    Tensor<T> forward(const ByteBatch& batch, Mode mode) {
        if (batch.length != config.fragment_size)
            throw UsageError("forward: fragment length " + std::to_string(batch.length) + " does not match model's " +
                             std::to_string(config.fragment_size));
        if (batch.batch <= 0) throw UsageError("forward: empty batch");
        std::optional<NoGradGuard> guard;
        if (mode == Mode::eval) guard.emplace();

        Tensor<T> x = embedding_forward(batch, embedding);
        if (config.architecture == Arch::m_dsc) {
            ConvLayerSpec stem{config.fragment_size, config.stem_kernel, config.embed_dim, config.embed_dim, 1,
                               ConvKind::depthwise};
            x = activation(depthwise_conv1d_forward(x, stem, stem_weight, &stem_bias), Act::relu);
        } else {
            ConvLayerSpec stem{config.fragment_size, config.stem_kernel, config.embed_dim, config.stem_channels, 1,
                               ConvKind::standard};
            x = activation(conv1d_forward(x, stem, stem_weight, &stem_bias), Act::hardswish);
        }
        for (auto& blk : blocks) {
            x = inception_block_forward(x, blk, mode);
            if (blk.se) x = se_block(x, *blk.se, config.se_reduction);
        }
        Tensor<T> feat = global_avgpool(x);
        if (config.architecture == Arch::m_dsc) feat = dropout(feat, config.dropout_p, mode, dropout_rng);
        Tensor<T> logits = linear(feat, head_weight, &head_bias);
        check_finite(logits, "forward logits");
        return logits;
    }
};

// ---------------------------------------------------------------------------
// Construction. Kaiming-uniform fan-in for conv/FC weights, ones/zeros for
// affine, U(-0.05, 0.05) for the embedding table.

namespace detail {

// Kaiming-uniform, fan-in mode, at the framework-default leaky slope
// (bound = 1/sqrt(fan_in)); keeps unnormalized paths from inflating scale.
template <typename T>
Tensor<T> kaiming_uniform(std::vector<std::int64_t> shape, std::int64_t fan_in, Rng& rng) {
    double bound = 1.0 / std::sqrt(double(fan_in));
    return Tensor<T>::uniform(std::move(shape), T(-bound), T(bound), rng, true);
}

template <typename T>
struct Registrar {
    ModelGraph<T>& m;
    Tensor<T> add(const std::string& name, Tensor<T> t, bool trainable = true) {
        t.set_requires_grad(trainable);
        m.store.push_back({name, t, trainable});
        return t;
    }
    NormState<T> add_norm(const std::string& prefix, std::int64_t channels, NormKind kind) {
        NormState<T> st;
        st.gamma = add(prefix + ".gamma", Tensor<T>::filled({channels}, T(1)));
        st.beta = add(prefix + ".beta", Tensor<T>::zeros({channels}));
        if (kind == NormKind::batch) {
            st.running_mean = add(prefix + ".running_mean", Tensor<T>::zeros({channels}), false);
            st.running_var = add(prefix + ".running_var", Tensor<T>::filled({channels}, T(1)), false);
            st.batches_tracked = add(prefix + ".batches_tracked", Tensor<T>::zeros({1}), false);
        }
        return st;
    }
};

}  // namespace detail

template <typename T>
InceptionBlockParams<T> build_inception_block(detail::Registrar<T>& reg, const std::string& prefix, std::int64_t M,
                                              std::int64_t N, const std::array<std::int64_t, 3>& kernels,
                                              NormKind norm_kind, std::int64_t groups, bool relu_after_norm,
                                              double eps, double momentum, Rng& rng) {
    InceptionBlockParams<T> blk;
    blk.in_channels = M;
    blk.out_channels = N;
    blk.norm_kind = norm_kind;
    blk.norm_groups = groups;
    blk.norm_epsilon = eps;
    blk.norm_momentum = momentum;
    blk.relu_after_norm = relu_after_norm;
    for (int i = 0; i < 3; ++i) {
        auto& br = blk.branches[std::size_t(i)];
        br.kernel = kernels[std::size_t(i)];
        std::string bp = prefix + ".k" + std::to_string(br.kernel);
        br.dw_weight = reg.add(bp + ".dw.weight", detail::kaiming_uniform<T>({br.kernel, M}, br.kernel, rng));
        br.norm1 = reg.add_norm(bp + ".norm1", M, norm_kind);
        br.pw_weight = reg.add(bp + ".pw.weight", detail::kaiming_uniform<T>({M, N}, M, rng));
        br.norm2 = reg.add_norm(bp + ".norm2", N, norm_kind);
    }
    blk.projected = (M != N);
    if (blk.projected) {
        blk.shortcut_weight = reg.add(prefix + ".shortcut.weight", detail::kaiming_uniform<T>({1, M, N}, M, rng));
        blk.shortcut_bias = reg.add(prefix + ".shortcut.bias", Tensor<T>::zeros({N}));
    }
    return blk;
}

template <typename T>
ModelGraph<T> build_model(const ModelConfig& config, std::uint64_t seed) {
    config.validate();
    ModelGraph<T> model;
    model.config = config;
    model.reseed_dropout(seed);
    Rng rng(seed);
    detail::Registrar<T> reg{model};

    model.embedding = reg.add("embedding.table", Tensor<T>::uniform({256, config.embed_dim}, T(-0.05), T(0.05), rng, true));
    if (config.architecture == Arch::m_dsc) {
        model.stem_weight = reg.add("stem.weight",
                                    detail::kaiming_uniform<T>({config.stem_kernel, config.embed_dim}, config.stem_kernel, rng));
        model.stem_bias = reg.add("stem.bias", Tensor<T>::zeros({config.embed_dim}));
    } else {
        model.stem_weight =
            reg.add("stem.weight", detail::kaiming_uniform<T>({config.stem_kernel, config.embed_dim, config.stem_channels},
                                                              config.stem_kernel * config.embed_dim, rng));
        model.stem_bias = reg.add("stem.bias", Tensor<T>::zeros({config.stem_channels}));
    }

    const bool modified = config.architecture == Arch::m_dsc;
    std::int64_t in_ch = config.stem_channels;
    for (int i = 0; i < 3; ++i) {
        std::int64_t out_ch = config.block_channels[std::size_t(i)];
        std::string prefix = "block" + std::to_string(i + 1);
        auto& blk = model.blocks[std::size_t(i)];
        blk = build_inception_block<T>(reg, prefix, in_ch, out_ch, config.branch_kernels,
                                       modified ? NormKind::group : NormKind::batch, config.norm_groups, modified,
                                       config.norm_epsilon, config.norm_momentum, rng);
        blk.pool_window = config.pool_window;
        blk.shortcut_stride = config.shortcut_stride;
        if (config.architecture == Arch::dsc_se) {
            SEParams<T> se;
            std::int64_t hidden = out_ch / config.se_reduction;
            se.fc1_weight = reg.add(prefix + ".se.fc1.weight", detail::kaiming_uniform<T>({out_ch, hidden}, out_ch, rng));
            se.fc1_bias = reg.add(prefix + ".se.fc1.bias", Tensor<T>::zeros({hidden}));
            se.fc2_weight = reg.add(prefix + ".se.fc2.weight", detail::kaiming_uniform<T>({hidden, out_ch}, hidden, rng));
            se.fc2_bias = reg.add(prefix + ".se.fc2.bias", Tensor<T>::zeros({out_ch}));
            blk.se = se;
        }
        in_ch = out_ch;
    }

    model.head_weight =
        reg.add("head.weight", detail::kaiming_uniform<T>({config.head_channels, config.num_classes}, config.head_channels, rng));
    model.head_bias = reg.add("head.bias", Tensor<T>::zeros({config.num_classes}));
    return model;
}

// ---------------------------------------------------------------------------
// Checkpoints. File = "FFCK" magic, u16 version, u16 reserved, u64 manifest
// length, manifest JSON, then the raw little-endian f32 blob. The manifest
// carries a 64-bit FNV-1a digest of the blob.

struct CheckpointMeta {
    std::uint64_t seed = 0;
    std::int64_t epochs = 0;
    std::string corpus_digest;
    std::vector<std::string> class_names;
};

namespace detail {

inline std::string hex64(std::uint64_t v) {
    char buf[19];
    std::snprintf(buf, sizeof buf, "0x%016llx", static_cast<unsigned long long>(v));
    return buf;
}

}  // namespace detail

template <typename T>
void save_checkpoint(const ModelGraph<T>& model, const std::string& path, const CheckpointMeta& meta = {}) {
    for (const auto& e : model.store) check_finite(e.tensor, ("save_checkpoint: " + e.name).c_str());

    std::vector<float> blob;
    nlohmann::json tensors = nlohmann::json::array();
    std::uint64_t offset = 0;
    for (const auto& e : model.store) {
        nlohmann::json t;
        t["name"] = e.name;
        t["shape"] = e.tensor.shape();
        t["offset"] = offset;
        t["numel"] = e.tensor.numel();
        t["trainable"] = e.trainable;
        tensors.push_back(t);
        for (T v : e.tensor.data()) blob.push_back(float(v));
        offset += std::uint64_t(e.tensor.numel()) * 4;
    }
    std::uint64_t digest = fnv1a64(blob.data(), blob.size() * 4);

    nlohmann::json manifest;
    manifest["architecture"] = arch_name(model.config.architecture);
    manifest["config"] = model.config;
    manifest["tensors"] = tensors;
    manifest["metadata"] = {{"seed", meta.seed},
                            {"epochs", meta.epochs},
                            {"corpus_digest", meta.corpus_digest},
                            {"class_names", meta.class_names}};
    manifest["blob_fnv1a"] = detail::hex64(digest);
    std::string mtext = manifest.dump();

    std::string tmp = path + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw DataError("save_checkpoint: cannot open " + tmp);
        const char magic[4] = {'F', 'F', 'C', 'K'};
        std::uint16_t version = 1, reserved = 0;
        std::uint64_t mlen = mtext.size();
        f.write(magic, 4);
        f.write(reinterpret_cast<const char*>(&version), 2);
        f.write(reinterpret_cast<const char*>(&reserved), 2);
        f.write(reinterpret_cast<const char*>(&mlen), 8);
        f.write(mtext.data(), std::streamsize(mtext.size()));
        f.write(reinterpret_cast<const char*>(blob.data()), std::streamsize(blob.size() * 4));
        if (!f) throw DataError("save_checkpoint: write failed for " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

template <typename T>
struct LoadedModel {
    ModelGraph<T> model;
    CheckpointMeta meta;
};

namespace detail {

inline bool config_compatible(const ModelConfig& a, const ModelConfig& b) {
    ModelConfig x = a, y = b;
    x.fragment_size = y.fragment_size;  // weights are length-agnostic
    return x == y;
}

}  // namespace detail

template <typename T>
LoadedModel<T> load_checkpoint(const std::string& path, const std::optional<ModelConfig>& expected = std::nullopt) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("load_checkpoint: cannot open " + path);
    char magic[4];
    std::uint16_t version = 0, reserved = 0;
    std::uint64_t mlen = 0;
    f.read(magic, 4);
    f.read(reinterpret_cast<char*>(&version), 2);
    f.read(reinterpret_cast<char*>(&reserved), 2);
    f.read(reinterpret_cast<char*>(&mlen), 8);
    if (!f || std::string(magic, 4) != "FFCK") throw DataError("load_checkpoint: bad magic in " + path);
    if (version != 1) throw DataError("load_checkpoint: unsupported version " + std::to_string(version));
    std::string mtext(mlen, '\0');
    f.read(mtext.data(), std::streamsize(mlen));
    if (!f) throw DataError("load_checkpoint: truncated manifest");
    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(mtext);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("load_checkpoint: manifest parse error: ") + e.what());
    }

    std::vector<char> raw((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    if (raw.size() % 4 != 0) throw DataError("load_checkpoint: blob length not a multiple of 4");
    std::vector<float> blob(raw.size() / 4, 0.0f);
    if (!raw.empty()) std::memcpy(blob.data(), raw.data(), raw.size());

    std::uint64_t digest = fnv1a64(raw.data(), raw.size());
    if (manifest.at("blob_fnv1a").get<std::string>() != detail::hex64(digest))
        throw DataError("load_checkpoint: blob digest mismatch (file corrupted?)");

    ModelConfig stored = manifest.at("config").get<ModelConfig>();
    ModelConfig cfg = stored;
    if (expected) {
        if (!detail::config_compatible(stored, *expected))
            throw DataError("load_checkpoint: stored config incompatible with expected config");
        cfg = *expected;
    }
    LoadedModel<T> out{build_model<T>(cfg, 0), {}};

    const auto& meta = manifest.at("metadata");
    out.meta.seed = meta.value("seed", std::uint64_t(0));
    out.meta.epochs = meta.value("epochs", std::int64_t(0));
    out.meta.corpus_digest = meta.value("corpus_digest", std::string());
    out.meta.class_names = meta.value("class_names", std::vector<std::string>{});

    std::size_t filled = 0;
    for (const auto& t : manifest.at("tensors")) {
        std::string name = t.at("name").get<std::string>();
        auto shape = t.at("shape").get<std::vector<std::int64_t>>();
        std::uint64_t off = t.at("offset").get<std::uint64_t>();
        std::int64_t numel = t.at("numel").get<std::int64_t>();
        Tensor<T>* dst = out.model.find(name);
        if (!dst) throw DataError("load_checkpoint: unexpected tensor '" + name + "' in manifest");
        if (dst->shape() != shape)
            throw DataError("load_checkpoint: shape mismatch for '" + name + "': file " + shape_str(shape) +
                            " vs model " + shape_str(dst->shape()));
        if (off % 4 != 0 || off / 4 + std::uint64_t(numel) > blob.size())
            throw DataError("load_checkpoint: tensor '" + name + "' extends past blob end");
        auto d = dst->data();
        for (std::int64_t i = 0; i < numel; ++i) d[i] = T(blob[off / 4 + std::uint64_t(i)]);
        ++filled;
    }
    if (filled != out.model.store.size())
        throw DataError("load_checkpoint: manifest covers " + std::to_string(filled) + " of " +
                        std::to_string(out.model.store.size()) + " model tensors");
    return out;
}

// ---------------------------------------------------------------------------
// Transfer: copy all tensors between same-architecture models; fragment
// sizes may differ (global average pooling makes the graph length-agnostic).

struct TransferReport {
    std::vector<std::string> copied;
};

template <typename T>
TransferReport transfer_load(ModelGraph<T>& target, const ModelGraph<T>& source) {
    if (target.config.architecture != source.config.architecture)
        throw UsageError(std::string("transfer_load: architecture mismatch (") + arch_name(target.config.architecture) +
                         " vs " + arch_name(source.config.architecture) + ")");
    if (target.config.num_classes != source.config.num_classes)
        throw UsageError("transfer_load: class count mismatch (" + std::to_string(target.config.num_classes) + " vs " +
                         std::to_string(source.config.num_classes) + ")");
    TransferReport report;
    for (const auto& e : source.store) {
        Tensor<T>* dst = target.find(e.name);
        if (!dst) throw UsageError("transfer_load: tensor '" + e.name + "' missing from target");
        if (dst->shape() != e.tensor.shape())
            throw UsageError("transfer_load: shape mismatch for '" + e.name + "'");
        std::copy(e.tensor.data().begin(), e.tensor.data().end(), dst->data().begin());
        report.copied.push_back(e.name);
    }
    return report;
}

template <typename T>
TransferReport transfer_load(ModelGraph<T>& target, const std::string& checkpoint_path) {
    auto loaded = load_checkpoint<T>(checkpoint_path);
    return transfer_load(target, loaded.model);
}

}  // namespace ffc
