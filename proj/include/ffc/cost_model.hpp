#pragma once

#include <cstdint>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ffc/layers.hpp"
#include "ffc/models.hpp"

namespace ffc {

// Exact rational, used for the separable-convolution reduction ratio.
struct Rational {
    std::int64_t num = 0;
    std::int64_t den = 1;

    static Rational of(std::int64_t n, std::int64_t d) {
        if (d == 0) throw UsageError("Rational: zero denominator");
        if (d < 0) {
            n = -n;
            d = -d;
        }
        std::int64_t g = std::gcd(n < 0 ? -n : n, d);
        if (g == 0) g = 1;
        return Rational{n / g, d / g};
    }
    Rational operator+(const Rational& o) const { return of(num * o.den + o.num * den, den * o.den); }
    Rational operator*(const Rational& o) const { return of(num * o.num, den * o.den); }
    bool operator==(const Rational& o) const { return num == o.num && den == o.den; }
    double value() const { return double(num) / double(den); }
    std::string str() const { return std::to_string(num) + "/" + std::to_string(den); }
};

// ---------------------------------------------------------------------------
// Per-layer mult-add costs. D_F is taken as the OUTPUT spatial length so that
// strided layers are charged correctly; one FLOP = one multiply-accumulate.

inline std::int64_t standard_conv_cost(const ConvLayerSpec& spec) {
    if (spec.kind != ConvKind::standard) throw UsageError("standard_conv_cost: spec.kind must be standard");
    return spec.output_length() * spec.out_channels * spec.in_channels * spec.kernel;
}

inline std::int64_t depthwise_cost(const ConvLayerSpec& spec) {
    if (spec.kind != ConvKind::depthwise) throw UsageError("depthwise_cost: spec.kind must be depthwise");
    return spec.output_length() * spec.in_channels * spec.kernel;
}

inline std::int64_t separable_cost(const ConvLayerSpec& spec) {
    std::int64_t df = spec.output_length();
    return df * spec.in_channels * spec.kernel + df * spec.out_channels * spec.in_channels;
}

// separable cost / standard cost = 1/N + 1/D_K, exact
inline Rational reduction_ratio(std::int64_t out_channels, std::int64_t kernel) {
    if (out_channels <= 0 || kernel <= 0) throw UsageError("reduction_ratio: N and D_K must be positive");
    return Rational::of(1, out_channels) + Rational::of(1, kernel);
}

// ---------------------------------------------------------------------------
// Whole-model reports

struct CostRow {
    std::string name;
    std::string kind;  // embedding | conv-standard | conv-depthwise | conv-pointwise | norm | act | maxpool | avgpool | fc | scale | dropout
    std::int64_t d_f = 0;     // spatial length (output-length convention for convs)
    std::int64_t d_k = 0;
    std::int64_t m = 0;
    std::int64_t n = 0;
    std::int64_t stride = 1;
    std::int64_t params = 0;
    std::int64_t mult_adds = 0;
    std::optional<Rational> reduction;  // separable pairs only (on the pointwise row)
};

struct CostReport {
    std::vector<CostRow> rows;
    std::int64_t total_params = 0;
    std::int64_t total_mult_adds = 0;

    void finalize() {
        total_params = 0;
        total_mult_adds = 0;
        for (const auto& r : rows) {
            total_params += r.params;
            total_mult_adds += r.mult_adds;
        }
    }
};

namespace detail {

inline CostRow aux_row(std::string name, std::string kind, std::int64_t length, std::int64_t channels,
                       std::int64_t params = 0) {
    // normalization/activation/pooling charged at 2 ops per element read
    CostRow r;
    r.name = std::move(name);
    r.kind = std::move(kind);
    r.d_f = length;
    r.m = channels;
    r.n = channels;
    r.params = params;
    r.mult_adds = 2 * length * channels;
    return r;
}

}  // namespace detail

template <typename T>
CostReport model_cost(const ModelGraph<T>& model, std::int64_t fragment_size) {
    const ModelConfig& c = model.config;
    if (fragment_size <= 0 || fragment_size % (c.pool_window * c.pool_window * c.pool_window) != 0)
        throw UsageError("model_cost: fragment_size must be a positive multiple of the pool chain");
    CostReport rep;
    const bool modified = c.architecture == Arch::m_dsc;

    CostRow emb;
    emb.name = "embedding";
    emb.kind = "embedding";
    emb.d_f = fragment_size;
    emb.m = 256;
    emb.n = c.embed_dim;
    emb.params = 256 * c.embed_dim;
    emb.mult_adds = 0;  // table lookup
    rep.rows.push_back(emb);

    std::int64_t L = fragment_size;
    {
        CostRow stem;
        stem.name = "stem";
        stem.d_k = c.stem_kernel;
        stem.stride = 1;
        stem.d_f = L;
        stem.m = c.embed_dim;
        if (modified) {
            ConvLayerSpec s{L, c.stem_kernel, c.embed_dim, c.embed_dim, 1, ConvKind::depthwise};
            stem.kind = "conv-depthwise";
            stem.n = c.embed_dim;
            stem.params = c.stem_kernel * c.embed_dim + c.embed_dim;
            stem.mult_adds = depthwise_cost(s);
        } else {
            ConvLayerSpec s{L, c.stem_kernel, c.embed_dim, c.stem_channels, 1, ConvKind::standard};
            stem.kind = "conv-standard";
            stem.n = c.stem_channels;
            stem.params = c.stem_kernel * c.embed_dim * c.stem_channels + c.stem_channels;
            stem.mult_adds = standard_conv_cost(s);
        }
        rep.rows.push_back(stem);
        rep.rows.push_back(detail::aux_row("stem.act", "act", L, modified ? c.embed_dim : c.stem_channels));
    }

    std::int64_t in_ch = c.stem_channels;
    for (int i = 0; i < 3; ++i) {
        const std::int64_t out_ch = c.block_channels[std::size_t(i)];
        const std::string prefix = "block" + std::to_string(i + 1);
        for (auto k : c.branch_kernels) {
            const std::string bp = prefix + ".k" + std::to_string(k);
            ConvLayerSpec dw{L, k, in_ch, in_ch, 1, ConvKind::depthwise};
            CostRow dwr;
            dwr.name = bp + ".dw";
            dwr.kind = "conv-depthwise";
            dwr.d_f = L;
            dwr.d_k = k;
            dwr.m = in_ch;
            dwr.n = in_ch;
            dwr.params = k * in_ch;
            dwr.mult_adds = depthwise_cost(dw);
            rep.rows.push_back(dwr);
            rep.rows.push_back(detail::aux_row(bp + ".norm1", "norm", L, in_ch, 2 * in_ch));
            if (modified) rep.rows.push_back(detail::aux_row(bp + ".act1", "act", L, in_ch));

            CostRow pwr;
            pwr.name = bp + ".pw";
            pwr.kind = "conv-pointwise";
            pwr.d_f = L;
            pwr.d_k = 1;
            pwr.m = in_ch;
            pwr.n = out_ch;
            pwr.params = in_ch * out_ch;
            pwr.mult_adds = L * out_ch * in_ch;
            pwr.reduction = reduction_ratio(out_ch, k);
            rep.rows.push_back(pwr);
            rep.rows.push_back(detail::aux_row(bp + ".norm2", "norm", L, out_ch, 2 * out_ch));
            if (modified) rep.rows.push_back(detail::aux_row(bp + ".act2", "act", L, out_ch));
        }
        rep.rows.push_back(detail::aux_row(prefix + ".maxpool", "maxpool", L, out_ch));
        if (in_ch != out_ch) {
            ConvLayerSpec sc{L, 1, in_ch, out_ch, c.shortcut_stride, ConvKind::standard};
            CostRow scr;
            scr.name = prefix + ".shortcut";
            scr.kind = "conv-standard";
            scr.d_f = sc.output_length();
            scr.d_k = 1;
            scr.m = in_ch;
            scr.n = out_ch;
            scr.stride = c.shortcut_stride;
            scr.params = in_ch * out_ch + out_ch;
            scr.mult_adds = standard_conv_cost(sc);
            rep.rows.push_back(scr);
        } else {
            rep.rows.push_back(detail::aux_row(prefix + ".shortcut.maxpool", "maxpool", L, in_ch));
        }
        L /= c.pool_window;
        if (c.architecture == Arch::dsc_se) {
            const std::int64_t hidden = out_ch / c.se_reduction;
            rep.rows.push_back(detail::aux_row(prefix + ".se.squeeze", "avgpool", L, out_ch));
            CostRow fc1;
            fc1.name = prefix + ".se.fc1";
            fc1.kind = "fc";
            fc1.d_f = 1;
            fc1.m = out_ch;
            fc1.n = hidden;
            fc1.params = out_ch * hidden + hidden;
            fc1.mult_adds = out_ch * hidden;
            rep.rows.push_back(fc1);
            CostRow fc2;
            fc2.name = prefix + ".se.fc2";
            fc2.kind = "fc";
            fc2.d_f = 1;
            fc2.m = hidden;
            fc2.n = out_ch;
            fc2.params = hidden * out_ch + out_ch;
            fc2.mult_adds = hidden * out_ch;
            rep.rows.push_back(fc2);
            CostRow scale;
            scale.name = prefix + ".se.scale";
            scale.kind = "scale";
            scale.d_f = L;
            scale.m = out_ch;
            scale.n = out_ch;
            scale.mult_adds = L * out_ch;
            rep.rows.push_back(scale);
        }
        in_ch = out_ch;
    }

    rep.rows.push_back(detail::aux_row("global_avgpool", "avgpool", L, in_ch));
    if (modified) {
        CostRow dr;
        dr.name = "dropout";
        dr.kind = "dropout";
        dr.d_f = 1;
        dr.m = in_ch;
        dr.n = in_ch;
        dr.mult_adds = 0;  // identity at inference
        rep.rows.push_back(dr);
    }
    CostRow head;
    head.name = "head";
    head.kind = "fc";
    head.d_f = 1;
    head.d_k = 1;
    head.m = c.head_channels;
    head.n = c.num_classes;
    head.params = c.head_channels * c.num_classes + c.num_classes;
    head.mult_adds = c.head_channels * c.num_classes;
    rep.rows.push_back(head);

    rep.finalize();
    return rep;
}

template <typename T>
CostReport count_params(const ModelGraph<T>& model) {
    return model_cost(model, model.config.fragment_size);
}

template <typename T>
CostReport count_flops(const ModelGraph<T>& model, std::int64_t fragment_size) {
    return model_cost(model, fragment_size);
}

// ---------------------------------------------------------------------------
// Report rendering

inline std::string cost_report_text(const CostReport& rep) {
    std::ostringstream os;
    auto line = [&](const std::string& name, const std::string& kind, const std::string& df, const std::string& dk,
                    const std::string& m, const std::string& n, const std::string& params, const std::string& macs,
                    const std::string& ratio) {
        os << "  ";
        os.width(26);
        os << std::left << name;
        os.width(16);
        os << std::left << kind;
        os.width(8);
        os << std::right << df;
        os.width(5);
        os << dk;
        os.width(6);
        os << m;
        os.width(6);
        os << n;
        os.width(12);
        os << params;
        os.width(14);
        os << macs;
        if (!ratio.empty()) os << "  ratio=" << ratio;
        os << "\n";
    };
    line("layer", "kind", "D_F", "D_K", "M", "N", "params", "mult_adds", "");
    for (const auto& r : rep.rows) {
        std::string ratio;
        if (r.reduction) {
            char buf[64];
            std::snprintf(buf, sizeof buf, "%s (%.6f)", r.reduction->str().c_str(), r.reduction->value());
            ratio = buf;
        }
        line(r.name, r.kind, std::to_string(r.d_f), r.d_k ? std::to_string(r.d_k) : "-", std::to_string(r.m),
             std::to_string(r.n), std::to_string(r.params), std::to_string(r.mult_adds), ratio);
    }
    os << "  total params:    " << rep.total_params << "\n";
    os << "  total mult-adds: " << rep.total_mult_adds;
    char mf[64];
    std::snprintf(mf, sizeof mf, " (%.2f MFLOPs)", double(rep.total_mult_adds) / 1e6);
    os << mf << "\n";
    return os.str();
}

inline nlohmann::json cost_report_json(const CostReport& rep) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : rep.rows) {
        nlohmann::json jr{{"name", r.name},     {"kind", r.kind}, {"d_f", r.d_f},       {"d_k", r.d_k},
                          {"m", r.m},           {"n", r.n},       {"stride", r.stride}, {"params", r.params},
                          {"mult_adds", r.mult_adds}};
        if (r.reduction) jr["reduction_ratio"] = {{"num", r.reduction->num}, {"den", r.reduction->den}, {"value", r.reduction->value()}};
        rows.push_back(jr);
    }
    return nlohmann::json{
        {"rows", rows},
        {"totals", {{"params", rep.total_params}, {"mult_adds", rep.total_mult_adds}}},
    };
}

}  // namespace ffc
