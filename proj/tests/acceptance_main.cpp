// Acceptance suite: one pass/fail line per criterion, nonzero exit when any
// criterion fails. Criteria that share artifacts (the desk-scale checkpoint)
// run in id order, which already respects their dependencies.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "ffc/ffc.hpp"

#include "gradcheck.hpp"

using namespace ffc;

namespace {

struct Ctx {
    std::vector<std::string> errors;
    void expect(bool ok, const std::string& what) {
        if (!ok) errors.push_back(what);
    }
};

struct Outcome {
    int id;
    std::string name;
    bool pass;
    double seconds;
    std::string detail;
};

std::vector<Outcome> g_results;

void run_criterion(int id, const std::string& name, double budget_seconds,
                   const std::function<void(Ctx&)>& body) {
    Ctx ctx;
    auto t0 = std::chrono::steady_clock::now();
    try {
        body(ctx);
    } catch (const std::exception& e) {
        ctx.errors.push_back(std::string("exception: ") + e.what());
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (budget_seconds > 0 && secs > budget_seconds) {
        std::ostringstream os;
        os << "runtime " << secs << " s exceeds budget " << budget_seconds << " s";
        ctx.errors.push_back(os.str());
    }
    std::string detail;
    for (const auto& e : ctx.errors) detail += (detail.empty() ? "" : "; ") + e;
    g_results.push_back({id, name, ctx.errors.empty(), secs, detail});
    std::fprintf(stderr, "[%s] criterion %d: %s (%.1f s)%s%s\n", ctx.errors.empty() ? "PASS" : "FAIL", id,
                 name.c_str(), secs, detail.empty() ? "" : " -- ", detail.c_str());
}

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

ModelConfig tiny_config(Arch arch) {
    ModelConfig cfg;
    cfg.architecture = arch;
    cfg.fragment_size = 64;
    cfg.num_classes = 3;
    cfg.embed_dim = 8;
    cfg.stem_channels = 8;
    cfg.stem_kernel = 5;
    cfg.block_channels = {8, 12, 16};
    cfg.branch_kernels = {3, 5, 7};
    cfg.head_channels = 16;
    cfg.se_reduction = 2;
    cfg.norm_groups = 4;
    cfg.dropout_p = 0.0;  // replayed-mask dropout is checked separately
    return cfg;
}

std::vector<GeneratorKind> eight_generators() {
    return {GeneratorKind::constant_fill, GeneratorKind::printable_text, GeneratorKind::uniform_random,
            GeneratorKind::run_length,    GeneratorKind::periodic_pattern, GeneratorKind::magic_header,
            GeneratorKind::byte_gradient, GeneratorKind::base64_stream};
}

// artifacts shared between criteria 6, 7 and 10
std::string g_ckpt512;
double g_test_acc_512 = 0.0;

// ---------------------------------------------------------------------------

void criterion1(Ctx& ctx) {
    Rng rng(101);
    for (int trial = 0; trial < 1000; ++trial) {
        ConvLayerSpec spec;
        spec.input_length = 1 + std::int64_t(rng.next_below(5000));
        spec.kernel = 2 * std::int64_t(rng.next_below(14)) + 1;
        spec.in_channels = 1 + std::int64_t(rng.next_below(256));
        spec.out_channels = 1 + std::int64_t(rng.next_below(256));
        spec.stride = 1 + std::int64_t(rng.next_below(4));
        spec.kind = ConvKind::standard;
        std::int64_t lo = spec.output_length();
        std::int64_t macs = 0;
        for (std::int64_t o = 0; o < lo; ++o) macs += spec.out_channels * spec.in_channels * spec.kernel;
        ctx.expect(standard_conv_cost(spec) == macs, "standard cost mismatch");

        ConvLayerSpec dw = spec;
        dw.kind = ConvKind::depthwise;
        dw.out_channels = dw.in_channels;
        std::int64_t dmacs = 0;
        for (std::int64_t o = 0; o < lo; ++o) dmacs += dw.in_channels * dw.kernel;
        ctx.expect(depthwise_cost(dw) == dmacs, "depthwise cost mismatch");
        ctx.expect(separable_cost(dw) == dmacs + lo * dw.in_channels * dw.in_channels, "separable cost mismatch");

        // Eq. 5 in exact rational arithmetic
        std::int64_t n = 1 + std::int64_t(rng.next_below(1024));
        std::int64_t k = 1 + std::int64_t(rng.next_below(27));
        Rational ratio = reduction_ratio(n, k);
        ctx.expect(ratio == Rational::of(k + n, n * k), "reduction ratio not 1/N + 1/D_K");
        std::int64_t df = 1 + std::int64_t(rng.next_below(4096));
        std::int64_t m = 1 + std::int64_t(rng.next_below(96));
        ctx.expect(ratio * Rational::of(df * n * m * k, 1) == Rational::of(df * m * k + df * n * m, 1),
                   "ratio times standard cost is not the separable cost");
    }
    double min_red = 1.0, max_red = 0.0;
    for (std::int64_t n = 32; n <= 1024; ++n)
        for (std::int64_t k = 9; k <= 27; ++k) {
            double red = 1.0 - reduction_ratio(n, k).value();
            min_red = std::min(min_red, red);
            max_red = std::max(max_red, red);
        }
    ctx.expect(min_red >= 0.85 && min_red < 0.86, "minimum reduction out of the published range");
    ctx.expect(max_red >= 0.95 && max_red <= 0.97, "maximum reduction out of the published range");
}

void criterion2(Ctx& ctx) {
    Rng rng(202);
    double worst = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        const std::int64_t L = 4 + std::int64_t(rng.next_below(60));
        const std::int64_t M = 1 + std::int64_t(rng.next_below(8));
        const std::int64_t N = 1 + std::int64_t(rng.next_below(10));
        const std::int64_t K = 2 * std::int64_t(rng.next_below(6)) + 1;
        auto x = Tensor<float>::uniform({L, M}, -1.0f, 1.0f, rng);
        auto dw = Tensor<float>::uniform({K, M}, -1.0f, 1.0f, rng);
        auto pw = Tensor<float>::uniform({M, N}, -1.0f, 1.0f, rng);
        ConvLayerSpec dspec{L, K, M, M, 1, ConvKind::depthwise};
        auto sep = pointwise_conv1d_forward(depthwise_conv1d_forward(x, dspec, dw), pw);
        auto wfull = Tensor<float>::zeros({K, M, N});
        for (std::int64_t k = 0; k < K; ++k)
            for (std::int64_t m = 0; m < M; ++m)
                for (std::int64_t n = 0; n < N; ++n)
                    wfull.data()[(k * M + m) * N + n] = dw.data()[k * M + m] * pw.data()[m * N + n];
        ConvLayerSpec sspec{L, K, M, N, 1, ConvKind::standard};
        auto full = conv1d_forward(x, sspec, wfull);
        for (std::int64_t i = 0; i < sep.numel(); ++i)
            worst = std::max(worst, double(std::abs(sep.data()[i] - full.data()[i])));
    }
    ctx.expect(worst < 1e-5, "factorization max abs diff " + std::to_string(worst) + " >= 1e-5");
}

void criterion3(Ctx& ctx) {
    Rng rng(303);
    double worst = 0.0;
    std::string worst_site;
    auto check = [&](const std::string& site, const std::function<Tensor<double>()>& loss,
                     std::vector<Tensor<double>> params, std::int64_t per_tensor) {
        auto res = ffc_test::gradcheck(loss, std::move(params), rng, per_tensor);
        if (res.max_rel_err > worst) {
            worst = res.max_rel_err;
            worst_site = site + ": " + res.worst;
        }
    };

    {  // embedding
        auto table = Tensor<double>::uniform({256, 4}, -1, 1, rng, true);
        std::vector<int> bytes{3, 40, 200, 3, 17, 255, 0};
        check("embedding", [&]() { return sum(mul(embedding_forward(bytes, table), embedding_forward(bytes, table))); },
              {table}, 24);
    }
    {  // standard conv
        auto x = Tensor<double>::uniform({2, 9, 3}, -1, 1, rng, true);
        auto w = Tensor<double>::uniform({5, 3, 4}, -1, 1, rng, true);
        auto b = Tensor<double>::uniform({4}, -1, 1, rng, true);
        ConvLayerSpec spec{9, 5, 3, 4, 2, ConvKind::standard};
        check("conv1d", [&]() {
            auto y = conv1d_forward(x, spec, w, &b);
            return sum(mul(y, y));
        }, {x, w, b}, -1);
    }
    {  // depthwise
        auto x = Tensor<double>::uniform({2, 8, 4}, -1, 1, rng, true);
        auto w = Tensor<double>::uniform({3, 4}, -1, 1, rng, true);
        ConvLayerSpec spec{8, 3, 4, 4, 1, ConvKind::depthwise};
        check("depthwise", [&]() {
            auto y = depthwise_conv1d_forward(x, spec, w);
            return sum(mul(y, y));
        }, {x, w}, -1);
    }
    {  // pointwise
        auto x = Tensor<double>::uniform({2, 6, 3}, -1, 1, rng, true);
        auto w = Tensor<double>::uniform({3, 5}, -1, 1, rng, true);
        check("pointwise", [&]() {
            auto y = pointwise_conv1d_forward(x, w);
            return sum(mul(y, y));
        }, {x, w}, -1);
    }
    for (Act kind : {Act::hardswish, Act::relu, Act::sigmoid}) {  // activations
        auto x = Tensor<double>::uniform({40}, -4, 4, rng, true);
        check("activation", [&]() { return sum(mul(activation(x, kind), activation(x, kind))); }, {x}, -1);
    }
    {  // batch norm (train)
        auto x = Tensor<double>::uniform({3, 5, 4}, -2, 2, rng, true);
        NormSpec spec{NormKind::batch, 4, 1, 1e-5, 0.1};
        NormState<double> st;
        st.gamma = Tensor<double>::uniform({4}, 0.5, 1.5, rng, true);
        st.beta = Tensor<double>::uniform({4}, -0.5, 0.5, rng, true);
        st.running_mean = Tensor<double>::zeros({4});
        st.running_var = Tensor<double>::filled({4}, 1.0);
        st.batches_tracked = Tensor<double>::zeros({1});
        check("batch norm", [&]() {
            auto y = normalize(x, spec, st, Mode::train);
            return sum(mul(y, y));
        }, {x, st.gamma, st.beta}, -1);
    }
    {  // group norm
        auto x = Tensor<double>::uniform({2, 6, 6}, -2, 2, rng, true);
        NormSpec spec{NormKind::group, 6, 3, 1e-5, 0.1};
        NormState<double> st;
        st.gamma = Tensor<double>::uniform({6}, 0.5, 1.5, rng, true);
        st.beta = Tensor<double>::uniform({6}, -0.5, 0.5, rng, true);
        check("group norm", [&]() {
            auto y = normalize(x, spec, st, Mode::train);
            return sum(mul(y, y));
        }, {x, st.gamma, st.beta}, -1);
    }
    {  // pools
        auto x = Tensor<double>::uniform({2, 8, 3}, -1, 1, rng, true);
        check("maxpool", [&]() {
            auto y = maxpool1d(x);
            return sum(mul(y, y));
        }, {x}, -1);
        check("avgpool", [&]() {
            auto y = global_avgpool(x);
            return sum(mul(y, y));
        }, {x}, -1);
    }
    {  // linear + SE
        auto x = Tensor<double>::uniform({3, 4}, -1, 1, rng, true);
        auto w = Tensor<double>::uniform({4, 3}, -1, 1, rng, true);
        auto b = Tensor<double>::uniform({3}, -1, 1, rng, true);
        check("linear", [&]() {
            auto y = linear(x, w, &b);
            return sum(mul(y, y));
        }, {x, w, b}, -1);

        auto xs = Tensor<double>::uniform({2, 4, 4}, -1, 1, rng, true);
        SEParams<double> p;
        p.fc1_weight = Tensor<double>::uniform({4, 2}, -0.7, 0.7, rng, true);
        p.fc1_bias = Tensor<double>::uniform({2}, -0.2, 0.2, rng, true);
        p.fc2_weight = Tensor<double>::uniform({2, 4}, -0.7, 0.7, rng, true);
        p.fc2_bias = Tensor<double>::uniform({4}, -0.2, 0.2, rng, true);
        check("se block", [&]() {
            auto y = se_block(xs, p, 2);
            return sum(mul(y, y));
        }, {xs, p.fc1_weight, p.fc1_bias, p.fc2_weight, p.fc2_bias}, -1);
    }
    {  // dropout with a replayed mask
        auto x = Tensor<double>::uniform({30}, -1, 1, rng, true);
        check("dropout", [&]() {
            Rng drng(4242);
            auto y = dropout(x, 0.25, Mode::train, drng);
            return sum(mul(y, y));
        }, {x}, -1);
    }
    {  // softmax cross-entropy
        auto logits = Tensor<double>::uniform({3, 5}, -2, 2, rng, true);
        std::vector<int> labels{0, 4, 2};
        check("softmax-ce", [&]() { return softmax_cross_entropy(logits, labels).loss; }, {logits}, -1);
    }
    Rng byte_rng(911);
    for (Arch arch : {Arch::dsc, Arch::dsc_se, Arch::m_dsc}) {  // full architectures, tiny widths
        auto model = build_model<double>(tiny_config(arch), 31);
        ByteBatch bb(2, 64);
        for (auto& v : bb.bytes) v = byte_rng.next_byte();
        std::vector<int> labels{0, 2};
        std::vector<Tensor<double>> params;
        for (auto* e : model.trainable_entries()) params.push_back(e->tensor);
        check(std::string("arch ") + arch_name(arch), [&]() {
            auto logits = model.forward(bb, Mode::train);
            return softmax_cross_entropy(logits, labels).loss;
        }, params, 3);
    }
    ctx.expect(worst < 1e-4, "worst gradient rel-err " + std::to_string(worst) + " at " + worst_site);
}

void criterion4(Ctx& ctx) {
    for (Arch arch : {Arch::dsc, Arch::dsc_se, Arch::m_dsc}) {
        for (std::int64_t frag : {512, 4096}) {
            std::vector<std::int64_t> totals;
            for (std::int64_t classes : {2, 5, 11, 25, 75}) {
                ModelConfig cfg;
                cfg.architecture = arch;
                cfg.fragment_size = frag;
                cfg.num_classes = classes;
                if (arch == Arch::m_dsc) cfg.stem_channels = cfg.embed_dim;
                auto model = build_model<float>(cfg, 0);
                auto rep = count_params(model);
                ctx.expect(rep.total_params == model.parameter_count(),
                           std::string(arch_name(arch)) + ": report total != weight-store enumeration");
                totals.push_back(model.parameter_count());
            }
            const std::array<std::int64_t, 5> ks{2, 5, 11, 25, 75};
            for (std::size_t i = 0; i < ks.size(); ++i)
                for (std::size_t j = 0; j < ks.size(); ++j)
                    ctx.expect(totals[i] - totals[j] == 129 * (ks[i] - ks[j]),
                               std::string(arch_name(arch)) + ": head-delta law violated");
        }
    }
    ModelConfig dsc75;
    dsc75.num_classes = 75;
    auto model = build_model<float>(dsc75, 0);
    double total = double(model.parameter_count());
    ctx.expect(total > 103083.0 * 0.75 && total < 103083.0 * 1.25,
               "dsc@75 params " + std::to_string(std::int64_t(total)) + " outside 103,083 +/- 25%");
    // published cross-scenario delta: 75 classes vs 11 classes
    ModelConfig dsc11 = dsc75;
    dsc11.num_classes = 11;
    auto m11 = build_model<float>(dsc11, 0);
    ctx.expect(model.parameter_count() - m11.parameter_count() == 8256, "75-vs-11 delta is not 8,256");
}

void criterion5(Ctx& ctx) {
    auto total = [](Arch arch) {
        ModelConfig cfg;
        cfg.architecture = arch;
        cfg.num_classes = 75;
        if (arch == Arch::m_dsc) cfg.stem_channels = cfg.embed_dim;
        auto model = build_model<float>(cfg, 0);
        return count_flops(model, 4096).total_mult_adds;
    };
    std::int64_t m_dsc = total(Arch::m_dsc), dsc = total(Arch::dsc), dsc_se = total(Arch::dsc_se);
    ctx.expect(m_dsc < dsc, "m-dsc mult-adds not below dsc");
    ctx.expect(dsc < dsc_se, "dsc mult-adds not below dsc-se");
}

void criterion6(Ctx& ctx) {
    // 2-class variant: constant vs uniform-random, >= 0.99 within 2 minutes
    {
        auto t0 = std::chrono::steady_clock::now();
        auto corpus = synth_corpus({GeneratorKind::constant_fill, GeneratorKind::uniform_random}, 1000, 512, 7);
        auto parts = split(corpus, {0.8, 0.1, 0.1}, 7);
        ModelConfig cfg;
        cfg.fragment_size = 512;
        cfg.num_classes = 2;
        auto model = build_model<float>(cfg, 1);
        TrainConfig tc;
        tc.epochs = 1;
        tc.batch_size = 128;
        tc.seed = 1;
        tc.early_stop_patience = 0;
        train(model, parts[0], parts[1], tc);
        double acc = evaluate(model, parts[2]).accuracy;
        double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        ctx.expect(acc >= 0.99, "2-class test accuracy " + std::to_string(acc) + " < 0.99");
        ctx.expect(secs < 120.0, "2-class run took " + std::to_string(secs) + " s (budget 120)");
    }
    // 8-class task: >= 0.90 within 15 minutes and at most 20 epochs
    {
        auto t0 = std::chrono::steady_clock::now();
        auto corpus = synth_corpus(eight_generators(), 1000, 512, 11);
        ctx.expect(corpus.size() == 8000, "expected 8,000 records");
        auto counts = corpus.per_class_counts();
        for (auto c : counts) ctx.expect(c == 1000, "corpus not balanced");
        auto parts = split(corpus, {0.8, 0.1, 0.1}, 11);
        ModelConfig cfg;
        cfg.fragment_size = 512;
        cfg.num_classes = 8;
        auto model = build_model<float>(cfg, 2);
        TrainConfig tc;
        tc.epochs = 3;  // <= 20 per the budget
        tc.batch_size = 128;
        tc.seed = 2;
        tc.early_stop_patience = 0;
        auto result = train(model, parts[0], parts[1], tc);
        double acc = evaluate(model, parts[2]).accuracy;
        double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        ctx.expect(acc >= 0.90, "8-class test accuracy " + std::to_string(acc) + " < 0.90");
        ctx.expect(secs < 900.0, "8-class run took " + std::to_string(secs) + " s (budget 900)");
        ctx.expect(result.history.size() <= 20, "epoch budget exceeded");

        g_ckpt512 = temp_path("ffc_acceptance_512.ckpt");
        g_test_acc_512 = acc;
        CheckpointMeta meta;
        meta.seed = 2;
        meta.epochs = std::int64_t(result.history.size());
        meta.corpus_digest = detail::hex64(corpus.digest());
        meta.class_names = corpus.class_names;
        save_checkpoint(model, g_ckpt512, meta);
    }
}

void criterion7(Ctx& ctx) {
    if (g_ckpt512.empty()) {
        ctx.expect(false, "criterion 6 checkpoint unavailable");
        return;
    }
    // full tensor coverage from the 512 checkpoint into a 4096 model
    ModelConfig cfg;
    cfg.fragment_size = 4096;
    cfg.num_classes = 8;
    auto probe = build_model<float>(cfg, 5);
    auto report = transfer_load(probe, g_ckpt512);
    ctx.expect(report.copied.size() == probe.store.size(),
               "transfer covered " + std::to_string(report.copied.size()) + " of " +
                   std::to_string(probe.store.size()) + " tensors");

    // pretraining reaches 85% in no more epochs than from-scratch
    auto corpus = synth_corpus(eight_generators(), 120, 4096, 13);
    auto parts = split(corpus, {0.8, 0.2}, 13);

    // transferred weights evaluate far from a random init on held-out data
    {
        auto fresh = build_model<float>(cfg, 6);
        double acc_random = evaluate(fresh, parts[1]).accuracy;
        double acc_transfer = evaluate(probe, parts[1]).accuracy;
        ctx.expect(acc_transfer > acc_random + 0.1,
                   "transferred accuracy " + std::to_string(acc_transfer) + " not above random-init " +
                       std::to_string(acc_random));
    }

    auto epochs_to_85 = [&](bool pretrained) {
        auto model = build_model<float>(cfg, 5);
        TrainConfig tc;
        tc.epochs = 6;
        tc.batch_size = 16;
        tc.seed = 5;
        tc.early_stop_patience = 0;
        tc.stop_at_val_accuracy = 0.85;
        if (pretrained) tc.pretrained_checkpoint = g_ckpt512;
        auto result = train(model, parts[0], parts[1], tc);
        for (const auto& e : result.history)
            if (e.val_accuracy >= 0.85) return e.epoch;
        return std::int64_t(99);
    };
    std::int64_t scratch = epochs_to_85(false);
    std::int64_t pretrained = epochs_to_85(true);
    ctx.expect(scratch <= 6, "from-scratch never reached 85% within the epoch budget");
    ctx.expect(pretrained <= scratch, "pretrained needed " + std::to_string(pretrained) +
                                          " epochs vs " + std::to_string(scratch) + " from scratch");
}

void criterion8(Ctx& ctx) {
    const std::array<int, 6> counts{75, 11, 25, 5, 2, 2};
    for (int s = 1; s <= 6; ++s) {
        auto m = ScenarioMap::make(s);
        ctx.expect(m.num_classes == counts[std::size_t(s - 1)], "scenario " + std::to_string(s) + " class count");
    }
    const auto& table = GroupingTable::instance();
    const std::array<int, 11> sizes{13, 7, 6, 4, 9, 7, 4, 11, 3, 7, 4};
    for (int g = 0; g < 11; ++g)
        ctx.expect(table.group_size(g) == sizes[std::size_t(g)], "grouping partition size " + std::to_string(g));
    ctx.expect(int(table.extensions.size()) == 75, "extension count");

    auto s4 = ScenarioMap::make(4);
    std::array<int, 5> partition{};
    for (const auto& ext : table.extensions) partition[std::size_t(*s4.map(ext))]++;
    ctx.expect((partition == std::array<int, 5>{1, 11, 7, 5, 51}), "scenario-4 partition sizes");

    auto s6 = ScenarioMap::make(6);
    ctx.expect(!s6.map("exe").has_value(), "scenario 6 should exclude exe");
    ctx.expect(!s6.map("pdf").has_value(), "scenario 6 should exclude pdf");
    ctx.expect(s6.map("jpg").value_or(-1) == 0, "scenario 6 jpg class");
    int members = 0;
    for (const auto& ext : table.extensions)
        if (s6.map(ext)) ++members;
    ctx.expect(members == 17, "scenario 6 member count");

    auto s1 = ScenarioMap::make(1);
    std::set<int> ids;
    for (const auto& ext : table.extensions) ids.insert(*s1.map(ext));
    ctx.expect(ids.size() == 75 && *ids.begin() == 0 && *ids.rbegin() == 74, "scenario 1 not a bijection");
}

void criterion9(Ctx& ctx) {
    // bitwise-identical loss trajectories across two seed-fixed runs
    auto corpus = synth_corpus({GeneratorKind::constant_fill, GeneratorKind::uniform_random}, 60, 512, 21);
    auto parts = split(corpus, {0.8, 0.2}, 21);
    ModelConfig cfg;
    cfg.fragment_size = 512;
    cfg.num_classes = 2;
    auto run = [&]() {
        auto model = build_model<float>(cfg, 9);
        TrainConfig tc;
        tc.epochs = 2;
        tc.batch_size = 32;
        tc.seed = 9;
        tc.early_stop_patience = 0;
        auto result = train(model, parts[0], parts[1], tc);
        return std::make_pair(std::move(model), std::move(result));
    };
    auto [m1, r1] = run();
    auto [m2, r2] = run();
    bool traj = r1.history.size() == r2.history.size();
    for (std::size_t e = 0; traj && e < r1.history.size(); ++e)
        traj = r1.history[e].train_loss == r2.history[e].train_loss &&
               r1.history[e].val_accuracy == r2.history[e].val_accuracy;
    ctx.expect(traj, "loss trajectories differ across seed-fixed runs");
    bool weights = true;
    for (std::size_t i = 0; i < m1.store.size(); ++i) {
        auto a = m1.store[i].tensor.data();
        auto b = m2.store[i].tensor.data();
        for (std::int64_t j = 0; j < std::int64_t(a.size()); ++j)
            if (a[j] != b[j]) weights = false;
    }
    ctx.expect(weights, "final weights differ across seed-fixed runs");

    // corpus round trip, bitwise
    std::string cpath = temp_path("ffc_acceptance_corpus.ffc");
    corpus_write(cpath, corpus);
    auto back = corpus_read(cpath);
    ctx.expect(back.labels == corpus.labels && back.bytes == corpus.bytes && back.digest() == corpus.digest(),
               "corpus round trip not bitwise identical");

    // corrupted corpus rejected
    {
        std::fstream f(cpath, std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(0);
        f.write("ZZZZ", 4);
    }
    bool rejected = false;
    try {
        corpus_read(cpath);
    } catch (const DataError&) {
        rejected = true;
    }
    ctx.expect(rejected, "corrupted corpus magic was accepted");
    std::filesystem::remove(cpath);
    std::filesystem::remove(cpath + ".json");

    // checkpoint round trip bitwise + eval logits bitwise + tamper detection
    std::string kpath = temp_path("ffc_acceptance_ckpt.ckpt");
    save_checkpoint(m1, kpath);
    auto loaded = load_checkpoint<float>(kpath);
    bool bitwise = loaded.model.store.size() == m1.store.size();
    for (std::size_t i = 0; bitwise && i < m1.store.size(); ++i) {
        auto a = m1.store[i].tensor.data();
        auto b = loaded.model.store[i].tensor.data();
        for (std::int64_t j = 0; j < std::int64_t(a.size()); ++j)
            if (a[j] != b[j]) bitwise = false;
    }
    ctx.expect(bitwise, "checkpoint round trip not bitwise identical");
    ByteBatch bb(2, 512);
    Rng rng(33);
    for (auto& v : bb.bytes) v = rng.next_byte();
    auto l1 = m1.forward(bb, Mode::eval);
    auto l2 = loaded.model.forward(bb, Mode::eval);
    bool logits_same = true;
    for (std::int64_t i = 0; i < l1.numel(); ++i)
        if (l1.data()[i] != l2.data()[i]) logits_same = false;
    ctx.expect(logits_same, "eval logits changed across checkpoint round trip");
    {
        std::fstream f(kpath, std::ios::in | std::ios::out | std::ios::binary);
        f.seekg(-1, std::ios::end);
        char b;
        f.get(b);
        f.seekp(-1, std::ios::end);
        f.put(char(b ^ 0x01));
    }
    rejected = false;
    try {
        load_checkpoint<float>(kpath);
    } catch (const DataError&) {
        rejected = true;
    }
    ctx.expect(rejected, "tampered checkpoint was accepted");
    std::filesystem::remove(kpath);
}

void criterion10(Ctx& ctx) {
    if (g_ckpt512.empty()) {
        ctx.expect(false, "criterion 6 checkpoint unavailable");
        return;
    }
    auto loaded = load_checkpoint<float>(g_ckpt512);
    // two held-out synthetic streams (fresh seed), concatenated: constant
    // blocks then uniform-random blocks
    const std::int64_t blocks_per_side = 200, frag = 512;
    auto side = synth_corpus(eight_generators(), blocks_per_side, frag, 77);
    std::vector<std::uint8_t> image;
    std::vector<int> truth;
    auto append_class = [&](int cls) {
        for (std::int64_t i = 0; i < side.size(); ++i)
            if (side.labels[std::size_t(i)] == cls) {
                auto f = side.fragment(i);
                image.insert(image.end(), f.begin(), f.end());
                truth.push_back(cls);
            }
    };
    append_class(0);  // constant-fill stream
    append_class(2);  // uniform-random stream
    auto records = classify_image(loaded.model, image, loaded.meta.class_names, 64);
    ctx.expect(std::int64_t(records.size()) == 2 * blocks_per_side, "unexpected record count");
    std::int64_t ok_left = 0, ok_right = 0;
    for (std::size_t i = 0; i < records.size(); ++i) {
        bool correct = records[i].class_id == truth[i];
        if (std::int64_t(i) < blocks_per_side)
            ok_left += correct;
        else
            ok_right += correct;
    }
    double left = double(ok_left) / double(blocks_per_side);
    double right = double(ok_right) / double(blocks_per_side);
    ctx.expect(left >= 0.95, "left stream accuracy " + std::to_string(left) + " < 0.95");
    ctx.expect(right >= 0.95, "right stream accuracy " + std::to_string(right) + " < 0.95");
    // majority label flips exactly at the boundary offset
    std::int64_t boundary = blocks_per_side * frag;
    std::int64_t flips = 0;
    for (std::size_t i = 1; i < records.size(); ++i)
        if (records[i].class_id != records[i - 1].class_id && records[i].offset == boundary) ++flips;
    ctx.expect(flips >= 1 || left + right >= 1.98, "no label flip detected at the stream boundary");
}

}  // namespace

int main() {
    run_criterion(1, "cost-formula suite", 1.0, criterion1);
    run_criterion(2, "factorization equivalence", 10.0, criterion2);
    run_criterion(3, "gradient suite (64-bit finite differences)", 120.0, criterion3);
    run_criterion(4, "parameter accounting", 5.0, criterion4);
    run_criterion(5, "flop ordering", 0.0, criterion5);
    run_criterion(6, "desk-scale learning", 1020.0, criterion6);
    run_criterion(7, "transfer protocol", 0.0, criterion7);
    run_criterion(8, "scenario/grouping suite", 1.0, criterion8);
    run_criterion(9, "determinism and formats", 0.0, criterion9);
    run_criterion(10, "end-to-end carve check", 60.0, criterion10);

    if (!g_ckpt512.empty()) std::filesystem::remove(g_ckpt512);

    int failures = 0;
    std::printf("\nacceptance summary:\n");
    for (const auto& r : g_results) {
        std::printf("criterion %2d [%s] %s (%.1f s)%s%s\n", r.id, r.pass ? "PASS" : "FAIL", r.name.c_str(), r.seconds,
                    r.detail.empty() ? "" : " -- ", r.detail.c_str());
        if (!r.pass) ++failures;
    }
    std::printf("%d/%zu criteria passed\n", int(g_results.size()) - failures, g_results.size());
    return failures == 0 ? 0 : 1;
}
