#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ffc/common.hpp"
#include "ffc/data.hpp"
#include "ffc/models.hpp"

namespace ffc {

// ---------------------------------------------------------------------------
// Confusion matrix: rows = true class, columns = predicted.

struct ConfusionMatrix {
    int num_classes = 0;
    std::vector<std::int64_t> counts;  // K*K

    explicit ConfusionMatrix(int k = 0) : num_classes(k), counts(std::size_t(k) * std::size_t(k), 0) {}

    std::int64_t& at(int truth, int pred) { return counts[std::size_t(truth) * num_classes + pred]; }
    std::int64_t at(int truth, int pred) const { return counts[std::size_t(truth) * num_classes + pred]; }

    std::int64_t total() const {
        std::int64_t s = 0;
        for (auto v : counts) s += v;
        return s;
    }
    std::int64_t trace() const {
        std::int64_t s = 0;
        for (int k = 0; k < num_classes; ++k) s += at(k, k);
        return s;
    }
    double accuracy() const {
        std::int64_t t = total();
        return t == 0 ? 0.0 : double(trace()) / double(t);
    }

    std::int64_t tp(int k) const { return at(k, k); }
    std::int64_t fn(int k) const {
        std::int64_t s = 0;
        for (int j = 0; j < num_classes; ++j)
            if (j != k) s += at(k, j);
        return s;
    }
    std::int64_t fp(int k) const {
        std::int64_t s = 0;
        for (int i = 0; i < num_classes; ++i)
            if (i != k) s += at(i, k);
        return s;
    }
    std::int64_t tn(int k) const { return total() - tp(k) - fn(k) - fp(k); }
};

inline std::string confusion_to_csv(const ConfusionMatrix& m, const std::vector<std::string>& class_names) {
    if (int(class_names.size()) != m.num_classes)
        throw UsageError("confusion_to_csv: need one class name per class");
    std::ostringstream os;
    os << "true\\pred";
    for (const auto& n : class_names) os << "," << n;
    os << "\n";
    for (int i = 0; i < m.num_classes; ++i) {
        os << class_names[std::size_t(i)];
        for (int j = 0; j < m.num_classes; ++j) os << "," << m.at(i, j);
        os << "\n";
    }
    return os.str();
}

// Cluster a 75-class (scenario 1) matrix into the 11 superclasses.
inline ConfusionMatrix group_confusion(const ConfusionMatrix& m, const GroupingTable& table) {
    if (m.num_classes != 75)
        throw UsageError("group_confusion: requires the 75-class scenario-1 matrix, got K=" +
                         std::to_string(m.num_classes));
    ConfusionMatrix g(11);
    for (int i = 0; i < 75; ++i)
        for (int j = 0; j < 75; ++j)
            g.at(table.group_of_class[std::size_t(i)], table.group_of_class[std::size_t(j)]) += m.at(i, j);
    return g;
}

// ---------------------------------------------------------------------------
// Batching

inline ByteBatch gather_batch(const Corpus& corpus, std::span<const std::int64_t> indices) {
    ByteBatch b(std::int64_t(indices.size()), std::int64_t(corpus.fragment_size));
    for (std::size_t i = 0; i < indices.size(); ++i) {
        auto frag = corpus.fragment(indices[i]);
        std::copy(frag.begin(), frag.end(), b.row(std::int64_t(i)).begin());
    }
    return b;
}

// ---------------------------------------------------------------------------
// Evaluation: micro accuracy (= correct/total = trace/sum) plus the matrix.

template <typename T>
struct EvalResult {
    double accuracy = 0.0;
    ConfusionMatrix confusion;
};

template <typename T>
EvalResult<T> evaluate(ModelGraph<T>& model, const Corpus& corpus, std::int64_t batch_size = 64) {
    if (corpus.size() == 0) throw UsageError("evaluate: empty corpus");
    if (std::int64_t(corpus.fragment_size) != model.config.fragment_size)
        throw UsageError("evaluate: corpus fragment size " + std::to_string(corpus.fragment_size) +
                         " does not match model's " + std::to_string(model.config.fragment_size));
    if (corpus.num_classes != model.config.num_classes)
        throw UsageError("evaluate: corpus classes " + std::to_string(corpus.num_classes) +
                         " do not match model's " + std::to_string(model.config.num_classes));
    if (batch_size < 1) throw UsageError("evaluate: batch_size must be >= 1");

    EvalResult<T> res;
    res.confusion = ConfusionMatrix(int(model.config.num_classes));
    std::vector<std::int64_t> idx(std::size_t(corpus.size()), 0);
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = std::int64_t(i);
    for (std::int64_t start = 0; start < corpus.size(); start += batch_size) {
        std::int64_t n = std::min(batch_size, corpus.size() - start);
        ByteBatch batch = gather_batch(corpus, std::span(idx).subspan(std::size_t(start), std::size_t(n)));
        Tensor<T> logits = model.forward(batch, Mode::eval);
        const T* lp = logits.data().data();
        const std::int64_t K = logits.dim(1);
        for (std::int64_t b = 0; b < n; ++b) {
            const T* row = lp + b * K;
            std::int64_t best = 0;
            for (std::int64_t k = 1; k < K; ++k)
                if (row[k] > row[best]) best = k;
            res.confusion.at(corpus.labels[std::size_t(start + b)], int(best))++;
        }
    }
    res.accuracy = res.confusion.accuracy();
    return res;
}

// ---------------------------------------------------------------------------
// Training

struct TrainConfig {
    std::int64_t epochs = 20;
    std::int64_t batch_size = 128;
    double learning_rate = 1e-3;
    std::uint64_t seed = 0;
    std::optional<std::string> pretrained_checkpoint;
    std::int64_t early_stop_patience = 5;
    double stop_at_val_accuracy = 0.0;  // > 0: stop once validation reaches it
    bool verbose = false;
};

struct EpochStats {
    std::int64_t epoch = 0;
    double train_loss = 0.0;
    double val_accuracy = 0.0;
};

struct TrainResult {
    std::vector<EpochStats> history;
    double best_val_accuracy = 0.0;
    std::int64_t best_epoch = 0;
};

inline std::string history_to_csv(const std::vector<EpochStats>& history) {
    std::ostringstream os;
    os << "epoch,train_loss,val_acc\n";
    os.precision(17);
    for (const auto& e : history) os << e.epoch << "," << e.train_loss << "," << e.val_accuracy << "\n";
    return os.str();
}

// Deterministic given the seed: fixed shuffle order, fixed dropout stream,
// fixed reduction order. The model is left holding the best-validation
// weights; the caller persists them with save_checkpoint.
template <typename T>
TrainResult train(ModelGraph<T>& model, const Corpus& train_corpus, const Corpus& val_corpus, const TrainConfig& cfg) {
    if (std::int64_t(train_corpus.fragment_size) != model.config.fragment_size)
        throw UsageError("train: corpus fragment size " + std::to_string(train_corpus.fragment_size) +
                         " does not match model's " + std::to_string(model.config.fragment_size));
    if (train_corpus.num_classes != model.config.num_classes)
        throw UsageError("train: corpus classes " + std::to_string(train_corpus.num_classes) +
                         " do not match model's " + std::to_string(model.config.num_classes));
    if (train_corpus.size() == 0) throw UsageError("train: empty training corpus");
    if (cfg.batch_size < 2) throw UsageError("train: batch_size must be >= 2");
    if (cfg.epochs < 1) throw UsageError("train: epochs must be >= 1");

    if (cfg.pretrained_checkpoint) transfer_load(model, *cfg.pretrained_checkpoint);

    model.reseed_dropout(cfg.seed);
    Rng shuffle_rng(cfg.seed ^ 0x5u);

    auto params = model.trainable_entries();
    std::vector<AdamState<T>> opt;
    opt.reserve(params.size());
    for (auto* e : params) opt.emplace_back(e->tensor.numel(), T(cfg.learning_rate));

    TrainResult result;
    std::vector<std::vector<T>> best_weights;
    double best_acc = -1.0;
    std::int64_t best_epoch = 0, since_best = 0;

    std::vector<std::int64_t> order(std::size_t(train_corpus.size()), 0);
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = std::int64_t(i);

    for (std::int64_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        double loss_sum = 0.0;
        std::int64_t batches = 0;
        for (std::int64_t start = 0; start < train_corpus.size(); start += cfg.batch_size) {
            std::int64_t n = std::min(cfg.batch_size, train_corpus.size() - start);
            if (n < 2) break;  // batch norm needs >= 2 samples
            ByteBatch batch = gather_batch(train_corpus, std::span(order).subspan(std::size_t(start), std::size_t(n)));
            std::vector<int> labels(std::size_t(n), 0);
            for (std::int64_t b = 0; b < n; ++b) labels[std::size_t(b)] = train_corpus.labels[std::size_t(order[std::size_t(start + b)])];

            Tensor<T> logits = model.forward(batch, Mode::train);
            auto sm = softmax_cross_entropy(logits, labels);
            double loss = double(sm.loss.item());
            if (!std::isfinite(loss))
                throw NumericError("train: non-finite loss " + std::to_string(loss) + " at epoch " +
                                   std::to_string(epoch) + ", batch " + std::to_string(batches));
            loss_sum += loss;
            ++batches;
            sm.loss.backward();
            for (std::size_t p = 0; p < params.size(); ++p) {
                adam_step(params[p]->tensor, opt[p]);
                params[p]->tensor.zero_grad();
            }
        }

        EpochStats stats;
        stats.epoch = epoch;
        stats.train_loss = batches ? loss_sum / double(batches) : 0.0;
        if (val_corpus.size() > 0) stats.val_accuracy = evaluate(model, val_corpus).accuracy;
        result.history.push_back(stats);
        if (cfg.verbose)
            std::fprintf(stderr, "epoch %lld  train_loss %.6f  val_acc %.4f\n", (long long)epoch, stats.train_loss,
                         stats.val_accuracy);

        if (stats.val_accuracy > best_acc) {
            best_acc = stats.val_accuracy;
            best_epoch = epoch;
            since_best = 0;
            best_weights.clear();
            for (const auto& e : model.store)
                best_weights.emplace_back(e.tensor.data().begin(), e.tensor.data().end());
        } else {
            ++since_best;
            if (cfg.early_stop_patience > 0 && since_best >= cfg.early_stop_patience) break;
        }
        if (cfg.stop_at_val_accuracy > 0.0 && stats.val_accuracy >= cfg.stop_at_val_accuracy) break;
    }

    if (!best_weights.empty()) {
        for (std::size_t i = 0; i < model.store.size(); ++i)
            std::copy(best_weights[i].begin(), best_weights[i].end(), model.store[i].tensor.data().begin());
    }
    result.best_val_accuracy = std::max(best_acc, 0.0);
    result.best_epoch = best_epoch;
    return result;
}

}  // namespace ffc
