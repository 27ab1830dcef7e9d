// ffc: file-fragment classification toolkit
//
// Subcommands: corpus (build|synth), train, eval, classify, analyze, bench.
// Exit codes: 0 success, 2 usage error, 3 data/format error, 4 numeric failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ffc/ffc.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ffc::DataError("cannot open " + path);
    return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw ffc::DataError("cannot open " + path + " for writing");
    f << text;
}

std::vector<double> parse_ratios(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) out.push_back(std::stod(tok));
    return out;
}

ffc::ModelConfig config_for(const std::string& arch, std::int64_t frag, std::int64_t classes) {
    ffc::ModelConfig cfg;
    cfg.architecture = ffc::arch_from_name(arch);
    cfg.fragment_size = frag;
    cfg.num_classes = classes;
    cfg.validate();
    return cfg;
}

std::string extension_of(const fs::path& p) {
    std::string e = p.extension().string();
    if (!e.empty() && e.front() == '.') e.erase(e.begin());
    return ffc::GroupingTable::lower(e);
}

// ---- corpus ---------------------------------------------------------------

struct CorpusSynthArgs {
    std::int64_t classes = 8;
    std::int64_t per_class = 1000;
    std::int64_t frag_size = 512;
    std::uint64_t seed = 0;
    std::string out;
    std::string generators;
};

int run_corpus_synth(const CorpusSynthArgs& a) {
    std::vector<ffc::GeneratorKind> kinds;
    if (!a.generators.empty()) {
        std::stringstream ss(a.generators);
        std::string tok;
        while (std::getline(ss, tok, ',')) kinds.push_back(ffc::generator_from_name(tok));
    } else {
        for (const auto& [name, kind] : ffc::generator_registry()) {
            if (std::int64_t(kinds.size()) >= a.classes) break;
            kinds.push_back(kind);
        }
        if (std::int64_t(kinds.size()) < a.classes)
            throw ffc::UsageError("only " + std::to_string(kinds.size()) +
                                  " built-in generators; pass --generators to repeat kinds");
    }
    ffc::Corpus c = ffc::synth_corpus(kinds, a.per_class, a.frag_size, a.seed);
    ffc::corpus_write(a.out, c);
    std::printf("wrote %s: %lld records, %u-byte fragments, %u classes\n", a.out.c_str(), (long long)c.size(),
                c.fragment_size, unsigned(c.num_classes));
    auto counts = c.per_class_counts();
    for (std::size_t k = 0; k < counts.size(); ++k)
        std::printf("  class %zu (%s): %lld\n", k, c.class_names[k].c_str(), (long long)counts[k]);
    return 0;
}

struct CorpusBuildArgs {
    std::string input_dir;
    std::int64_t frag_size = 4096;
    int scenario = 1;
    std::int64_t stride = 0;  // 0 = fragment size
    bool skip_first = false;
    std::string out;
};

int run_corpus_build(const CorpusBuildArgs& a) {
    ffc::ScenarioMap map = ffc::ScenarioMap::make(a.scenario);
    if (!fs::is_directory(a.input_dir)) throw ffc::UsageError("--input-dir " + a.input_dir + " is not a directory");

    ffc::Corpus c;
    c.fragment_size = std::uint32_t(a.frag_size);
    c.num_classes = std::uint16_t(map.num_classes);
    c.scenario = std::uint8_t(a.scenario);
    c.class_names = map.class_names;

    std::int64_t files_used = 0, skipped_excluded = 0, skipped_unknown = 0;
    std::vector<fs::path> paths;
    for (const auto& entry : fs::recursive_directory_iterator(a.input_dir))
        if (entry.is_regular_file()) paths.push_back(entry.path());
    std::sort(paths.begin(), paths.end());
    if (paths.empty()) throw ffc::UsageError("input directory " + a.input_dir + " holds no files");

    const std::int64_t stride = a.stride > 0 ? a.stride : a.frag_size;
    for (const auto& p : paths) {
        std::string ext = extension_of(p);
        if (!ffc::GroupingTable::instance().known_extension(ext)) {
            ++skipped_unknown;
            continue;
        }
        auto cls = map.map(ext);
        if (!cls) {
            ++skipped_excluded;
            continue;
        }
        auto bytes = read_file_bytes(p.string());
        auto frags = ffc::extract_fragments(bytes, a.frag_size, stride, a.skip_first);
        for (const auto& fr : frags) {
            c.append(std::uint16_t(*cls), fr);
            c.source_ids.push_back(p.filename().string());
        }
        ++files_used;
    }
    if (c.size() == 0) throw ffc::DataError("no fragments extracted from " + a.input_dir);
    c.provenance = {{"kind", "files"}, {"input_dir", a.input_dir}, {"stride", stride}, {"skip_first", a.skip_first},
                    {"files_used", files_used}};
    ffc::corpus_write(a.out, c);

    std::printf("wrote %s: %lld records from %lld files (%lld excluded by scenario %d, %lld unknown extension)\n",
                a.out.c_str(), (long long)c.size(), (long long)files_used, (long long)skipped_excluded, a.scenario,
                (long long)skipped_unknown);
    auto counts = c.per_class_counts();
    for (std::size_t k = 0; k < counts.size(); ++k)
        std::printf("  class %zu (%s): %lld\n", k, c.class_names[k].c_str(), (long long)counts[k]);
    return 0;
}

// ---- train ----------------------------------------------------------------

struct TrainArgs {
    std::string corpus;
    std::string model = "dsc";
    std::string out;
    std::int64_t epochs = 20;
    std::int64_t batch = 128;
    double lr = 1e-3;
    std::uint64_t seed = 0;
    std::string split = "0.8,0.1,0.1";
    std::string pretrained;
    std::string history;
    std::int64_t patience = 5;
    bool verbose = false;
};

int run_train(const TrainArgs& a) {
    ffc::Corpus corpus = ffc::corpus_read(a.corpus);
    auto parts = ffc::split(corpus, parse_ratios(a.split), a.seed);
    if (parts.size() < 2) throw ffc::UsageError("--split must produce at least train and validation partitions");
    const ffc::Corpus& train_c = parts[0];
    const ffc::Corpus& val_c = parts[1];

    ffc::ModelConfig cfg = config_for(a.model, std::int64_t(corpus.fragment_size), corpus.num_classes);
    auto model = ffc::build_model<float>(cfg, a.seed);

    ffc::TrainConfig tc;
    tc.epochs = a.epochs;
    tc.batch_size = a.batch;
    tc.learning_rate = a.lr;
    tc.seed = a.seed;
    tc.early_stop_patience = a.patience;
    tc.verbose = a.verbose;
    if (!a.pretrained.empty()) tc.pretrained_checkpoint = a.pretrained;

    ffc::TrainResult result = ffc::train(model, train_c, val_c, tc);

    ffc::CheckpointMeta meta;
    meta.seed = a.seed;
    meta.epochs = std::int64_t(result.history.size());
    meta.corpus_digest = ffc::detail::hex64(corpus.digest());
    meta.class_names = corpus.class_names;
    ffc::save_checkpoint(model, a.out, meta);

    if (!a.history.empty()) write_text_file(a.history, ffc::history_to_csv(result.history));
    std::printf("trained %s for %zu epochs; best val accuracy %.4f (epoch %lld); checkpoint %s\n", a.model.c_str(),
                result.history.size(), result.best_val_accuracy, (long long)result.best_epoch, a.out.c_str());
    if (parts.size() >= 3 && parts[2].size() > 0) {
        auto test = ffc::evaluate(model, parts[2]);
        std::printf("test accuracy %.4f on %lld held-out records\n", test.accuracy, (long long)parts[2].size());
    }
    return 0;
}

// ---- eval -----------------------------------------------------------------

struct EvalArgs {
    std::string corpus;
    std::string ckpt;
    std::int64_t batch = 64;
    std::string confusion;
    bool group_by_superclass = false;
};

int run_eval(const EvalArgs& a) {
    ffc::Corpus corpus = ffc::corpus_read(a.corpus);
    auto loaded = ffc::load_checkpoint<float>(a.ckpt);
    auto res = ffc::evaluate(loaded.model, corpus, a.batch);
    std::printf("accuracy %.6f over %lld records\n", res.accuracy, (long long)corpus.size());

    if (a.group_by_superclass) {
        ffc::ConfusionMatrix grouped = ffc::group_confusion(res.confusion, ffc::GroupingTable::instance());
        std::vector<std::string> names(ffc::group_names().begin(), ffc::group_names().end());
        if (!a.confusion.empty()) {
            write_text_file(a.confusion, ffc::confusion_to_csv(grouped, names));
            std::printf("grouped 11x11 confusion written to %s\n", a.confusion.c_str());
        } else {
            std::fputs(ffc::confusion_to_csv(grouped, names).c_str(), stdout);
        }
    } else if (!a.confusion.empty()) {
        std::vector<std::string> names = corpus.class_names;
        if (std::int64_t(names.size()) != corpus.num_classes)
            for (int k = int(names.size()); k < corpus.num_classes; ++k) names.push_back("class" + std::to_string(k));
        write_text_file(a.confusion, ffc::confusion_to_csv(res.confusion, names));
        std::printf("confusion matrix written to %s\n", a.confusion.c_str());
    }
    return 0;
}

// ---- classify ---------------------------------------------------------------

struct ClassifyArgs {
    std::string image;
    std::string ckpt;
    std::int64_t frag_size = 0;  // 0 = take from checkpoint
    std::string out;
    std::int64_t batch = 64;
};

int run_classify(const ClassifyArgs& a) {
    auto loaded = ffc::load_checkpoint<float>(a.ckpt);
    if (a.frag_size > 0 && a.frag_size != loaded.model.config.fragment_size)
        throw ffc::DataError("--frag-size " + std::to_string(a.frag_size) + " does not match checkpoint fragment size " +
                             std::to_string(loaded.model.config.fragment_size));
    auto image = read_file_bytes(a.image);
    auto records = ffc::classify_image(loaded.model, image, loaded.meta.class_names, a.batch);

    std::ofstream out(a.out, std::ios::trunc);
    if (!out) throw ffc::DataError("cannot open " + a.out + " for writing");
    for (const auto& r : records) {
        json j{{"offset", r.offset}, {"class_id", r.class_id}, {"class_name", r.class_name},
               {"probability", r.probability}};
        out << j.dump() << "\n";
    }
    std::printf("classified %zu blocks of %lld bytes into %s\n", records.size(),
                (long long)loaded.model.config.fragment_size, a.out.c_str());
    return 0;
}

// ---- analyze ----------------------------------------------------------------

struct AnalyzeArgs {
    std::string model = "dsc";
    std::int64_t frag_size = 4096;
    std::int64_t classes = 75;
    bool as_json = false;
};

int run_analyze(const AnalyzeArgs& a) {
    ffc::ModelConfig cfg = config_for(a.model, a.frag_size, a.classes);
    auto model = ffc::build_model<float>(cfg, 0);
    ffc::CostReport rep = ffc::count_flops(model, a.frag_size);
    if (a.as_json) {
        json j = ffc::cost_report_json(rep);
        j["architecture"] = a.model;
        j["fragment_size"] = a.frag_size;
        j["num_classes"] = a.classes;
        std::printf("%s\n", j.dump(2).c_str());
    } else {
        std::printf("%s  fragment %lld, %lld classes\n", a.model.c_str(), (long long)a.frag_size, (long long)a.classes);
        std::fputs(ffc::cost_report_text(rep).c_str(), stdout);
    }
    return 0;
}

// ---- bench ------------------------------------------------------------------

struct BenchArgs {
    std::string ckpt;
    std::int64_t blocks = 1000;
    std::int64_t batch = 64;
    std::uint64_t seed = 0;
};

int run_bench(const BenchArgs& a) {
    auto loaded = ffc::load_checkpoint<float>(a.ckpt);
    ffc::BenchConfig cfg;
    cfg.blocks = a.blocks;
    cfg.batch = a.batch;
    cfg.seed = a.seed;
    ffc::BenchReport rep = ffc::bench_run(loaded.model, cfg);
    std::fputs(ffc::bench_report_text(rep).c_str(), stdout);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"file-fragment classification toolkit"};
    app.require_subcommand(1);

    auto* corpus = app.add_subcommand("corpus", "build or synthesize a fragment corpus");
    corpus->require_subcommand(1);

    CorpusSynthArgs synth_args;
    auto* synth = corpus->add_subcommand("synth", "generate a synthetic corpus");
    synth->add_option("--classes", synth_args.classes, "number of classes")->check(CLI::Range(2, 64));
    synth->add_option("--per-class", synth_args.per_class, "records per class")->check(CLI::PositiveNumber);
    synth->add_option("--frag-size", synth_args.frag_size, "fragment size in bytes")->check(CLI::PositiveNumber);
    synth->add_option("--seed", synth_args.seed, "rng seed");
    synth->add_option("--out", synth_args.out, "output corpus path")->required();
    synth->add_option("--generators", synth_args.generators, "comma-separated generator kinds");

    CorpusBuildArgs build_args;
    auto* build = corpus->add_subcommand("build", "extract fragments from a directory of files");
    build->add_option("--input-dir", build_args.input_dir, "directory of typed files")->required();
    build->add_option("--frag-size", build_args.frag_size, "fragment size in bytes")->check(CLI::PositiveNumber);
    build->add_option("--scenario", build_args.scenario, "labeling scenario 1..6")->check(CLI::Range(1, 6));
    build->add_option("--stride", build_args.stride, "offset stride (default: fragment size)");
    build->add_flag("--skip-first", build_args.skip_first, "drop the offset-0 block of each file");
    build->add_option("--out", build_args.out, "output corpus path")->required();

    TrainArgs train_args;
    auto* train = app.add_subcommand("train", "train a model on a corpus");
    train->add_option("--corpus", train_args.corpus, "corpus path")->required();
    train->add_option("--model", train_args.model, "dsc | dsc-se | m-dsc");
    train->add_option("--out", train_args.out, "checkpoint output path")->required();
    train->add_option("--epochs", train_args.epochs)->check(CLI::PositiveNumber);
    train->add_option("--batch", train_args.batch)->check(CLI::PositiveNumber);
    train->add_option("--lr", train_args.lr, "learning rate");
    train->add_option("--seed", train_args.seed);
    train->add_option("--split", train_args.split, "train,val[,test] ratios");
    train->add_option("--pretrained", train_args.pretrained, "checkpoint to transfer-load first");
    train->add_option("--history", train_args.history, "per-epoch CSV output");
    train->add_option("--patience", train_args.patience, "early-stop patience in epochs");
    train->add_flag("--verbose", train_args.verbose, "log per-epoch stats");

    EvalArgs eval_args;
    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a corpus");
    eval->add_option("--corpus", eval_args.corpus)->required();
    eval->add_option("--ckpt", eval_args.ckpt)->required();
    eval->add_option("--batch", eval_args.batch)->check(CLI::PositiveNumber);
    eval->add_option("--confusion", eval_args.confusion, "write confusion matrix CSV here");
    eval->add_flag("--group-by-superclass", eval_args.group_by_superclass, "cluster the 75 classes into 11 groups");

    ClassifyArgs classify_args;
    auto* classify = app.add_subcommand("classify", "label every block of a raw image");
    classify->add_option("--image", classify_args.image)->required();
    classify->add_option("--ckpt", classify_args.ckpt)->required();
    classify->add_option("--frag-size", classify_args.frag_size, "must match the checkpoint when given");
    classify->add_option("--out", classify_args.out, "JSONL output path")->required();
    classify->add_option("--batch", classify_args.batch)->check(CLI::PositiveNumber);

    AnalyzeArgs analyze_args;
    auto* analyze = app.add_subcommand("analyze", "print the parameter/FLOP cost report");
    analyze->add_option("--model", analyze_args.model, "dsc | dsc-se | m-dsc");
    analyze->add_option("--frag-size", analyze_args.frag_size)->check(CLI::PositiveNumber);
    analyze->add_option("--classes", analyze_args.classes)->check(CLI::Range(2, 65535));
    analyze->add_flag("--json", analyze_args.as_json, "machine-readable output");

    BenchArgs bench_args;
    auto* bench = app.add_subcommand("bench", "measure single-block latency and batched throughput");
    bench->add_option("--ckpt", bench_args.ckpt)->required();
    bench->add_option("--blocks", bench_args.blocks, "blocks to measure (>= 1000)");
    bench->add_option("--batch", bench_args.batch)->check(CLI::PositiveNumber);
    bench->add_option("--seed", bench_args.seed);

    try {
        app.parse(argc, argv);
        if (synth->parsed()) return run_corpus_synth(synth_args);
        if (build->parsed()) return run_corpus_build(build_args);
        if (train->parsed()) return run_train(train_args);
        if (eval->parsed()) return run_eval(eval_args);
        if (classify->parsed()) return run_classify(classify_args);
        if (analyze->parsed()) return run_analyze(analyze_args);
        if (bench->parsed()) return run_bench(bench_args);
        return 2;
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    } catch (const ffc::NumericError& e) {
        std::fprintf(stderr, "numeric failure: %s\n", e.what());
        return 4;
    } catch (const ffc::DataError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return 3;
    } catch (const ffc::UsageError& e) {
        std::fprintf(stderr, "usage error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }
}
