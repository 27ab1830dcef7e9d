#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "ffc/common.hpp"
#include "ffc/models.hpp"

namespace ffc {

struct BenchConfig {
    std::int64_t blocks = 1000;  // measured blocks (>= 1000 for stable statistics)
    std::int64_t batch = 64;
    std::int64_t warmup = 100;
    std::uint64_t seed = 0;
};

// Latency (batch=1, one worker) and throughput (configured batch and
// parallelism) are reported as two separate measurements.
struct BenchReport {
    double ms_per_block_mean = 0.0;
    double ms_per_block_p50 = 0.0;
    double ms_per_block_p95 = 0.0;
    double sec_per_block_batched = 0.0;
    double min_per_gib = 0.0;
    std::int64_t blocks_per_gib = 0;
    std::int64_t latency_blocks = 0;
    std::int64_t throughput_blocks = 0;
    std::int64_t batch = 0;
    std::string hardware_note;
};

namespace detail {

inline std::string cpu_model_name() {
    std::ifstream f("/proc/cpuinfo");
    std::string line;
    while (std::getline(f, line)) {
        auto pos = line.find("model name");
        if (pos != std::string::npos) {
            auto colon = line.find(':');
            if (colon != std::string::npos) {
                std::string name = line.substr(colon + 1);
                while (!name.empty() && name.front() == ' ') name.erase(name.begin());
                return name;
            }
        }
    }
    return "unknown CPU";
}

}  // namespace detail

template <typename T>
BenchReport bench_run(ModelGraph<T>& model, const BenchConfig& cfg) {
    if (cfg.blocks < 1000) throw UsageError("bench: need at least 1000 blocks for stable statistics");
    if (cfg.batch < 1) throw UsageError("bench: batch must be >= 1");
    const std::int64_t frag = model.config.fragment_size;

    Rng rng(cfg.seed);
    auto random_batch = [&](std::int64_t n) {
        ByteBatch b(n, frag);
        for (auto& v : b.bytes) v = rng.next_byte();
        return b;
    };

    using clock = std::chrono::steady_clock;
    BenchReport rep;
    rep.batch = cfg.batch;
    rep.blocks_per_gib = (std::int64_t(1) << 30) / frag;
    rep.latency_blocks = cfg.blocks;
    rep.throughput_blocks = cfg.blocks;

    // latency: batch=1 on a single worker, warm-up excluded
    {
        ScopedThreadCap cap(1);
        for (std::int64_t i = 0; i < cfg.warmup; ++i) {
            ByteBatch b = random_batch(1);
            model.forward(b, Mode::eval);
        }
        std::vector<double> lat(std::size_t(cfg.blocks), 0.0);
        for (std::int64_t i = 0; i < cfg.blocks; ++i) {
            ByteBatch b = random_batch(1);
            auto t0 = clock::now();
            model.forward(b, Mode::eval);
            auto t1 = clock::now();
            lat[std::size_t(i)] = std::chrono::duration<double, std::milli>(t1 - t0).count();
        }
        double sum = 0;
        for (double v : lat) sum += v;
        rep.ms_per_block_mean = sum / double(cfg.blocks);
        std::sort(lat.begin(), lat.end());
        rep.ms_per_block_p50 = lat[std::size_t((cfg.blocks - 1) / 2)];
        rep.ms_per_block_p95 = lat[std::size_t(std::min<std::int64_t>(cfg.blocks - 1, (95 * cfg.blocks + 99) / 100))];
    }

    // throughput: configured batch size and parallelism
    {
        ByteBatch warm = random_batch(std::min<std::int64_t>(cfg.batch, cfg.blocks));
        model.forward(warm, Mode::eval);
        auto t0 = clock::now();
        std::int64_t done = 0;
        while (done < cfg.blocks) {
            std::int64_t n = std::min(cfg.batch, cfg.blocks - done);
            ByteBatch b = random_batch(n);
            model.forward(b, Mode::eval);
            done += n;
        }
        auto t1 = clock::now();
        rep.sec_per_block_batched = std::chrono::duration<double>(t1 - t0).count() / double(cfg.blocks);
        rep.min_per_gib = rep.sec_per_block_batched * double(rep.blocks_per_gib) / 60.0;
    }

    std::ostringstream note;
    note << detail::cpu_model_name() << "; workers=" << worker_count() << " (latency pinned to 1)";
    rep.hardware_note = note.str();
    return rep;
}

inline std::string bench_report_text(const BenchReport& r) {
    std::ostringstream os;
    os.precision(4);
    os << "latency  (batch=1):  mean " << r.ms_per_block_mean << " ms/block, p50 " << r.ms_per_block_p50 << " ms, p95 "
       << r.ms_per_block_p95 << " ms over " << r.latency_blocks << " blocks\n";
    os << "throughput (batch=" << r.batch << "): " << r.sec_per_block_batched * 1e3 << " ms/block, " << r.min_per_gib
       << " min/GiB (" << r.blocks_per_gib << " blocks/GiB) over " << r.throughput_blocks << " blocks\n";
    os << "hardware: " << r.hardware_note << "\n";
    os << "numbers are measurements on this host; they are not comparable across machines\n";
    return os.str();
}

}  // namespace ffc
