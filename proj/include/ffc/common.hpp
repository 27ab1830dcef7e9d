#pragma once

#include <bit>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace ffc {

static_assert(std::endian::native == std::endian::little,
              "on-disk formats are little-endian; big-endian hosts are unsupported");

// Error taxonomy; the CLI maps these onto exit codes 2/3/4.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct UsageError : Error {
    using Error::Error;
};
struct DataError : Error {
    using Error::Error;
};
struct NumericError : Error {
    using Error::Error;
};

enum class Mode { train, eval };

// ---------------------------------------------------------------------------
// Deterministic RNG. mt19937_64 output is fully specified by the standard;
// the float/int mappings below are hand-rolled so streams never depend on
// library-specific distribution internals.

class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(split_mix(seed)) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    // uniform in [0, 1)
    double next_double() { return double(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    // unbiased uniform in [0, n)
    std::uint64_t next_below(std::uint64_t n) {
        if (n == 0) throw UsageError("Rng::next_below: n must be positive");
        std::uint64_t threshold = (0 - n) % n;
        for (;;) {
            std::uint64_t r = next_u64();
            if (r >= threshold) return r % n;
        }
    }

    std::uint8_t next_byte() { return std::uint8_t(next_u64() & 0xFF); }

    // derive an independent stream (order-insensitive record seeding)
    Rng fork(std::uint64_t a, std::uint64_t b = 0) const {
        std::uint64_t s = state_;
        s = split_mix(s ^ (0x9E3779B97F4A7C15ull * (a + 1)));
        s = split_mix(s ^ (0xC2B2AE3D27D4EB4Full * (b + 1)));
        return Rng(raw_tag{}, s);
    }

    template <typename V>
    void shuffle(std::vector<V>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = std::size_t(next_below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    struct raw_tag {};
    Rng(raw_tag, std::uint64_t raw) : state_(raw) {}
    static std::uint64_t split_mix(std::uint64_t z) {
        z += 0x9E3779B97F4A7C15ull;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }
    std::uint64_t state_;
};

// ---------------------------------------------------------------------------
// FNV-1a (64-bit), used for corpus and checkpoint blob digests.

inline std::uint64_t fnv1a64(const void* bytes, std::size_t n, std::uint64_t seed = 14695981039346656037ull) {
    const auto* p = static_cast<const unsigned char*>(bytes);
    std::uint64_t h = seed;
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 1099511628211ull;
    }
    return h;
}

inline std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes) {
    return fnv1a64(bytes.data(), bytes.size());
}

// ---------------------------------------------------------------------------
// Worker pool sizing. FFC_THREADS caps the number of workers used by the
// parallel kernels; a ScopedThreadCap pins a region (e.g. latency benching).

namespace detail {
inline int& thread_cap() {
    thread_local int cap = 0;  // 0 = uncapped
    return cap;
}
}  // namespace detail

inline int worker_count() {
    static int env_threads = [] {
        if (const char* s = std::getenv("FFC_THREADS")) {
            int v = std::atoi(s);
            if (v > 0) return v;
        }
        unsigned hc = std::thread::hardware_concurrency();
        return hc == 0 ? 1 : int(hc);
    }();
    int cap = detail::thread_cap();
    return cap > 0 ? std::min(cap, env_threads) : env_threads;
}

struct ScopedThreadCap {
    int prev;
    explicit ScopedThreadCap(int cap) : prev(detail::thread_cap()) { detail::thread_cap() = cap; }
    ~ScopedThreadCap() { detail::thread_cap() = prev; }
};

// Static-chunked parallel loop. Chunks are contiguous index ranges; each
// output element is computed serially inside exactly one chunk, so results
// are bitwise independent of the worker count.
inline void parallel_for(std::int64_t n, const std::function<void(std::int64_t, std::int64_t)>& body) {
    int workers = worker_count();
    if (n <= 0) return;
    if (workers <= 1 || n < 2) {
        body(0, n);
        return;
    }
    std::int64_t chunks = std::min<std::int64_t>(workers, n);
    std::int64_t per = (n + chunks - 1) / chunks;
    std::vector<std::thread> pool;
    pool.reserve(std::size_t(chunks - 1));
    for (std::int64_t c = 1; c < chunks; ++c) {
        std::int64_t lo = c * per, hi = std::min(n, lo + per);
        if (lo >= hi) break;
        pool.emplace_back([&body, lo, hi] { body(lo, hi); });
    }
    body(0, std::min(per, n));
    for (auto& t : pool) t.join();
}

// ---------------------------------------------------------------------------
// A batch of raw byte blocks, row-major [batch][length].

struct ByteBatch {
    std::int64_t batch = 0;
    std::int64_t length = 0;
    std::vector<std::uint8_t> bytes;  // batch*length octets

    ByteBatch() = default;
    ByteBatch(std::int64_t b, std::int64_t l) : batch(b), length(l), bytes(std::size_t(b * l), 0) {}

    std::span<const std::uint8_t> row(std::int64_t i) const {
        return {bytes.data() + i * length, std::size_t(length)};
    }
    std::span<std::uint8_t> row(std::int64_t i) {
        return {bytes.data() + i * length, std::size_t(length)};
    }
};

inline std::string shape_str(std::span<const std::int64_t> s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += ", ";
        out += std::to_string(s[i]);
    }
    return out + "]";
}

}  // namespace ffc
