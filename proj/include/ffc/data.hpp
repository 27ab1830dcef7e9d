#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <sys/file.h>
#include <unistd.h>

#include <json.hpp>

#include "ffc/common.hpp"

namespace ffc {

// ---------------------------------------------------------------------------
// The 75 file types and their 11-way use-based grouping. Class ids follow
// the table order, top-to-bottom, left-to-right, fixed forever.

inline const std::array<std::string, 11>& group_names() {
    static const std::array<std::string, 11> names{"Archive",  "Audio",  "Bitmap",    "Executable",
                                                   "Human-readable", "Office", "Published", "Raw",
                                                   "Vector",   "Video",  "Miscellaneous"};
    return names;
}

struct GroupingTable {
    // extension -> (class id in 0..74, group id in 0..10)
    std::vector<std::string> extensions;        // index = scenario-1 class id
    std::vector<int> group_of_class;            // per class id
    std::map<std::string, int> class_of_ext;    // lowercase extension -> class id

    static const GroupingTable& instance() {
        static const GroupingTable t = build();
        return t;
    }

    int group_size(int g) const {
        int n = 0;
        for (int gg : group_of_class)
            if (gg == g) ++n;
        return n;
    }

    int class_id(const std::string& extension) const {
        std::string e = lower(extension);
        auto it = class_of_ext.find(e);
        if (it == class_of_ext.end()) throw UsageError("unknown file type '" + extension + "'; known types: " + known());
        return it->second;
    }

    bool known_extension(const std::string& extension) const {
        return class_of_ext.count(lower(extension)) != 0;
    }

    static std::string lower(const std::string& s) {
        std::string out = s;
        std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return char(std::tolower(c)); });
        return out;
    }

    std::string known() const {
        std::string s;
        for (std::size_t i = 0; i < extensions.size(); ++i) {
            if (i) s += ", ";
            s += extensions[i];
        }
        return s;
    }

private:
    static GroupingTable build() {
        static const std::array<std::vector<std::string>, 11> members{{
            {"apk", "jar", "msi", "dmg", "7z", "bz2", "deb", "gz", "pkg", "rar", "rpm", "xz", "zip"},
            {"aiff", "flac", "m4a", "mp3", "ogg", "wav", "wma"},
            {"jpg", "tiff", "heic", "bmp", "gif", "png"},
            {"exe", "mach-o", "elf", "dll"},
            {"md", "rtf", "txt", "tex", "json", "html", "xml", "log", "csv"},
            {"doc", "docx", "key", "ppt", "pptx", "xls", "xlsx"},
            {"djvu", "epub", "mobi", "pdf"},
            {"arw", "cr2", "dng", "gpr", "nef", "nrw", "orf", "pef", "raf", "rw2", "3fr"},
            {"ai", "eps", "psd"},
            {"mov", "mp4", "3gp", "avi", "mkv", "ogv", "webm"},
            {"pcap", "ttf", "dwg", "sqlite"},
        }};
        GroupingTable t;
        for (int g = 0; g < 11; ++g)
            for (const auto& ext : members[std::size_t(g)]) {
                t.class_of_ext[ext] = int(t.extensions.size());
                t.extensions.push_back(ext);
                t.group_of_class.push_back(g);
            }
        return t;
    }
};

// ---------------------------------------------------------------------------
// Scenario label maps (the six labeling granularities over the 75 types).
// Named classes come first in table order; a catch-all "other" class, when
// present, is last. Scenario 6 is partial: non-member extensions are
// excluded rather than labeled.

struct ScenarioMap {
    int scenario = 1;
    int num_classes = 0;
    std::vector<std::string> class_names;
    // per scenario-1 class id: target class id, or -1 = excluded
    std::array<int, 75> target{};

    static ScenarioMap make(int scenario) {
        const auto& g = GroupingTable::instance();
        ScenarioMap m;
        m.scenario = scenario;
        auto ext_class = [&](const char* e) { return g.class_id(e); };
        switch (scenario) {
            case 1: {
                m.num_classes = 75;
                for (int i = 0; i < 75; ++i) m.target[std::size_t(i)] = i;
                m.class_names = g.extensions;
                break;
            }
            case 2: {
                m.num_classes = 11;
                for (int i = 0; i < 75; ++i) m.target[std::size_t(i)] = g.group_of_class[std::size_t(i)];
                m.class_names.assign(group_names().begin(), group_names().end());
                break;
            }
            case 3: {
                // bitmap(6) + raw(11) + video(7) separate, everything else "other"
                int next = 0;
                m.target.fill(-2);
                for (int i = 0; i < 75; ++i) {
                    int grp = g.group_of_class[std::size_t(i)];
                    const std::string& name = group_names()[std::size_t(grp)];
                    if (name == "Bitmap" || name == "Raw" || name == "Video") {
                        m.target[std::size_t(i)] = next++;
                        m.class_names.push_back(g.extensions[std::size_t(i)]);
                    }
                }
                for (int i = 0; i < 75; ++i)
                    if (m.target[std::size_t(i)] == -2) m.target[std::size_t(i)] = next;
                m.class_names.push_back("other");
                m.num_classes = next + 1;
                break;
            }
            case 4: {
                // jpg | raw | video | remaining bitmaps | other
                m.num_classes = 5;
                m.class_names = {"jpg", "raw", "video", "bitmap", "other"};
                int jpg = ext_class("jpg");
                for (int i = 0; i < 75; ++i) {
                    int grp = g.group_of_class[std::size_t(i)];
                    const std::string& name = group_names()[std::size_t(grp)];
                    if (i == jpg)
                        m.target[std::size_t(i)] = 0;
                    else if (name == "Raw")
                        m.target[std::size_t(i)] = 1;
                    else if (name == "Video")
                        m.target[std::size_t(i)] = 2;
                    else if (name == "Bitmap")
                        m.target[std::size_t(i)] = 3;
                    else
                        m.target[std::size_t(i)] = 4;
                }
                break;
            }
            case 5: {
                m.num_classes = 2;
                m.class_names = {"jpg", "other"};
                int jpg = ext_class("jpg");
                for (int i = 0; i < 75; ++i) m.target[std::size_t(i)] = (i == jpg) ? 0 : 1;
                break;
            }
            case 6: {
                // jpg vs the remaining photographic/video types; others excluded
                m.num_classes = 2;
                m.class_names = {"jpg", "photo-video"};
                m.target.fill(-1);
                m.target[std::size_t(ext_class("jpg"))] = 0;
                for (int i = 0; i < 75; ++i)
                    if (group_names()[std::size_t(g.group_of_class[std::size_t(i)])] == "Raw")
                        m.target[std::size_t(i)] = 1;
                for (const char* e : {"3gp", "mov", "mkv", "tiff", "heic"}) m.target[std::size_t(ext_class(e))] = 1;
                break;
            }
            default:
                throw UsageError("scenario must be 1..6, got " + std::to_string(scenario));
        }
        return m;
    }

    // class id for an extension, or nullopt when the scenario excludes it
    std::optional<int> map(const std::string& extension) const {
        int cid = GroupingTable::instance().class_id(extension);
        int t = target[std::size_t(cid)];
        if (t < 0) return std::nullopt;
        return t;
    }
};

inline std::optional<int> scenario_map(int scenario, const std::string& extension) {
    return ScenarioMap::make(scenario).map(extension);
}

// ---------------------------------------------------------------------------
// Fragment extraction

struct FragmentRecord {
    std::vector<std::uint8_t> bytes;
    std::uint16_t label = 0;
    std::string source_id;
};

// Full blocks at offsets 0, stride, 2*stride, ...; trailing partial block
// discarded. skip_first drops the offset-0 block.
inline std::vector<std::vector<std::uint8_t>> extract_fragments(std::span<const std::uint8_t> file_bytes,
                                                                std::int64_t fragment_size, std::int64_t stride,
                                                                bool skip_first = false) {
    if (fragment_size <= 0) throw UsageError("extract_fragments: fragment_size must be positive");
    if (stride < 1) throw UsageError("extract_fragments: stride must be >= 1");
    std::vector<std::vector<std::uint8_t>> out;
    std::int64_t len = std::int64_t(file_bytes.size());
    for (std::int64_t off = skip_first ? stride : 0; off + fragment_size <= len; off += stride)
        out.emplace_back(file_bytes.begin() + off, file_bytes.begin() + off + fragment_size);
    return out;
}

// ---------------------------------------------------------------------------
// Corpus: fixed-size records, bit-exact on-disk format. Header (little
// endian): magic "FFC1", version u16=1, fragment_size u32, record_count u64,
// num_classes u16, scenario u8, reserved u8; then [label u16][bytes] records.

struct Corpus {
    std::uint32_t fragment_size = 0;
    std::uint16_t num_classes = 0;
    std::uint8_t scenario = 0;
    std::vector<std::uint16_t> labels;
    std::vector<std::uint8_t> bytes;  // record-major, record_count * fragment_size
    std::vector<std::string> source_ids;  // optional in-memory provenance, not serialized
    std::vector<std::string> class_names;
    nlohmann::json provenance;

    std::int64_t size() const { return std::int64_t(labels.size()); }

    std::span<const std::uint8_t> fragment(std::int64_t i) const {
        return {bytes.data() + std::uint64_t(i) * fragment_size, fragment_size};
    }

    FragmentRecord record(std::int64_t i) const {
        auto f = fragment(i);
        FragmentRecord r;
        r.bytes.assign(f.begin(), f.end());
        r.label = labels[std::size_t(i)];
        if (std::size_t(i) < source_ids.size()) r.source_id = source_ids[std::size_t(i)];
        return r;
    }

    void append(std::uint16_t label, std::span<const std::uint8_t> frag) {
        if (frag.size() != fragment_size)
            throw UsageError("corpus append: fragment length " + std::to_string(frag.size()) +
                             " does not match corpus fragment_size " + std::to_string(fragment_size));
        if (label >= num_classes)
            throw UsageError("corpus append: label " + std::to_string(label) + " >= num_classes " +
                             std::to_string(num_classes));
        labels.push_back(label);
        bytes.insert(bytes.end(), frag.begin(), frag.end());
    }

    std::vector<std::int64_t> per_class_counts() const {
        std::vector<std::int64_t> counts(num_classes, 0);
        for (auto l : labels) counts[l]++;
        return counts;
    }

    // digest over the record stream (labels + fragments), stable across
    // write/read round trips
    std::uint64_t digest() const {
        std::uint64_t h = 14695981039346656037ull;
        for (std::int64_t i = 0; i < size(); ++i) {
            std::uint16_t l = labels[std::size_t(i)];
            h = fnv1a64(&l, 2, h);
            auto f = fragment(i);
            h = fnv1a64(f.data(), f.size(), h);
        }
        return h;
    }
};

// ---------------------------------------------------------------------------
// Synthetic corpus: per-class generators with distinct byte statistics, a
// desk-scale stand-in for a real fragment corpus.

enum class GeneratorKind {
    constant_fill,
    printable_text,
    uniform_random,
    run_length,
    periodic_pattern,
    magic_header,
    byte_gradient,
    base64_stream,
};

inline const std::vector<std::pair<std::string, GeneratorKind>>& generator_registry() {
    static const std::vector<std::pair<std::string, GeneratorKind>> reg{
        {"constant", GeneratorKind::constant_fill}, {"text", GeneratorKind::printable_text},
        {"random", GeneratorKind::uniform_random},  {"runlength", GeneratorKind::run_length},
        {"periodic", GeneratorKind::periodic_pattern}, {"magic", GeneratorKind::magic_header},
        {"gradient", GeneratorKind::byte_gradient}, {"base64", GeneratorKind::base64_stream},
    };
    return reg;
}

inline GeneratorKind generator_from_name(const std::string& name) {
    for (const auto& [n, k] : generator_registry())
        if (n == name) return k;
    std::string known;
    for (const auto& [n, k] : generator_registry()) known += (known.empty() ? "" : ", ") + n;
    throw UsageError("unknown generator kind '" + name + "'; known kinds: " + known);
}

inline const char* generator_name(GeneratorKind k) {
    for (const auto& [n, kk] : generator_registry())
        if (kk == k) return n.c_str();
    return "?";
}

inline void fill_fragment(GeneratorKind kind, std::span<std::uint8_t> out, Rng& rng) {
    const std::size_t n = out.size();
    switch (kind) {
        case GeneratorKind::constant_fill: {
            std::uint8_t v = rng.next_byte();
            std::fill(out.begin(), out.end(), v);
            break;
        }
        case GeneratorKind::printable_text: {
            static const char punct[] = {' ', ' ', ' ', '.', ',', '\n'};
            std::size_t i = 0;
            while (i < n) {
                std::size_t wl = 2 + std::size_t(rng.next_below(8));
                for (std::size_t j = 0; j < wl && i < n; ++j) out[i++] = std::uint8_t('a' + rng.next_below(26));
                if (i < n) out[i++] = std::uint8_t(punct[rng.next_below(sizeof punct)]);
            }
            break;
        }
        case GeneratorKind::uniform_random: {
            for (std::size_t i = 0; i < n; ++i) out[i] = rng.next_byte();
            break;
        }
        case GeneratorKind::run_length: {
            std::size_t i = 0;
            while (i < n) {
                std::uint8_t v = rng.next_byte();
                std::size_t run = 4 + std::size_t(rng.next_below(29));
                for (std::size_t j = 0; j < run && i < n; ++j) out[i++] = v;
            }
            break;
        }
        case GeneratorKind::periodic_pattern: {
            std::size_t period = 3 + std::size_t(rng.next_below(14));
            std::vector<std::uint8_t> pat(period);
            for (auto& p : pat) p = rng.next_byte();
            for (std::size_t i = 0; i < n; ++i) out[i] = pat[i % period];
            break;
        }
        case GeneratorKind::magic_header: {
            static const std::uint8_t magic[16] = {0x7F, 'M', 'A', 'G', 'I', 'C', 'B', 'L',
                                                   'O',  'C', 'K', 0x00, 0x01, 0x02, 0x03, 0x04};
            std::size_t h = std::min<std::size_t>(16, n);
            std::copy(magic, magic + h, out.begin());
            for (std::size_t i = h; i < n; ++i) out[i] = rng.next_byte();
            break;
        }
        case GeneratorKind::byte_gradient: {
            std::uint8_t base = std::uint8_t(rng.next_below(64));
            std::size_t step = 5 + std::size_t(rng.next_below(12));
            for (std::size_t i = 0; i < n; ++i) out[i] = std::uint8_t((base + i / step) % 64);
            break;
        }
        case GeneratorKind::base64_stream: {
            static const char alphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
            std::size_t col = 0;
            for (std::size_t i = 0; i < n; ++i) {
                if (col == 76) {
                    out[i] = '\n';
                    col = 0;
                } else {
                    out[i] = std::uint8_t(alphabet[rng.next_below(64)]);
                    ++col;
                }
            }
            break;
        }
    }
}

inline Corpus synth_corpus(const std::vector<GeneratorKind>& class_kinds, std::int64_t per_class,
                           std::int64_t fragment_size, std::uint64_t seed) {
    if (class_kinds.size() < 2) throw UsageError("synth_corpus: at least 2 classes required");
    if (per_class <= 0 || fragment_size <= 0) throw UsageError("synth_corpus: per_class and fragment_size must be positive");
    Corpus c;
    c.fragment_size = std::uint32_t(fragment_size);
    c.num_classes = std::uint16_t(class_kinds.size());
    c.scenario = 0;  // synthetic corpora sit outside the six labeling scenarios
    c.labels.reserve(std::size_t(per_class) * class_kinds.size());
    c.bytes.reserve(std::size_t(per_class) * class_kinds.size() * std::size_t(fragment_size));
    Rng root(seed);
    std::vector<std::uint8_t> frag(std::size_t(fragment_size), 0);
    for (std::size_t k = 0; k < class_kinds.size(); ++k) {
        c.class_names.push_back(generator_name(class_kinds[k]));
        for (std::int64_t r = 0; r < per_class; ++r) {
            Rng rec = root.fork(k, std::uint64_t(r));
            fill_fragment(class_kinds[k], frag, rec);
            c.append(std::uint16_t(k), frag);
        }
    }
    nlohmann::json gens = nlohmann::json::array();
    for (auto k : class_kinds) gens.push_back(generator_name(k));
    c.provenance = {{"kind", "synthetic"}, {"seed", seed}, {"generators", gens}, {"per_class", per_class}};
    return c;
}

// ---------------------------------------------------------------------------
// Deterministic stratified split. Per-class proportions preserved within
// one record; partitions disjoint and exhaustive.

inline std::vector<Corpus> split(const Corpus& corpus, const std::vector<double>& ratios, std::uint64_t seed) {
    if (ratios.empty()) throw UsageError("split: at least one ratio required");
    double total = 0;
    for (double r : ratios) {
        if (r <= 0) throw UsageError("split: ratios must be positive");
        total += r;
    }
    if (std::abs(total - 1.0) > 1e-9) throw UsageError("split: ratios must sum to 1");

    const std::size_t P = ratios.size();
    std::vector<std::vector<std::int64_t>> by_class(corpus.num_classes);
    for (std::int64_t i = 0; i < corpus.size(); ++i) by_class[corpus.labels[std::size_t(i)]].push_back(i);
    for (std::uint16_t k = 0; k < corpus.num_classes; ++k)
        if (!by_class[k].empty() && by_class[k].size() < P)
            throw UsageError("split: class " + std::to_string(k) + " has " + std::to_string(by_class[k].size()) +
                             " records, fewer than " + std::to_string(P) + " partitions");

    Rng rng(seed);
    std::vector<Corpus> parts(P);
    for (auto& p : parts) {
        p.fragment_size = corpus.fragment_size;
        p.num_classes = corpus.num_classes;
        p.scenario = corpus.scenario;
        p.class_names = corpus.class_names;
        p.provenance = corpus.provenance;
    }
    for (std::uint16_t k = 0; k < corpus.num_classes; ++k) {
        auto& idx = by_class[k];
        rng.shuffle(idx);
        const std::int64_t n = std::int64_t(idx.size());
        // floor allocation, remainder to the largest fractional parts
        std::vector<std::int64_t> take(P);
        std::vector<std::pair<double, std::size_t>> fracs(P);
        std::int64_t assigned = 0;
        for (std::size_t p = 0; p < P; ++p) {
            double want = ratios[p] * double(n);
            take[p] = std::int64_t(want);
            fracs[p] = {want - double(take[p]), p};
            assigned += take[p];
        }
        std::stable_sort(fracs.begin(), fracs.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
        for (std::int64_t r = 0; r < n - assigned; ++r) take[fracs[std::size_t(r) % P].second]++;
        std::int64_t pos = 0;
        for (std::size_t p = 0; p < P; ++p)
            for (std::int64_t i = 0; i < take[p]; ++i, ++pos)
                parts[p].append(k, corpus.fragment(idx[std::size_t(pos)]));
    }
    return parts;
}

// ---------------------------------------------------------------------------
// Corpus I/O

namespace detail {

constexpr char kCorpusMagic[4] = {'F', 'F', 'C', '1'};
constexpr std::uint16_t kCorpusVersion = 1;
constexpr std::size_t kCorpusHeaderSize = 4 + 2 + 4 + 8 + 2 + 1 + 1;

}  // namespace detail

inline void corpus_write(const std::string& path, const Corpus& corpus) {
    std::FILE* f = std::fopen((path + ".tmp").c_str(), "wb");
    if (!f) throw DataError("corpus_write: cannot open " + path + ".tmp");
    if (flock(fileno(f), LOCK_EX) != 0) {
        std::fclose(f);
        throw DataError("corpus_write: cannot lock " + path + ".tmp");
    }
    auto w = [&](const void* p, std::size_t n) {
        if (std::fwrite(p, 1, n, f) != n) {
            std::fclose(f);
            throw DataError("corpus_write: write failed for " + path);
        }
    };
    std::uint16_t version = detail::kCorpusVersion;
    std::uint64_t count = std::uint64_t(corpus.size());
    std::uint8_t reserved = 0;
    w(detail::kCorpusMagic, 4);
    w(&version, 2);
    w(&corpus.fragment_size, 4);
    w(&count, 8);
    w(&corpus.num_classes, 2);
    w(&corpus.scenario, 1);
    w(&reserved, 1);
    for (std::int64_t i = 0; i < corpus.size(); ++i) {
        w(&corpus.labels[std::size_t(i)], 2);
        auto frag = corpus.fragment(i);
        w(frag.data(), frag.size());
    }
    std::fflush(f);
    flock(fileno(f), LOCK_UN);
    std::fclose(f);
    std::filesystem::rename(path + ".tmp", path);

    nlohmann::json sidecar{{"class_names", corpus.class_names},
                           {"scenario", corpus.scenario},
                           {"provenance", corpus.provenance},
                           {"digest", std::uint64_t(corpus.digest())}};
    std::ofstream sj(path + ".json", std::ios::trunc);
    sj << sidecar.dump(2) << "\n";
}

inline Corpus corpus_read(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("corpus_read: cannot open " + path);
    f.seekg(0, std::ios::end);
    std::uint64_t fsize = std::uint64_t(f.tellg());
    f.seekg(0, std::ios::beg);
    if (fsize < detail::kCorpusHeaderSize) throw DataError("corpus_read: file shorter than header");

    char magic[4];
    std::uint16_t version = 0;
    Corpus c;
    std::uint64_t count = 0;
    std::uint8_t reserved = 0;
    f.read(magic, 4);
    f.read(reinterpret_cast<char*>(&version), 2);
    f.read(reinterpret_cast<char*>(&c.fragment_size), 4);
    f.read(reinterpret_cast<char*>(&count), 8);
    f.read(reinterpret_cast<char*>(&c.num_classes), 2);
    f.read(reinterpret_cast<char*>(&c.scenario), 1);
    f.read(reinterpret_cast<char*>(&reserved), 1);
    if (std::memcmp(magic, detail::kCorpusMagic, 4) != 0) throw DataError("corpus_read: bad magic in " + path);
    if (version > detail::kCorpusVersion)
        throw DataError("corpus_read: version " + std::to_string(version) + " unsupported (max " +
                        std::to_string(detail::kCorpusVersion) + ")");
    if (c.fragment_size == 0) throw DataError("corpus_read: zero fragment size");
    std::uint64_t expect = detail::kCorpusHeaderSize + count * (2 + std::uint64_t(c.fragment_size));
    if (expect != fsize)
        throw DataError("corpus_read: record count " + std::to_string(count) + " inconsistent with file size " +
                        std::to_string(fsize) + " (expected " + std::to_string(expect) + ")");

    c.labels.resize(count);
    c.bytes.resize(count * c.fragment_size);
    for (std::uint64_t i = 0; i < count; ++i) {
        f.read(reinterpret_cast<char*>(&c.labels[i]), 2);
        f.read(reinterpret_cast<char*>(c.bytes.data() + i * c.fragment_size), c.fragment_size);
    }
    if (!f) throw DataError("corpus_read: truncated record data");
    for (auto l : c.labels)
        if (l >= c.num_classes) throw DataError("corpus_read: label " + std::to_string(l) + " out of range");

    std::ifstream sj(path + ".json");
    if (sj) {
        try {
            nlohmann::json sidecar = nlohmann::json::parse(sj);
            c.class_names = sidecar.value("class_names", std::vector<std::string>{});
            c.provenance = sidecar.value("provenance", nlohmann::json::object());
        } catch (const nlohmann::json::exception&) {
            // sidecar is advisory; a broken one does not invalidate the corpus
        }
    }
    if (c.class_names.empty())
        for (int k = 0; k < c.num_classes; ++k) c.class_names.push_back("class" + std::to_string(k));
    return c;
}

}  // namespace ffc
