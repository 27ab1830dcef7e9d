#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "ffc/data.hpp"

using ffc::Corpus;
using ffc::GeneratorKind;
using ffc::GroupingTable;
using ffc::ScenarioMap;

namespace {

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

// mean over fragments of the per-fragment byte entropy
double byte_entropy(const Corpus& c, int cls) {
    double sum = 0;
    std::int64_t count = 0;
    for (std::int64_t i = 0; i < c.size(); ++i) {
        if (c.labels[std::size_t(i)] != cls) continue;
        std::array<double, 256> hist{};
        auto frag = c.fragment(i);
        for (std::uint8_t b : frag) hist[b] += 1;
        double h = 0;
        for (double n : hist)
            if (n > 0) h -= (n / double(frag.size())) * std::log2(n / double(frag.size()));
        sum += h;
        ++count;
    }
    return sum / double(count);
}

}  // namespace

TEST_CASE("grouping table: partition sizes and total") {
    const auto& t = GroupingTable::instance();
    const std::array<int, 11> expect{13, 7, 6, 4, 9, 7, 4, 11, 3, 7, 4};
    int total = 0;
    for (int g = 0; g < 11; ++g) {
        REQUIRE(t.group_size(g) == expect[std::size_t(g)]);
        total += t.group_size(g);
    }
    REQUIRE(total == 75);
    REQUIRE(t.extensions.size() == 75);
}

TEST_CASE("grouping table: every extension appears exactly once") {
    const auto& t = GroupingTable::instance();
    std::set<std::string> seen(t.extensions.begin(), t.extensions.end());
    REQUIRE(seen.size() == 75);
    REQUIRE(t.class_id("jpg") == 20);
    REQUIRE(t.class_id("JPG") == 20);  // case-insensitive
    REQUIRE(t.class_id("mach-o") == 27);
    REQUIRE(t.class_id("3fr") == 60);
    REQUIRE(t.class_id("sqlite") == 74);
}

TEST_CASE("grouping table: unknown extension error lists known types") {
    try {
        GroupingTable::instance().class_id("docy");
        FAIL("expected UsageError");
    } catch (const ffc::UsageError& e) {
        std::string msg = e.what();
        REQUIRE(msg.find("docy") != std::string::npos);
        REQUIRE(msg.find("docx") != std::string::npos);
        REQUIRE(msg.find("sqlite") != std::string::npos);
    }
}

TEST_CASE("scenario class counts: 75/11/25/5/2/2") {
    const std::array<int, 6> expect{75, 11, 25, 5, 2, 2};
    for (int s = 1; s <= 6; ++s) {
        auto m = ScenarioMap::make(s);
        REQUIRE(m.num_classes == expect[std::size_t(s - 1)]);
        REQUIRE(int(m.class_names.size()) == m.num_classes);
    }
    REQUIRE_THROWS_AS(ScenarioMap::make(0), ffc::UsageError);
    REQUIRE_THROWS_AS(ScenarioMap::make(7), ffc::UsageError);
}

TEST_CASE("scenario 1 is a bijection over the 75 extensions") {
    auto m = ScenarioMap::make(1);
    std::set<int> ids;
    for (const auto& ext : GroupingTable::instance().extensions) ids.insert(*m.map(ext));
    REQUIRE(ids.size() == 75);
    REQUIRE(*ids.begin() == 0);
    REQUIRE(*ids.rbegin() == 74);
}

TEST_CASE("every scenario's image is exactly 0..K-1") {
    for (int s = 1; s <= 6; ++s) {
        auto m = ScenarioMap::make(s);
        std::set<int> ids;
        for (const auto& ext : GroupingTable::instance().extensions) {
            auto v = m.map(ext);
            if (v) ids.insert(*v);
        }
        REQUIRE(int(ids.size()) == m.num_classes);
        REQUIRE(*ids.begin() == 0);
        REQUIRE(*ids.rbegin() == m.num_classes - 1);
    }
}

TEST_CASE("scenario 5: jpg separate, everything else one class") {
    REQUIRE(*ffc::scenario_map(5, "jpg") == 0);
    REQUIRE(*ffc::scenario_map(5, "pdf") == 1);
    REQUIRE(*ffc::scenario_map(5, "exe") == 1);
    auto m = ScenarioMap::make(5);
    int zero = 0, one = 0;
    for (const auto& ext : GroupingTable::instance().extensions) {
        if (*m.map(ext) == 0) ++zero;
        else ++one;
    }
    REQUIRE(zero == 1);
    REQUIRE(one == 74);
}

TEST_CASE("scenario 2 groups by use: mp3 is Audio") {
    auto m = ScenarioMap::make(2);
    REQUIRE(*m.map("mp3") == 1);  // groups in table order; Audio is second
    REQUIRE(m.class_names[1] == "Audio");
    for (const char* e : {"aiff", "flac", "m4a", "ogg", "wav", "wma"}) REQUIRE(*m.map(e) == 1);
    REQUIRE(*m.map("zip") == 0);
    REQUIRE(*m.map("sqlite") == 10);
}

TEST_CASE("scenario 3: 6 bitmap + 11 raw + 7 video separate ids + other = 25") {
    auto m = ScenarioMap::make(3);
    std::map<int, int> count_by_id;
    for (const auto& ext : GroupingTable::instance().extensions) count_by_id[*m.map(ext)]++;
    REQUIRE(count_by_id.size() == 25);
    int singletons = 0;
    for (const auto& [id, n] : count_by_id)
        if (n == 1) ++singletons;
    REQUIRE(singletons == 24);  // 6 + 11 + 7 separate classes
    REQUIRE(count_by_id[24] == 75 - 24);
    REQUIRE(m.class_names[24] == "other");
    REQUIRE(*m.map("jpg") == 0);
}

TEST_CASE("scenario 4 partition sizes are 1/11/7/5/51") {
    auto m = ScenarioMap::make(4);
    std::array<int, 5> sizes{};
    for (const auto& ext : GroupingTable::instance().extensions) sizes[std::size_t(*m.map(ext))]++;
    REQUIRE(sizes == std::array<int, 5>{1, 11, 7, 5, 51});
    REQUIRE(*m.map("jpg") == 0);
    for (const char* e : {"tiff", "heic", "bmp", "gif", "png"}) REQUIRE(*m.map(e) == 3);
    REQUIRE(*m.map("arw") == 1);
    REQUIRE(*m.map("mov") == 2);
    REQUIRE(*m.map("pdf") == 4);
}

TEST_CASE("scenario 6: jpg vs photographic/video; others excluded") {
    auto m = ScenarioMap::make(6);
    REQUIRE(*m.map("jpg") == 0);
    REQUIRE_FALSE(m.map("exe").has_value());
    REQUIRE_FALSE(m.map("pdf").has_value());
    int members = 0;
    for (const auto& ext : GroupingTable::instance().extensions)
        if (m.map(ext)) ++members;
    REQUIRE(members == 17);  // jpg + 11 raw + 3gp, mov, mkv, tiff, heic
    for (const char* e : {"arw", "cr2", "3fr", "3gp", "mov", "mkv", "tiff", "heic"}) REQUIRE(*m.map(e) == 1);
}

TEST_CASE("extract_fragments: block counts and offsets") {
    std::vector<std::uint8_t> file(10000);
    for (std::size_t i = 0; i < file.size(); ++i) file[i] = std::uint8_t(i % 251);
    auto two = ffc::extract_fragments(file, 4096, 4096);
    REQUIRE(two.size() == 2);
    REQUIRE(two[0][0] == file[0]);
    REQUIRE(two[1][0] == file[4096]);

    std::vector<std::uint8_t> small(4095, 7);
    REQUIRE(ffc::extract_fragments(small, 4096, 4096).empty());

    std::vector<std::uint8_t> three(3 * 4096);
    for (std::size_t i = 0; i < three.size(); ++i) three[i] = std::uint8_t(i / 4096);
    auto skipped = ffc::extract_fragments(three, 4096, 4096, true);
    REQUIRE(skipped.size() == 2);
    REQUIRE(skipped[0][0] == 1);  // offset 4096
    REQUIRE(skipped[1][0] == 2);  // offset 8192

    REQUIRE_THROWS_AS(ffc::extract_fragments(file, 4096, 0), ffc::UsageError);
}

TEST_CASE("extract_fragments: count law vs naive reference on random lengths") {
    ffc::Rng rng(11);
    for (int trial = 0; trial < 200; ++trial) {
        std::int64_t len = std::int64_t(rng.next_below(3000));
        std::int64_t frag = 1 + std::int64_t(rng.next_below(512));
        std::int64_t stride = 1 + std::int64_t(rng.next_below(700));
        bool skip = rng.next_below(2) == 1;
        std::vector<std::uint8_t> file(std::size_t(len), 1);
        auto out = ffc::extract_fragments(file, frag, stride, skip);
        std::int64_t expect = 0;
        for (std::int64_t off = skip ? stride : 0; off + frag <= len; off += stride) ++expect;
        REQUIRE(std::int64_t(out.size()) == expect);
    }
}

TEST_CASE("synth corpus: deterministic, balanced, validated") {
    std::vector<GeneratorKind> kinds{GeneratorKind::constant_fill, GeneratorKind::printable_text,
                                     GeneratorKind::uniform_random, GeneratorKind::run_length};
    auto a = ffc::synth_corpus(kinds, 50, 128, 99);
    auto b = ffc::synth_corpus(kinds, 50, 128, 99);
    REQUIRE(a.size() == 200);
    REQUIRE(a.bytes == b.bytes);
    REQUIRE(a.labels == b.labels);
    auto counts = a.per_class_counts();
    for (auto c : counts) REQUIRE(c == 50);
    auto c2 = ffc::synth_corpus(kinds, 50, 128, 100);
    REQUIRE(a.bytes != c2.bytes);
    REQUIRE_THROWS_AS(ffc::synth_corpus({GeneratorKind::constant_fill}, 10, 64, 0), ffc::UsageError);
    REQUIRE_THROWS_AS(ffc::generator_from_name("nope"), ffc::UsageError);
}

TEST_CASE("synth corpus: byte entropy orders constant < text < random") {
    std::vector<GeneratorKind> kinds{GeneratorKind::constant_fill, GeneratorKind::printable_text,
                                     GeneratorKind::uniform_random};
    auto c = ffc::synth_corpus(kinds, 40, 512, 5);
    double h_const = byte_entropy(c, 0), h_text = byte_entropy(c, 1), h_rand = byte_entropy(c, 2);
    REQUIRE(h_const < h_text);
    REQUIRE(h_text < h_rand);
    REQUIRE(h_rand > 7.5);  // near-uniform over 256 symbols, less finite-sample bias
}

TEST_CASE("split: stratified 80/10/10, disjoint, exhaustive, reproducible") {
    std::vector<GeneratorKind> kinds{GeneratorKind::constant_fill, GeneratorKind::printable_text,
                                     GeneratorKind::uniform_random, GeneratorKind::run_length,
                                     GeneratorKind::periodic_pattern, GeneratorKind::magic_header,
                                     GeneratorKind::byte_gradient, GeneratorKind::base64_stream};
    auto corpus = ffc::synth_corpus(kinds, 100, 64, 3);
    auto parts = ffc::split(corpus, {0.8, 0.1, 0.1}, 17);
    REQUIRE(parts.size() == 3);
    REQUIRE(parts[0].size() == 640);
    REQUIRE(parts[1].size() == 80);
    REQUIRE(parts[2].size() == 80);
    for (const auto& p : parts)
        for (auto c : p.per_class_counts()) REQUIRE(std::abs(c - p.size() / 8) <= 1);

    // disjoint and exhaustive as a multiset of records
    auto key = [](std::uint16_t label, std::span<const std::uint8_t> frag) {
        return ffc::fnv1a64(frag.data(), frag.size(), 1469598103934665603ull + label);
    };
    std::multiset<std::uint64_t> whole, pieces;
    for (std::int64_t i = 0; i < corpus.size(); ++i) whole.insert(key(corpus.labels[std::size_t(i)], corpus.fragment(i)));
    for (const auto& p : parts)
        for (std::int64_t i = 0; i < p.size(); ++i) pieces.insert(key(p.labels[std::size_t(i)], p.fragment(i)));
    REQUIRE(whole == pieces);

    auto parts2 = ffc::split(corpus, {0.8, 0.1, 0.1}, 17);
    for (std::size_t p = 0; p < 3; ++p) {
        REQUIRE(parts[p].labels == parts2[p].labels);
        REQUIRE(parts[p].bytes == parts2[p].bytes);
    }
}

TEST_CASE("split: ratio validation and tiny classes") {
    std::vector<GeneratorKind> kinds{GeneratorKind::constant_fill, GeneratorKind::uniform_random};
    auto corpus = ffc::synth_corpus(kinds, 2, 64, 3);
    REQUIRE_THROWS_AS(ffc::split(corpus, {0.5, 0.3}, 0), ffc::UsageError);       // does not sum to 1
    REQUIRE_THROWS_AS(ffc::split(corpus, {0.8, -0.2, 0.4}, 0), ffc::UsageError); // negative
    REQUIRE_THROWS_AS(ffc::split(corpus, {0.4, 0.3, 0.3}, 0), ffc::UsageError);  // 2 records < 3 partitions
}

TEST_CASE("corpus io: bit-exact round trip") {
    std::vector<GeneratorKind> kinds{GeneratorKind::magic_header, GeneratorKind::base64_stream,
                                     GeneratorKind::byte_gradient};
    auto corpus = ffc::synth_corpus(kinds, 20, 256, 8);
    std::string path = temp_path("ffc_test_corpus.ffc");
    ffc::corpus_write(path, corpus);
    auto back = ffc::corpus_read(path);
    REQUIRE(back.fragment_size == corpus.fragment_size);
    REQUIRE(back.num_classes == corpus.num_classes);
    REQUIRE(back.scenario == corpus.scenario);
    REQUIRE(back.labels == corpus.labels);
    REQUIRE(back.bytes == corpus.bytes);
    REQUIRE(back.class_names == corpus.class_names);
    REQUIRE(back.digest() == corpus.digest());
    std::filesystem::remove(path);
    std::filesystem::remove(path + ".json");
}

TEST_CASE("corpus io: corrupted files are rejected") {
    std::vector<GeneratorKind> kinds{GeneratorKind::constant_fill, GeneratorKind::uniform_random};
    auto corpus = ffc::synth_corpus(kinds, 5, 64, 8);
    std::string path = temp_path("ffc_test_corrupt.ffc");
    ffc::corpus_write(path, corpus);

    SECTION("bad magic") {
        std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(0);
        f.write("XXXX", 4);
        f.close();
        REQUIRE_THROWS_AS(ffc::corpus_read(path), ffc::DataError);
    }
    SECTION("unsupported version") {
        std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(4);
        std::uint16_t v = 9;
        f.write(reinterpret_cast<const char*>(&v), 2);
        f.close();
        REQUIRE_THROWS_AS(ffc::corpus_read(path), ffc::DataError);
    }
    SECTION("record count inconsistent with file size") {
        std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(4 + 2 + 4);
        std::uint64_t n = 99;
        f.write(reinterpret_cast<const char*>(&n), 8);
        f.close();
        REQUIRE_THROWS_AS(ffc::corpus_read(path), ffc::DataError);
    }
    SECTION("truncated record data") {
        std::filesystem::resize_file(path, std::filesystem::file_size(path) - 10);
        REQUIRE_THROWS_AS(ffc::corpus_read(path), ffc::DataError);
    }
    SECTION("label out of range") {
        std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(22);  // first record label
        std::uint16_t bad = 60000;
        f.write(reinterpret_cast<const char*>(&bad), 2);
        f.close();
        REQUIRE_THROWS_AS(ffc::corpus_read(path), ffc::DataError);
    }
    std::filesystem::remove(path);
    std::filesystem::remove(path + ".json");
}

TEST_CASE("corpus append validates length and label") {
    Corpus c;
    c.fragment_size = 8;
    c.num_classes = 2;
    std::vector<std::uint8_t> ok(8, 1), bad(7, 1);
    c.append(1, ok);
    REQUIRE_THROWS_AS(c.append(0, bad), ffc::UsageError);
    REQUIRE_THROWS_AS(c.append(2, ok), ffc::UsageError);
    REQUIRE(c.size() == 1);
}

TEST_CASE("corpus record accessor carries bytes, label and provenance") {
    Corpus c;
    c.fragment_size = 4;
    c.num_classes = 2;
    c.append(1, std::vector<std::uint8_t>{9, 8, 7, 6});
    c.source_ids.push_back("a.jpg");
    auto r = c.record(0);
    REQUIRE(r.label == 1);
    REQUIRE(r.bytes == std::vector<std::uint8_t>{9, 8, 7, 6});
    REQUIRE(r.source_id == "a.jpg");
}
