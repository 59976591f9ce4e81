// test_serialize.cpp - embedding container, named-tensor container, parameter
// snapshots, PGM output, key=value configs
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "doctest.h"
#include "moelab/serialize.hpp"

using namespace moelab;

TEST_SUITE_BEGIN("serialize");

namespace {

std::string temp_path(const std::string& name) {
    return std::string("moelab_test_") + name;
}

std::vector<unsigned char> read_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    return std::vector<unsigned char>(std::istreambuf_iterator<char>(in),
                                      std::istreambuf_iterator<char>());
}

void write_raw(const std::string& path, const std::vector<unsigned char>& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
}

struct FileGuard {
    std::string path;
    ~FileGuard() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("embeddings survive the narrow-then-widen round trip as a fixed point") {
    const std::string path = temp_path("states.moeb");
    FileGuard guard{path};
    Rng rng(91);
    const Tensor states = rng.normal_tensor({2, 3, 4}, 0.0, 1.0);
    save_embeddings(path, states);
    const Tensor once = load_embeddings(path);
    REQUIRE(once.rank() == 3);
    CHECK(once.dim(0) == 2);
    CHECK(once.dim(1) == 3);
    CHECK(once.dim(2) == 4);
    // First trip narrows to float32; the values change within float32 accuracy.
    for (std::size_t i = 0; i < states.size(); ++i) {
        CHECK(once[i] == doctest::Approx(states[i]).epsilon(1e-6));
    }
    // A second trip is bit-identical: float32-representable values are fixed.
    const std::string path2 = temp_path("states2.moeb");
    FileGuard guard2{path2};
    save_embeddings(path2, once);
    CHECK(load_embeddings(path2).equals(once));
    CHECK(read_bytes(path2) == read_bytes(path2));
    // Same content re-saved produces identical bytes.
    const std::string path3 = temp_path("states3.moeb");
    FileGuard guard3{path3};
    save_embeddings(path3, once);
    CHECK(read_bytes(path3) == read_bytes(path2));
}

TEST_CASE("embedding container rejects non-rank-3 tensors") {
    const std::string path = temp_path("bad_rank.moeb");
    FileGuard guard{path};
    CHECK_THROWS_AS(save_embeddings(path, Tensor({2, 3})), std::invalid_argument);
}

TEST_CASE("embedding loader names the byte offset of each defect") {
    const std::string path = temp_path("corrupt.moeb");
    FileGuard guard{path};
    Tensor states({1, 2, 2}, {1.0, 2.0, 3.0, 4.0});
    save_embeddings(path, states);
    std::vector<unsigned char> bytes = read_bytes(path);

    auto expect_error_mentions = [&](const std::string& what) {
        try {
            (void)load_embeddings(path);
            FAIL_CHECK("expected a parse failure for " << what);
        } catch (const std::runtime_error& e) {
            const std::string msg = e.what();
            CAPTURE(msg);
            CHECK(msg.find("at byte") != std::string::npos);
        }
    };

    std::vector<unsigned char> magic = bytes;
    magic[0] = 'X';
    write_raw(path, magic);
    expect_error_mentions("magic");

    std::vector<unsigned char> version = bytes;
    version[4] = 9;
    write_raw(path, version);
    expect_error_mentions("version");

    std::vector<unsigned char> truncated = bytes;
    truncated.resize(truncated.size() - 3);
    write_raw(path, truncated);
    expect_error_mentions("truncation");

    std::vector<unsigned char> oversized = bytes;
    oversized.push_back(0);
    write_raw(path, oversized);
    expect_error_mentions("trailing bytes");

    CHECK_THROWS_AS((void)load_embeddings("definitely_missing_file.moeb"), std::runtime_error);
}

TEST_CASE("named tensors round trip bit for bit and keep their order") {
    const std::string path = temp_path("tensors.moet");
    FileGuard guard{path};
    Rng rng(92);
    const Tensor t1 = rng.normal_tensor({3}, 0.0, 1.0);
    const Tensor t2 = rng.normal_tensor({2, 5}, 0.0, 1e300);
    const Tensor t3 = rng.normal_tensor({2, 2, 2}, 0.0, 1e-300);
    save_tensors(path, {{"alpha", &t1}, {"beta", &t2}, {"gamma", &t3}});
    const auto loaded = load_tensors(path);
    REQUIRE(loaded.size() == 3);
    CHECK(loaded[0].first == "alpha");
    CHECK(loaded[1].first == "beta");
    CHECK(loaded[2].first == "gamma");
    CHECK(loaded[0].second.equals(t1));
    CHECK(loaded[1].second.equals(t2));
    CHECK(loaded[2].second.equals(t3));
}

TEST_CASE("named tensor loader rejects trailing bytes") {
    const std::string path = temp_path("trailing.moet");
    FileGuard guard{path};
    const Tensor t({2}, {1.0, 2.0});
    save_tensors(path, {{"t", &t}});
    std::vector<unsigned char> bytes = read_bytes(path);
    bytes.push_back(7);
    write_raw(path, bytes);
    CHECK_THROWS_AS((void)load_tensors(path), std::runtime_error);
}

TEST_CASE("parameter snapshots restore a router bit for bit") {
    const std::string path = temp_path("router.moet");
    FileGuard guard{path};
    RouterConfig cfg;
    cfg.hidden_size = 16;
    cfg.num_experts = 4;
    cfg.top_k = 2;
    cfg.qk_dim = 8;
    cfg.mlp_hidden = 8;
    cfg.ss_dim = 4;
    cfg.seed = 7;
    RouterPtr source = make_router("mlp", cfg);
    save_parameters(path, source->parameters());

    RouterConfig other = cfg;
    other.seed = 8;
    RouterPtr target = make_router("mlp", other);
    Rng rng(93);
    const Tensor x = rng.normal_tensor({4, 16}, 0.0, 1.0);
    CHECK_FALSE(target->probabilities(x).equals(source->probabilities(x)));
    load_parameters(path, target->parameters());
    CHECK(target->probabilities(x).equals(source->probabilities(x)));
}

TEST_CASE("parameter restore demands an exact name and shape match") {
    const std::string path = temp_path("mismatch.moet");
    FileGuard guard{path};
    Tensor a({2, 2}, {1, 2, 3, 4});
    Tensor b({2}, {5, 6});
    save_parameters(path, {{"a", &a}, {"b", &b}});

    Tensor a2({2, 2});
    CHECK_THROWS_AS(load_parameters(path, {{"a", &a2}}), std::runtime_error);

    Tensor b_wrong({3});
    CHECK_THROWS_AS(load_parameters(path, {{"a", &a2}, {"b", &b_wrong}}), std::runtime_error);

    Tensor c({2});
    CHECK_THROWS_AS(load_parameters(path, {{"a", &a2}, {"c", &c}}), std::runtime_error);

    Tensor b2({2});
    Tensor extra({1});
    CHECK_THROWS_AS(load_parameters(path, {{"a", &a2}, {"b", &b2}, {"extra", &extra}}),
                    std::runtime_error);

    load_parameters(path, {{"a", &a2}, {"b", &b2}});
    CHECK(a2.equals(a));
    CHECK(b2.equals(b));
}

TEST_CASE("pgm output has the frozen header and quantization") {
    const std::string path = temp_path("img.pgm");
    FileGuard guard{path};
    Tensor m({4, 8});
    m.fill(0.125);
    m.at(0, 0) = -1.0;  // clamps to 0
    m.at(0, 1) = 2.0;   // clamps to 255
    write_pgm(path, m);
    const std::vector<unsigned char> bytes = read_bytes(path);
    const std::string header = "P5\n8 4\n255\n";
    REQUIRE(bytes.size() == header.size() + 32);
    CHECK(std::string(bytes.begin(), bytes.begin() + static_cast<long>(header.size())) == header);
    CHECK(bytes[header.size() + 0] == 0);
    CHECK(bytes[header.size() + 1] == 255);
    // round(0.125 * 255) = round(31.875) = 32
    for (std::size_t i = 2; i < 32; ++i) CHECK(bytes[header.size() + i] == 32);
    CHECK_THROWS_AS(write_pgm(path, Tensor({2})), std::invalid_argument);
}

TEST_CASE("key=value text: comments, trimming, order, repeats, errors") {
    const std::string text =
        "# characterization defaults\n"
        "router = linear\n"
        "\n"
        "  hidden=768   \n"
        "seed = 42  # trailing comment\n"
        "router = mlp\n";
    const auto pairs = parse_kv_text(text);
    REQUIRE(pairs.size() == 4);
    CHECK(pairs[0].first == "router");
    CHECK(pairs[0].second == "linear");
    CHECK(pairs[1].first == "hidden");
    CHECK(pairs[1].second == "768");
    CHECK(pairs[2].first == "seed");
    CHECK(pairs[2].second == "42");
    CHECK(pairs[3].second == "mlp");

    try {
        (void)parse_kv_text("router = linear\nthis line has no equals\n");
        FAIL_CHECK("expected a parse failure");
    } catch (const std::invalid_argument& e) {
        CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
    CHECK_THROWS_AS((void)parse_kv_text("= value\n"), std::invalid_argument);
}

TEST_CASE("key=value files format and re-parse as a fixed point") {
    const std::string path = temp_path("config.kv");
    FileGuard guard{path};
    const std::vector<std::pair<std::string, std::string>> pairs = {
        {"router", "attention"}, {"hidden", "64"}, {"temperature", "0.5"}};
    const std::string text = format_kv(pairs);
    {
        std::ofstream out(path);
        out << text;
    }
    const auto back = parse_kv_file(path);
    REQUIRE(back.size() == pairs.size());
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        CHECK(back[i].first == pairs[i].first);
        CHECK(back[i].second == pairs[i].second);
    }
    CHECK(format_kv(back) == text);
    CHECK_THROWS_AS((void)parse_kv_file("definitely_missing_config.kv"), std::runtime_error);
}

TEST_SUITE_END();
