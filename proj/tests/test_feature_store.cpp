#include "fhproxy/feature_store.hpp"

#include "fhproxy/errors.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <fstream>

using namespace fhproxy;
using fhtest::TempDir;

TEST_SUITE("feature_store") {

TEST_CASE("round trip preserves structure bit-exactly") {
    TempDir dir("fs_roundtrip");
    Rng rng(1);
    for (int trial = 0; trial < 5; ++trial) {
        const auto h = fhtest::random_history(12, 6, 4, 3, 1 + trial, rng);
        const auto path = dir.path() / ("h" + std::to_string(trial) + ".fhst");
        write_history(path, h);
        const FeatureHistory back = read_history(path);
        REQUIRE(back.epochs.size() == h.epochs.size());
        CHECK(back.y_train == h.y_train);
        CHECK(back.y_val == h.y_val);
        for (size_t e = 0; e < h.epochs.size(); ++e) {
            CHECK(back.epochs[e].epoch == h.epochs[e].epoch);
            CHECK(back.epochs[e].h_train == h.epochs[e].h_train);
            CHECK(back.epochs[e].h_val == h.epochs[e].h_val);
            CHECK(back.epochs[e].cls_weight == h.epochs[e].cls_weight);
            CHECK(back.epochs[e].cls_bias == h.epochs[e].cls_bias);
            CHECK(back.epochs[e].raw_val_accuracy == h.epochs[e].raw_val_accuracy);
        }
    }
}

TEST_CASE("write-read-write is byte identical") {
    TempDir dir("fs_bytes");
    Rng rng(2);
    const auto h = fhtest::random_history(8, 4, 3, 2, 4, rng);
    const auto p1 = dir.path() / "a.fhst";
    const auto p2 = dir.path() / "b.fhst";
    write_history(p1, h);
    write_history(p2, read_history(p1));
    CHECK(fhtest::read_bytes(p1) == fhtest::read_bytes(p2));
}

TEST_CASE("empty history is a header-only file") {
    TempDir dir("fs_empty");
    FeatureHistory h;
    h.n_train = 3;
    h.n_val = 2;
    h.d = 4;
    h.c = 2;
    h.y_train = {0, 1, 0};
    h.y_val = {1, 0};
    const auto path = dir.path() / "empty.fhst";
    write_history(path, h);
    CHECK(std::filesystem::file_size(path) == fhst_header_bytes(3, 2));
    const FeatureHistory back = read_history(path);
    CHECK(back.epochs.empty());
    CHECK(back.d == 4);
}

TEST_CASE("60-epoch desk-shape file size matches the block formula") {
    // Independent arithmetic for n_train=2048, n_val=512, d=32, c=10:
    // header = 4 + 4 + 4*4 + 4*2048 + 4*512 = 10264
    // block  = 4 + 4 + 4*(2048*32 + 512*32 + 10*32 + 10) = 329008
    const uint64_t expect = 10264ull + 60ull * 329008ull;
    CHECK(fhst_header_bytes(2048, 512) + 60 * fhst_block_bytes(2048, 512, 32, 10) == expect);

    TempDir dir("fs_size");
    FeatureHistory h;
    h.n_train = 2048;
    h.n_val = 512;
    h.d = 32;
    h.c = 10;
    h.y_train.assign(2048, 0);
    h.y_val.assign(512, 0);
    for (uint32_t e = 1; e <= 60; ++e) {
        EpochRecord rec;
        rec.epoch = e;
        rec.h_train = Matrix(2048, 32);
        rec.h_val = Matrix(512, 32);
        rec.cls_weight = Matrix(10, 32);
        rec.cls_bias = Matrix(1, 10);
        h.epochs.push_back(std::move(rec));
    }
    const auto path = dir.path() / "desk.fhst";
    write_history(path, h);
    CHECK(std::filesystem::file_size(path) == expect);
}

TEST_CASE("corrupt magic is a format error") {
    TempDir dir("fs_magic");
    const auto path = dir.path() / "bad.fhst";
    std::ofstream(path, std::ios::binary) << "XXST0000000000000000";
    CHECK_THROWS_AS(read_history(path), FormatError);
}

TEST_CASE("truncation names a byte offset") {
    TempDir dir("fs_trunc");
    Rng rng(3);
    const auto h = fhtest::random_history(6, 3, 2, 2, 3, rng);
    const auto path = dir.path() / "t.fhst";
    write_history(path, h);
    const auto bytes = fhtest::read_bytes(path);
    const auto cut = dir.path() / "cut.fhst";
    std::ofstream(cut, std::ios::binary)
        .write(bytes.data(), static_cast<std::streamsize>(bytes.size() - 7));
    try {
        read_history(cut);
        FAIL("expected FormatError");
    } catch (const FormatError& e) {
        CHECK(std::string(e.what()).find("byte offset") != std::string::npos);
    }
}

TEST_CASE("window selects the trailing records") {
    Rng rng(4);
    const auto h = fhtest::random_history(4, 2, 2, 2, 10, rng);

    auto epochs_of = [](const std::vector<const EpochRecord*>& records) {
        std::vector<uint32_t> out;
        for (const auto* r : records) out.push_back(r->epoch);
        return out;
    };

    CHECK(window(h, 10, 10).size() == 10);
    CHECK(epochs_of(window(h, 1, 10)) == std::vector<uint32_t>{1});
    CHECK(epochs_of(window(h, 7, 3)) == std::vector<uint32_t>{5, 6, 7});
    CHECK_THROWS_AS(window(h, 11, 3), InvalidInputError);

    for (uint32_t end = 1; end <= 10; ++end)
        for (uint32_t k = 1; k <= 12; ++k)
            CHECK(window(h, end, k).size() == std::min(k, end));
}

TEST_CASE("validate rejects malformed histories") {
    Rng rng(5);
    auto h = fhtest::random_history(4, 2, 2, 2, 3, rng);
    h.epochs[1].epoch = h.epochs[0].epoch; // not strictly increasing
    CHECK_THROWS_AS(h.validate(), InvalidInputError);
}

} // TEST_SUITE
