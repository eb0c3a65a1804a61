#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "sslvit/data_io.hpp"
#include "sslvit/error.hpp"
#include "sslvit/rng.hpp"

using namespace sslvit;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("sslvit_test_" + std::to_string(Rng::hash(std::uintptr_t(this))));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

void write_bytes(const std::string& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary);
    out.write(bytes.data(), std::streamsize(bytes.size()));
}

std::string read_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("load_ppm reads known pixels") {
    TempDir dir;

    SUBCASE("1x1 white") {
        write_bytes(dir.file("w.ppm"), std::string("P6\n1 1\n255\n") + "\xFF\xFF\xFF");
        Image img = load_ppm(dir.file("w.ppm"));
        CHECK(img.height == 1);
        CHECK(img.width == 1);
        CHECK(img.at(0, 0, 0) == 1.0f);
        CHECK(img.at(1, 0, 0) == 1.0f);
        CHECK(img.at(2, 0, 0) == 1.0f);
    }

    SUBCASE("2x2 exact bytes") {
        std::string px;
        // rows: (0,51,102) (153,204,255) / (255,0,128) (64,32,16)
        for (int v : {0, 51, 102, 153, 204, 255, 255, 0, 128, 64, 32, 16}) px.push_back(char(v));
        write_bytes(dir.file("q.ppm"), "P6\n2 2\n255\n" + px);
        Image img = load_ppm(dir.file("q.ppm"));
        CHECK(img.at(0, 0, 0) == doctest::Approx(0.0f));
        CHECK(img.at(1, 0, 0) == doctest::Approx(51.0f / 255.0f));
        CHECK(img.at(2, 0, 1) == doctest::Approx(1.0f));
        CHECK(img.at(0, 1, 1) == doctest::Approx(64.0f / 255.0f));
        CHECK(img.at(2, 1, 1) == doctest::Approx(16.0f / 255.0f));
    }

    SUBCASE("comments in header are skipped") {
        write_bytes(dir.file("c.ppm"), std::string("P6\n# comment\n1 1\n255\n") + "\x10\x20\x30");
        Image img = load_ppm(dir.file("c.ppm"));
        CHECK(img.at(1, 0, 0) == doctest::Approx(32.0f / 255.0f));
    }

    SUBCASE("truncated payload is a parse error") {
        write_bytes(dir.file("t.ppm"), std::string("P6\n2 2\n255\n") + "\xFF\xFF");
        CHECK_THROWS_AS(load_ppm(dir.file("t.ppm")), ParseError);
    }

    SUBCASE("wrong magic is a parse error") {
        write_bytes(dir.file("m.ppm"), "P3\n1 1\n255\n0 0 0\n");
        CHECK_THROWS_AS(load_ppm(dir.file("m.ppm")), ParseError);
    }
}

TEST_CASE("ppm round trip") {
    TempDir dir;
    Image img(5, 3);
    Rng rng = Rng::derive({55});
    for (float& v : img.pix) v = float(rng.uniform_index(256)) / 255.0f;
    save_ppm(img, dir.file("r.ppm"));
    Image back = load_ppm(dir.file("r.ppm"));
    CHECK(back.pix == img.pix);
}

TEST_CASE("save_pgm normalization") {
    TempDir dir;
    save_pgm({0.0f, 0.5f, 1.0f, 0.25f}, 2, 2, dir.file("a.pgm"), true);
    std::string bytes = read_bytes(dir.file("a.pgm"));
    CHECK(bytes.substr(0, 9) == "P5\n2 2\n25");
    std::string tail = bytes.substr(bytes.size() - 4);
    CHECK(std::uint8_t(tail[0]) == 0);
    CHECK(std::uint8_t(tail[2]) == 255);

    // flat input maps to zeros
    save_pgm({0.7f, 0.7f}, 1, 2, dir.file("b.pgm"), true);
    std::string flat = read_bytes(dir.file("b.pgm"));
    CHECK(std::uint8_t(flat[flat.size() - 1]) == 0);
    CHECK(std::uint8_t(flat[flat.size() - 2]) == 0);
}

TEST_CASE("build_manifest ordering and labels") {
    TempDir dir;
    Image img(2, 2, 0.5f);
    save_ppm(img, dir.file("b.ppm"));
    save_ppm(img, dir.file("a.ppm"));
    save_ppm(img, dir.file("c.ppm"));
    write_bytes(dir.file("notes.txt"), "ignored");

    SUBCASE("unlabeled, sorted") {
        DatasetManifest m = build_manifest(dir.path.string());
        REQUIRE(m.entries.size() == 3);
        CHECK(m.entries[0].path == "a.ppm");
        CHECK(m.entries[1].path == "b.ppm");
        CHECK(m.entries[2].path == "c.ppm");
        CHECK_FALSE(m.labeled());
    }

    SUBCASE("label join") {
        write_bytes(dir.file("labels.csv"), "a.ppm,0\nb.ppm,1\nc.ppm,0\n");
        DatasetManifest m = build_manifest(dir.path.string(), dir.file("labels.csv"));
        CHECK(m.labeled());
        CHECK(m.num_classes() == 2);
        CHECK(*m.entries[1].label == 1);
    }

    SUBCASE("missing file in csv") {
        write_bytes(dir.file("labels.csv"), "zz.ppm,0\n");
        CHECK_THROWS_AS(build_manifest(dir.path.string(), dir.file("labels.csv")),
                        ManifestError);
    }

    SUBCASE("non-contiguous labels rejected") {
        write_bytes(dir.file("labels.csv"), "a.ppm,0\nb.ppm,2\nc.ppm,0\n");
        CHECK_THROWS_AS(build_manifest(dir.path.string(), dir.file("labels.csv")),
                        ManifestError);
    }

    SUBCASE("empty dir gives empty manifest") {
        TempDir empty;
        DatasetManifest m = build_manifest(empty.path.string());
        CHECK(m.entries.empty());
    }

    SUBCASE("missing dir") {
        CHECK_THROWS_AS(build_manifest(dir.file("nope")), ManifestError);
    }
}

TEST_CASE("manifest csv emission") {
    TempDir dir;
    DatasetManifest m;
    m.root = dir.path.string();
    m.entries = {{"x.ppm", 1}, {"y.ppm", std::nullopt}};
    write_manifest_csv(m, dir.file("m.csv"));
    CHECK(read_bytes(dir.file("m.csv")) == "x.ppm,1\ny.ppm,\n");
}

TEST_CASE("checkpoint round trip is bitwise") {
    TempDir dir;
    Checkpoint ckpt;
    ckpt.method = "hybrid";
    ckpt.config_text = "method=hybrid\nepochs=3\n";
    Rng rng = Rng::derive({77});
    std::vector<float> vals(60);
    for (float& v : vals) v = rng.normal_float(2.0f);
    ckpt.tensors.push_back({"student.w", {5, 12}, vals});
    ckpt.tensors.push_back({"center", {8}, std::vector<float>(8, 0.25f)});

    std::string path = dir.file("c.ckpt");
    save_checkpoint(ckpt, path);
    Checkpoint back = load_checkpoint(path);
    CHECK(back.method == "hybrid");
    CHECK(back.config_text == ckpt.config_text);
    REQUIRE(back.tensors.size() == 2);
    CHECK(back.tensors[0].name == "student.w");
    CHECK(back.tensors[0].shape == Shape{5, 12});
    CHECK(back.tensors[0].values == vals);
    CHECK(back.require("center").values == ckpt.tensors[1].values);

    // writing the loaded checkpoint again reproduces identical bytes
    save_checkpoint(back, dir.file("c2.ckpt"));
    CHECK(read_bytes(dir.file("c2.ckpt")) == read_bytes(path));
}

TEST_CASE("checkpoint with no tensors is valid") {
    TempDir dir;
    Checkpoint ckpt;
    ckpt.method = "barlow";
    save_checkpoint(ckpt, dir.file("e.ckpt"));
    Checkpoint back = load_checkpoint(dir.file("e.ckpt"));
    CHECK(back.tensors.empty());
    CHECK(back.method == "barlow");
}

TEST_CASE("checkpoint corruption detection") {
    TempDir dir;
    Checkpoint ckpt;
    ckpt.method = "dino";
    ckpt.tensors.push_back({"t", {4}, {1, 2, 3, 4}});
    std::string path = dir.file("x.ckpt");
    save_checkpoint(ckpt, path);
    std::string bytes = read_bytes(path);

    SUBCASE("flipping a payload byte fails the CRC") {
        std::string bad = bytes;
        bad[bytes.size() / 2] = char(bad[bytes.size() / 2] ^ 0x40);
        write_bytes(path, bad);
        try {
            load_checkpoint(path);
            FAIL("expected checksum error");
        } catch (const CheckpointError& e) {
            CHECK(e.kind == CheckpointError::Kind::ChecksumMismatch);
        }
    }

    SUBCASE("bad magic") {
        std::string bad = bytes;
        bad[0] = 'X';
        write_bytes(path, bad);
        try {
            load_checkpoint(path);
            FAIL("expected magic error");
        } catch (const CheckpointError& e) {
            CHECK(e.kind == CheckpointError::Kind::BadMagic);
        }
    }

    SUBCASE("unknown version rejected") {
        std::string bad = bytes;
        bad[4] = 9;
        write_bytes(path, bad);
        try {
            load_checkpoint(path);
            FAIL("expected version error");
        } catch (const CheckpointError& e) {
            CHECK(e.kind == CheckpointError::Kind::BadVersion);
        }
    }

    SUBCASE("truncation rejected") {
        write_bytes(path, bytes.substr(0, 10));
        CHECK_THROWS_AS(load_checkpoint(path), CheckpointError);
    }
}

TEST_CASE("crc32 known vector") {
    const char* s = "123456789";
    CHECK(crc32(reinterpret_cast<const std::uint8_t*>(s), 9) == 0xCBF43926u);
}
