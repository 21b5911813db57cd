#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include "mvp/byteio.hpp"
#include "mvp/dataset_io.hpp"
#include "mvp/errors.hpp"
#include "mvp/scene.hpp"

using namespace mvp;

namespace {

struct TempFile {
    std::string path;
    explicit TempFile(const std::string& name)
        : path((std::filesystem::temp_directory_path() / name).string()) {}
    ~TempFile() { std::remove(path.c_str()); }
};

std::vector<Scene> sample_scenes(int n) {
    std::vector<Scene> scenes;
    SceneConfig cfg;
    // 32 px keeps actors separable so two-person scenes still generate,
    // exercising person counts above one in the format.
    cfg.height = 32;
    cfg.width = 32;
    cfg.max_persons = 2;
    for (int i = 0; i < n; ++i) scenes.push_back(generate_scene(static_cast<std::uint64_t>(i), cfg));
    return scenes;
}

void check_equal(const Scene& a, const Scene& b) {
    REQUIRE(a.gt_poses.same_shape(b.gt_poses));
    for (std::size_t i = 0; i < a.gt_poses.size(); ++i) REQUIRE(a.gt_poses[i] == b.gt_poses[i]);
    REQUIRE(a.cameras.size() == b.cameras.size());
    for (std::size_t v = 0; v < a.cameras.size(); ++v) {
        REQUIRE(a.cameras[v].fx == b.cameras[v].fx);
        REQUIRE(a.cameras[v].fy == b.cameras[v].fy);
        REQUIRE(a.cameras[v].cx == b.cameras[v].cx);
        REQUIRE(a.cameras[v].cy == b.cameras[v].cy);
        REQUIRE((a.cameras[v].R - b.cameras[v].R).norm() == 0.0);
        REQUIRE((a.cameras[v].t - b.cameras[v].t).norm() == 0.0);
    }
    REQUIRE(a.features.size() == b.features.size());
    for (std::size_t v = 0; v < a.features.size(); ++v) {
        REQUIRE(a.features[v].same_shape(b.features[v]));
        for (std::size_t i = 0; i < a.features[v].size(); ++i)
            REQUIRE(a.features[v][i] == b.features[v][i]);
    }
    REQUIRE(a.workspace.lo == b.workspace.lo);
    REQUIRE(a.workspace.hi == b.workspace.hi);
}

}  // namespace

TEST_CASE("dataset round trip is bit exact") {
    TempFile f("roundtrip.mvpd");
    const auto scenes = sample_scenes(3);
    write_dataset(scenes, f.path);
    const auto back = read_dataset(f.path);
    REQUIRE(back.size() == scenes.size());
    for (std::size_t i = 0; i < scenes.size(); ++i) check_equal(scenes[i], back[i]);
}

TEST_CASE("file starts with the expected magic") {
    TempFile f("magic.mvpd");
    write_dataset(sample_scenes(1), f.path);
    const auto bytes = read_file_bytes(f.path);
    REQUIRE(bytes.size() > 4);
    CHECK(bytes[0] == 'M');
    CHECK(bytes[1] == 'V');
    CHECK(bytes[2] == 'P');
    CHECK(bytes[3] == 'D');
}

TEST_CASE("corruption is detected") {
    TempFile f("corrupt.mvpd");
    write_dataset(sample_scenes(1), f.path);
    auto bytes = read_file_bytes(f.path);

    SUBCASE("flipped payload byte fails the CRC") {
        bytes[bytes.size() / 2] ^= 0x40;
        write_file_bytes(f.path, bytes);
        CHECK_THROWS_AS(read_dataset(f.path), IoError);
    }
    SUBCASE("truncation") {
        bytes.resize(bytes.size() - 7);
        write_file_bytes(f.path, bytes);
        CHECK_THROWS_AS(read_dataset(f.path), IoError);
    }
    SUBCASE("wrong magic") {
        bytes[0] = 'X';
        write_file_bytes(f.path, bytes);
        CHECK_THROWS_AS(read_dataset(f.path), IoError);
    }
    SUBCASE("trailing garbage") {
        bytes.push_back(0);
        write_file_bytes(f.path, bytes);
        CHECK_THROWS_AS(read_dataset(f.path), IoError);
    }
    SUBCASE("missing file") { CHECK_THROWS_AS(read_dataset("/nonexistent/x.mvpd"), IoError); }
}

TEST_CASE("byte writer/reader round trip every primitive") {
    ByteWriter w;
    w.u8(0xAB);
    w.u32(0xDEADBEEF);
    w.u64(0x0123456789ABCDEFull);
    w.f32(1.5f);
    w.f64(-0.1);
    w.str("hello");
    ByteReader r(w.data().data(), w.size());
    CHECK(r.u8() == 0xAB);
    CHECK(r.u32() == 0xDEADBEEF);
    CHECK(r.u64() == 0x0123456789ABCDEFull);
    CHECK(r.f32() == 1.5f);
    CHECK(r.f64() == -0.1);
    CHECK(r.str() == "hello");
    CHECK(r.remaining() == 0);
    CHECK_THROWS_AS(r.u8(), IoError);
}

TEST_CASE("little-endian layout is pinned") {
    ByteWriter w;
    w.u32(0x01020304);
    CHECK(w.data()[0] == 0x04);
    CHECK(w.data()[1] == 0x03);
    CHECK(w.data()[2] == 0x02);
    CHECK(w.data()[3] == 0x01);
}
