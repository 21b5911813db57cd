#include "mvp/dataset_io.hpp"

#include <zlib.h>

#include "mvp/byteio.hpp"
#include "mvp/errors.hpp"

namespace mvp {

namespace {

constexpr char kMagic[4] = {'M', 'V', 'P', 'D'};

std::uint32_t crc_of(const std::uint8_t* p, std::size_t n) {
    return static_cast<std::uint32_t>(crc32(0L, p, static_cast<uInt>(n)));
}

void write_scene_payload(ByteWriter& w, const Scene& s) {
    const int v = s.views();
    const int n = s.persons();
    const int j = s.joints();
    if (v < 1) throw IoError("write_dataset: scene has no cameras");
    if (static_cast<int>(s.features.size()) != v) throw IoError("write_dataset: feature/camera count mismatch");
    const Shape& fs = s.features[0].shape();
    if (fs.size() != 3) throw IoError("write_dataset: features must be [C,H,W]");
    for (const auto& f : s.features)
        if (f.shape() != fs) throw IoError("write_dataset: per-view feature shapes differ");

    w.u32(static_cast<std::uint32_t>(v));
    w.u32(static_cast<std::uint32_t>(n));
    w.u32(static_cast<std::uint32_t>(j));
    w.u32(static_cast<std::uint32_t>(fs[0]));
    w.u32(static_cast<std::uint32_t>(fs[1]));
    w.u32(static_cast<std::uint32_t>(fs[2]));
    for (int a = 0; a < 3; ++a) w.f64(s.workspace.lo[a]);
    for (int a = 0; a < 3; ++a) w.f64(s.workspace.hi[a]);
    for (const auto& cam : s.cameras) {
        w.f64(cam.fx);
        w.f64(cam.fy);
        w.f64(cam.cx);
        w.f64(cam.cy);
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) w.f64(cam.R(r, c));
        for (int a = 0; a < 3; ++a) w.f64(cam.t[a]);
        w.u32(static_cast<std::uint32_t>(cam.width));
        w.u32(static_cast<std::uint32_t>(cam.height));
    }
    for (std::size_t i = 0; i < s.gt_poses.size(); ++i) w.f64(s.gt_poses[i]);
    for (const auto& f : s.features)
        for (std::size_t i = 0; i < f.size(); ++i) w.f32(static_cast<float>(f[i]));
}

Scene read_scene_payload(ByteReader& r) {
    Scene s;
    const auto v = static_cast<int>(r.u32());
    const auto n = static_cast<int>(r.u32());
    const auto j = static_cast<int>(r.u32());
    const auto c = static_cast<int>(r.u32());
    const auto h = static_cast<int>(r.u32());
    const auto w = static_cast<int>(r.u32());
    if (v < 1 || n < 1 || j < 1 || c < 1 || h < 1 || w < 1) throw IoError("dataset: nonsensical scene header");
    for (int a = 0; a < 3; ++a) s.workspace.lo[a] = r.f64();
    for (int a = 0; a < 3; ++a) s.workspace.hi[a] = r.f64();
    s.workspace.validate();
    s.cameras.resize(static_cast<std::size_t>(v));
    for (auto& cam : s.cameras) {
        cam.fx = r.f64();
        cam.fy = r.f64();
        cam.cx = r.f64();
        cam.cy = r.f64();
        for (int rr = 0; rr < 3; ++rr)
            for (int cc = 0; cc < 3; ++cc) cam.R(rr, cc) = r.f64();
        for (int a = 0; a < 3; ++a) cam.t[a] = r.f64();
        cam.width = static_cast<int>(r.u32());
        cam.height = static_cast<int>(r.u32());
        cam.validate();
    }
    s.gt_poses = Array(Shape{n, j, 3}, 0.0);
    for (std::size_t i = 0; i < s.gt_poses.size(); ++i) s.gt_poses[i] = r.f64();
    s.features.reserve(static_cast<std::size_t>(v));
    for (int view = 0; view < v; ++view) {
        Array f(Shape{c, h, w}, 0.0);
        for (std::size_t i = 0; i < f.size(); ++i) f[i] = static_cast<double>(r.f32());
        s.features.push_back(std::move(f));
    }
    return s;
}

}  // namespace

void write_dataset(const std::vector<Scene>& scenes, const std::string& path) {
    ByteWriter out;
    out.bytes(kMagic, 4);
    out.u32(kDatasetVersion);
    out.u32(static_cast<std::uint32_t>(scenes.size()));
    for (const auto& s : scenes) {
        ByteWriter payload;
        write_scene_payload(payload, s);
        out.u32(static_cast<std::uint32_t>(payload.size()));
        out.bytes(payload.data().data(), payload.size());
        out.u32(crc_of(payload.data().data(), payload.size()));
    }
    write_file_bytes(path, out.data());
}

std::vector<Scene> read_dataset(const std::string& path) {
    const auto bytes = read_file_bytes(path);
    ByteReader r(bytes.data(), bytes.size());
    char magic[4];
    r.bytes(magic, 4);
    if (std::memcmp(magic, kMagic, 4) != 0) throw IoError(path + ": not a dataset file (bad magic)");
    const std::uint32_t version = r.u32();
    if (version != kDatasetVersion)
        throw IoError(path + ": unsupported dataset version " + std::to_string(version));
    const std::uint32_t count = r.u32();
    std::vector<Scene> scenes;
    scenes.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint32_t len = r.u32();
        if (r.remaining() < len + 4u) throw IoError(path + ": truncated scene record");
        const std::uint8_t* payload = r.cursor();
        ByteReader sr(payload, len);
        r.skip(len);
        const std::uint32_t stored = r.u32();
        if (crc_of(payload, len) != stored)
            throw IoError(path + ": checksum failure in scene " + std::to_string(i));
        scenes.push_back(read_scene_payload(sr));
        if (sr.remaining() != 0) throw IoError(path + ": trailing bytes in scene " + std::to_string(i));
    }
    if (r.remaining() != 0) throw IoError(path + ": trailing bytes after last scene");
    return scenes;
}

}  // namespace mvp
