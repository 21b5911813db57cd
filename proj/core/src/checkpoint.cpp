#include "mvp/checkpoint.hpp"

#include <zlib.h>

#include "mvp/byteio.hpp"
#include "mvp/config.hpp"
#include "mvp/errors.hpp"

namespace mvp {

namespace {

constexpr char kMagic[4] = {'M', 'V', 'P', 'C'};
constexpr std::uint32_t kVersion = 1;

std::uint32_t crc_of(const std::uint8_t* p, std::size_t n) {
    return static_cast<std::uint32_t>(crc32(0L, p, static_cast<uInt>(n)));
}

void write_tensor_values(ByteWriter& w, const Array& a) {
    for (std::size_t i = 0; i < a.size(); ++i) w.f64(a[i]);
}

Array read_tensor_values(ByteReader& r, Shape shape) {
    Array a(std::move(shape), 0.0);
    for (std::size_t i = 0; i < a.size(); ++i) a[i] = r.f64();
    return a;
}

}  // namespace

void save_checkpoint(const std::string& path, const ModelConfig& cfg, const ParamStore& params,
                     const TrainState* state) {
    ByteWriter w;
    w.bytes(kMagic, 4);
    w.u32(kVersion);
    w.str(model_config_to_json(cfg));
    w.u32(static_cast<std::uint32_t>(params.size()));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const auto& e = params.entry(i);
        w.str(e.name);
        w.u8(static_cast<std::uint8_t>(e.value.rank()));
        for (int d = 0; d < e.value.rank(); ++d) w.u32(static_cast<std::uint32_t>(e.value.dim(d)));
        write_tensor_values(w, e.value);
    }
    w.u8(state ? 1 : 0);
    if (state) {
        w.u64(state->adam_steps);
        w.u64(static_cast<std::uint64_t>(state->global_step));
        w.u32(static_cast<std::uint32_t>(state->epoch));
        w.u32(static_cast<std::uint32_t>(state->scene_cursor));
        w.f64(state->lr);
        for (std::size_t i = 0; i < params.size(); ++i) {
            const auto& e = params.entry(i);
            if (!e.m.same_shape(e.value) || !e.v.same_shape(e.value))
                throw UsageError("save_checkpoint: optimizer moments missing for '" + e.name + "'");
            write_tensor_values(w, e.m);
            write_tensor_values(w, e.v);
        }
    }
    w.u32(crc_of(w.data().data(), w.size()));
    write_file_bytes(path, w.data());
}

Checkpoint load_checkpoint(const std::string& path) {
    const auto bytes = read_file_bytes(path);
    if (bytes.size() < 8) throw IoError("checkpoint too small: " + path);
    {
        std::uint32_t stored = 0;
        for (int i = 0; i < 4; ++i)
            stored |= static_cast<std::uint32_t>(bytes[bytes.size() - 4 + static_cast<std::size_t>(i)]) << (8 * i);
        if (stored != crc_of(bytes.data(), bytes.size() - 4))
            throw IoError("checkpoint CRC mismatch: " + path);
    }
    ByteReader r(bytes.data(), bytes.size() - 4);
    char magic[4];
    r.bytes(magic, 4);
    if (std::memcmp(magic, kMagic, 4) != 0) throw IoError("not a checkpoint file: " + path);
    const std::uint32_t version = r.u32();
    if (version != kVersion)
        throw IoError("unsupported checkpoint version " + std::to_string(version));

    Checkpoint out;
    out.model = model_config_from_json(r.str());
    const std::uint32_t count = r.u32();
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::string name = r.str();
        const int rank = r.u8();
        if (rank < 1 || rank > 8) throw IoError("checkpoint tensor rank out of range");
        Shape shape(static_cast<std::size_t>(rank));
        for (int d = 0; d < rank; ++d) {
            const std::uint32_t ext = r.u32();
            if (ext == 0 || ext > (1u << 28)) throw IoError("checkpoint tensor extent out of range");
            shape[static_cast<std::size_t>(d)] = static_cast<int>(ext);
        }
        out.params.add(name, read_tensor_values(r, std::move(shape)));
    }
    const std::uint8_t has_state = r.u8();
    if (has_state > 1) throw IoError("checkpoint optimizer flag corrupt");
    if (has_state) {
        TrainState st;
        st.adam_steps = r.u64();
        st.global_step = static_cast<std::int64_t>(r.u64());
        st.epoch = static_cast<int>(r.u32());
        st.scene_cursor = static_cast<int>(r.u32());
        st.lr = r.f64();
        for (std::uint32_t i = 0; i < count; ++i) {
            auto& e = out.params.entry(i);
            e.m = read_tensor_values(r, e.value.shape());
            e.v = read_tensor_values(r, e.value.shape());
        }
        out.train_state = st;
    }
    if (r.remaining() != 0) throw IoError("checkpoint has trailing bytes: " + path);
    return out;
}

}  // namespace mvp
