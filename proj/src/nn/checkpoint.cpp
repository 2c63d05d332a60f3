#include "qunet/nn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>

namespace qunet::nn {

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

constexpr char kMagic[8] = {'Q', 'U', 'N', 'E', 'T', 'C', 'K', 'P'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint8_t kFloat32 = 1;
constexpr std::uint8_t kFloat64 = 2;

template <typename V>
void put(std::ostream& out, V v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(V));
}

template <typename V>
V get(std::istream& in, const std::filesystem::path& path) {
    V v{};
    if (!in.read(reinterpret_cast<char*>(&v), sizeof(V))) throw LoadError("truncated checkpoint: " + path.string());
    return v;
}

struct RawArray {
    std::uint8_t dtype = 0;
    std::vector<std::uint64_t> dims;
    std::vector<char> bytes;
};

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const SegModel& model, nlohmann::json metadata) {
    if (!metadata.is_object()) metadata = nlohmann::json::object();
    metadata["model"] = model.config();
    metadata["seed"] = model.seed();
    const std::string meta = metadata.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw LoadError("cannot write checkpoint: " + path.string());
    out.write(kMagic, sizeof(kMagic));
    put<std::uint32_t>(out, kVersion);
    put<std::uint64_t>(out, meta.size());
    out.write(meta.data(), static_cast<std::streamsize>(meta.size()));

    std::uint32_t count = 0;
    model.for_each_param([&](const Param<float>&) { ++count; });
    put<std::uint32_t>(out, count);
    model.for_each_param([&](const Param<float>& p) {
        put<std::uint32_t>(out, static_cast<std::uint32_t>(p.name.size()));
        out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
        put<std::uint8_t>(out, kFloat32);
        put<std::uint8_t>(out, p.trainable ? 1 : 0);
        put<std::uint32_t>(out, static_cast<std::uint32_t>(p.shape.size()));
        for (int d : p.shape) put<std::uint64_t>(out, static_cast<std::uint64_t>(d));
        out.write(reinterpret_cast<const char*>(p.value.data()), static_cast<std::streamsize>(p.value.size() * sizeof(float)));
    });
    if (!out) throw LoadError("failed writing checkpoint: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw LoadError("cannot open checkpoint: " + path.string());
    char magic[8];
    if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw LoadError("not a checkpoint file: " + path.string());
    }
    if (get<std::uint32_t>(in, path) != kVersion) throw LoadError("unsupported checkpoint version: " + path.string());
    const auto meta_len = get<std::uint64_t>(in, path);
    std::string meta(meta_len, '\0');
    if (!in.read(meta.data(), static_cast<std::streamsize>(meta_len))) throw LoadError("truncated checkpoint: " + path.string());
    nlohmann::json metadata;
    try {
        metadata = nlohmann::json::parse(meta);
    } catch (const nlohmann::json::exception& e) {
        throw LoadError("bad checkpoint metadata in " + path.string() + ": " + e.what());
    }

    std::map<std::string, RawArray> arrays;
    const auto count = get<std::uint32_t>(in, path);
    for (std::uint32_t a = 0; a < count; ++a) {
        const auto name_len = get<std::uint32_t>(in, path);
        std::string name(name_len, '\0');
        if (!in.read(name.data(), name_len)) throw LoadError("truncated checkpoint: " + path.string());
        RawArray raw;
        raw.dtype = get<std::uint8_t>(in, path);
        get<std::uint8_t>(in, path);
        const auto ndim = get<std::uint32_t>(in, path);
        std::uint64_t elems = 1;
        for (std::uint32_t d = 0; d < ndim; ++d) {
            raw.dims.push_back(get<std::uint64_t>(in, path));
            elems *= raw.dims.back();
        }
        const std::size_t width = raw.dtype == kFloat64 ? 8 : 4;
        if (raw.dtype != kFloat32 && raw.dtype != kFloat64) throw LoadError("unknown dtype in checkpoint: " + path.string());
        raw.bytes.resize(elems * width);
        if (!in.read(raw.bytes.data(), static_cast<std::streamsize>(raw.bytes.size()))) {
            throw LoadError("truncated checkpoint: " + path.string());
        }
        arrays.emplace(std::move(name), std::move(raw));
    }

    const ModelConfig config = metadata.at("model").get<ModelConfig>();
    const auto seed = metadata.at("seed").get<std::uint64_t>();
    Checkpoint ck{SegModel(config, seed), metadata};
    ck.model.for_each_param([&](Param<float>& p) {
        const auto it = arrays.find(p.name);
        if (it == arrays.end()) throw LoadError("checkpoint " + path.string() + " lacks array " + p.name);
        const auto& raw = it->second;
        bool same = raw.dims.size() == p.shape.size();
        for (std::size_t d = 0; same && d < p.shape.size(); ++d) same = raw.dims[d] == static_cast<std::uint64_t>(p.shape[d]);
        if (!same) throw LoadError("checkpoint " + path.string() + ": shape mismatch for " + p.name);
        if (raw.dtype == kFloat32) {
            std::memcpy(p.value.data(), raw.bytes.data(), raw.bytes.size());
        } else {
            for (std::size_t k = 0; k < p.value.size(); ++k) {
                double v;
                std::memcpy(&v, raw.bytes.data() + k * 8, 8);
                p.value[k] = static_cast<float>(v);
            }
        }
    });
    return ck;
}

}  // namespace qunet::nn
