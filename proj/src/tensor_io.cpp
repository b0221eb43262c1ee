#include "xattn/tensor_io.hpp"

#include <cstring>
#include <fstream>

#include "xattn/rng.hpp"

namespace xattn::io {

namespace {

constexpr char kTensorMagic[4] = {'X', 'T', 'E', 'N'};
constexpr char kInversionMagic[4] = {'X', 'I', 'N', 'V'};

void put_u32(std::ostream& out, uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v),
                          static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& out, uint64_t v) {
    put_u32(out, static_cast<uint32_t>(v));
    put_u32(out, static_cast<uint32_t>(v >> 32));
}

uint32_t get_u32(std::istream& in, const std::string& path) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4))
        throw IoError("truncated file '" + path + "'");
    return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
           (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

uint64_t get_u64(std::istream& in, const std::string& path) {
    const uint64_t lo = get_u32(in, path);
    const uint64_t hi = get_u32(in, path);
    return lo | (hi << 32);
}

void put_f32_array(std::ostream& out, const float* data, size_t n) {
    for (size_t i = 0; i < n; ++i) {
        uint32_t bits;
        std::memcpy(&bits, &data[i], 4);
        put_u32(out, bits);
    }
}

void get_f32_array(std::istream& in, float* data, size_t n, const std::string& path) {
    for (size_t i = 0; i < n; ++i) {
        const uint32_t bits = get_u32(in, path);
        std::memcpy(&data[i], &bits, 4);
    }
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw IoError("cannot open '" + path + "' for writing");
    return out;
}

std::ifstream open_in(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open '" + path + "'");
    return in;
}

void write_tensor_header(std::ostream& out, uint8_t dtype,
                         const std::vector<uint32_t>& dims) {
    out.write(kTensorMagic, 4);
    put_u32(out, 1);
    const uint8_t rank = static_cast<uint8_t>(dims.size());
    out.put(static_cast<char>(dtype));
    out.put(static_cast<char>(rank));
    out.put(0);
    out.put(0);
    for (uint32_t d : dims)
        put_u32(out, d);
}

size_t checked_count(const std::vector<uint32_t>& dims, size_t have,
                     const std::string& what) {
    size_t n = 1;
    for (uint32_t d : dims)
        n *= d;
    if (n != have)
        throw InvalidShapeError(what + ": dims imply " + std::to_string(n) +
                                " elements, got " + std::to_string(have));
    return n;
}

} // namespace

void write_tensor_f32(const std::string& path, const std::vector<float>& data,
                      const std::vector<uint32_t>& dims) {
    checked_count(dims, data.size(), "write_tensor_f32");
    auto out = open_out(path);
    write_tensor_header(out, 0, dims);
    put_f32_array(out, data.data(), data.size());
    if (!out)
        throw IoError("short write to '" + path + "'");
}

void write_tensor_i32(const std::string& path, const std::vector<int32_t>& data,
                      const std::vector<uint32_t>& dims) {
    checked_count(dims, data.size(), "write_tensor_i32");
    auto out = open_out(path);
    write_tensor_header(out, 1, dims);
    for (int32_t v : data)
        put_u32(out, static_cast<uint32_t>(v));
    if (!out)
        throw IoError("short write to '" + path + "'");
}

size_t TensorFile::element_count() const {
    size_t n = 1;
    for (uint32_t d : dims)
        n *= d;
    return n;
}

TensorFile read_tensor(const std::string& path) {
    auto in = open_in(path);
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, kTensorMagic, 4) != 0)
        throw IoError("'" + path + "' is not a tensor container");
    const uint32_t version = get_u32(in, path);
    if (version != 1)
        throw IoError("unsupported tensor container version in '" + path + "'");
    TensorFile t;
    t.dtype = static_cast<uint8_t>(in.get());
    const int rank = in.get();
    in.get();
    in.get();
    if (rank < 0 || rank > 8)
        throw IoError("bad tensor rank in '" + path + "'");
    t.dims.resize(rank);
    for (int i = 0; i < rank; ++i)
        t.dims[i] = get_u32(in, path);
    const size_t n = t.element_count();
    if (t.dtype == 0) {
        t.f32.resize(n);
        get_f32_array(in, t.f32.data(), n, path);
    } else if (t.dtype == 1) {
        t.i32.resize(n);
        for (size_t i = 0; i < n; ++i)
            t.i32[i] = static_cast<int32_t>(get_u32(in, path));
    } else if (t.dtype == 2) {
        t.u8.resize(n);
        if (!in.read(reinterpret_cast<char*>(t.u8.data()), static_cast<std::streamsize>(n)))
            throw IoError("truncated file '" + path + "'");
    } else {
        throw IoError("unknown dtype in '" + path + "'");
    }
    return t;
}

void write_latent(const std::string& path, const LatentGrid& latent) {
    write_tensor_f32(path, latent.data,
                     {static_cast<uint32_t>(latent.channels),
                      static_cast<uint32_t>(latent.height),
                      static_cast<uint32_t>(latent.width)});
}

LatentGrid read_latent(const std::string& path) {
    const TensorFile t = read_tensor(path);
    if (t.dtype != 0 || t.dims.size() != 3)
        throw IoError("'" + path + "' is not a rank-3 f32 latent tensor");
    LatentGrid latent(static_cast<int>(t.dims[0]), static_cast<int>(t.dims[1]),
                      static_cast<int>(t.dims[2]));
    latent.data = t.f32;
    return latent;
}

void write_mask(const std::string& path, const MaskGrid& mask) {
    auto out = open_out(path);
    write_tensor_header(out, 2,
                        {static_cast<uint32_t>(mask.height),
                         static_cast<uint32_t>(mask.width)});
    out.write(reinterpret_cast<const char*>(mask.data.data()),
              static_cast<std::streamsize>(mask.data.size()));
    if (!out)
        throw IoError("short write to '" + path + "'");
}

MaskGrid read_mask(const std::string& path) {
    const TensorFile t = read_tensor(path);
    if (t.dtype != 2 || t.dims.size() != 2)
        throw IoError("'" + path + "' is not a rank-2 u8 mask tensor");
    MaskGrid mask(static_cast<int>(t.dims[0]), static_cast<int>(t.dims[1]));
    for (size_t i = 0; i < mask.data.size(); ++i)
        mask.data[i] = t.u8[i] ? 1 : 0;
    return mask;
}

void write_inversion_record(const std::string& path,
                            const diffusion::InversionRecord& record) {
    auto out = open_out(path);
    out.write(kInversionMagic, 4);
    put_u32(out, 1);
    const LatentGrid& x = record.terminal_latent;
    put_u32(out, static_cast<uint32_t>(record.noise_maps.size()));
    put_u32(out, static_cast<uint32_t>(x.channels));
    put_u32(out, static_cast<uint32_t>(x.height));
    put_u32(out, static_cast<uint32_t>(x.width));
    put_u64(out, record.seed);
    put_u32(out, static_cast<uint32_t>(record.prompt.size()));
    out.write(record.prompt.data(), static_cast<std::streamsize>(record.prompt.size()));
    put_f32_array(out, x.data.data(), x.data.size());
    for (const LatentGrid& z : record.noise_maps) {
        z.require_same_shape(x, "write_inversion_record");
        put_f32_array(out, z.data.data(), z.data.size());
    }
    if (!out)
        throw IoError("short write to '" + path + "'");
}

diffusion::InversionRecord read_inversion_record(const std::string& path) {
    auto in = open_in(path);
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, kInversionMagic, 4) != 0)
        throw IoError("'" + path + "' is not an inversion record");
    if (get_u32(in, path) != 1)
        throw IoError("unsupported inversion record version in '" + path + "'");
    const uint32_t T = get_u32(in, path);
    const int c = static_cast<int>(get_u32(in, path));
    const int h = static_cast<int>(get_u32(in, path));
    const int w = static_cast<int>(get_u32(in, path));
    diffusion::InversionRecord record;
    record.seed = get_u64(in, path);
    const uint32_t plen = get_u32(in, path);
    record.prompt.resize(plen);
    if (plen && !in.read(record.prompt.data(), plen))
        throw IoError("truncated file '" + path + "'");
    record.terminal_latent = LatentGrid(c, h, w);
    get_f32_array(in, record.terminal_latent.data.data(),
                  record.terminal_latent.data.size(), path);
    record.terminal_latent.timestep_index = static_cast<int>(T);
    record.noise_maps.assign(T, LatentGrid(c, h, w));
    for (uint32_t t = 0; t < T; ++t)
        get_f32_array(in, record.noise_maps[t].data.data(),
                      record.noise_maps[t].data.size(), path);
    return record;
}

std::string file_hash_hex(const std::string& path) {
    auto in = open_in(path);
    uint64_t h = 0xcbf29ce484222325ull;
    char buf[4096];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
        h = fnv1a64(buf, static_cast<size_t>(in.gcount()), h);
        if (!in)
            break;
    }
    char hex[17];
    std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(h));
    return std::string(hex);
}

} // namespace xattn::io
