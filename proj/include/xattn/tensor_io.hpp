#ifndef XATTN_TENSOR_IO_HPP
#define XATTN_TENSOR_IO_HPP

#include <string>
#include <vector>

#include "xattn/schedule.hpp"
#include "xattn/tensor.hpp"

namespace xattn::io {

/// Binary tensor container (.ten), little-endian:
///   bytes 0-3  magic "XTEN"
///   u32        version (1)
///   u8         dtype: 0 = f32, 1 = i32, 2 = u8
///   u8         rank
///   u16        reserved (0)
///   u32[rank]  dims
///   payload    packed values
void write_tensor_f32(const std::string& path, const std::vector<float>& data,
                      const std::vector<uint32_t>& dims);
void write_tensor_i32(const std::string& path, const std::vector<int32_t>& data,
                      const std::vector<uint32_t>& dims);

struct TensorFile {
    uint8_t dtype = 0;
    std::vector<uint32_t> dims;
    std::vector<float> f32;
    std::vector<int32_t> i32;
    std::vector<uint8_t> u8;

    size_t element_count() const;
};

TensorFile read_tensor(const std::string& path);

/// Latent as a rank-3 [channels x height x width] f32 tensor.
void write_latent(const std::string& path, const LatentGrid& latent);
LatentGrid read_latent(const std::string& path);

/// Mask as a rank-2 u8 tensor; nonzero selects.
void write_mask(const std::string& path, const MaskGrid& mask);
MaskGrid read_mask(const std::string& path);

/// Inversion record container (.inv), little-endian:
///   bytes 0-3  magic "XINV"
///   u32        version (1)
///   u32        T (number of steps / noise maps)
///   u32        channels, height, width
///   u64        seed
///   u32        prompt length, followed by prompt bytes
///   f32[]      terminal latent x_T (C*H*W values)
///   f32[]      noise maps for t = 1..T, ascending, C*H*W values each
void write_inversion_record(const std::string& path,
                            const diffusion::InversionRecord& record);
diffusion::InversionRecord read_inversion_record(const std::string& path);

/// Content hash of a file, hex-encoded FNV-1a.
std::string file_hash_hex(const std::string& path);

} // namespace xattn::io

#endif // XATTN_TENSOR_IO_HPP
