#pragma once

#include <cstdint>
#include <filesystem>

#include "xfrl/networks.hpp"

namespace xfrl::ckpt {

inline constexpr char kMagic[4] = {'X', 'F', 'R', 'L'};
inline constexpr std::uint16_t kVersion = 1;

// Layout: magic, u16 version, architecture/head/input header, then one record
// per parameter (layer index, role tag, shape, raw float64 values, little
// endian), closed by a CRC32 of everything before it.
void save_checkpoint(const net::NetworkModel& m, const std::filesystem::path& path);

// Fails with distinct diagnostics for bad magic, version mismatch, truncation
// and CRC mismatch. A loaded model reproduces forward outputs bit-exactly.
net::NetworkModel load_checkpoint(const std::filesystem::path& path);

std::uint32_t crc32(const unsigned char* data, std::size_t len);

}  // namespace xfrl::ckpt
