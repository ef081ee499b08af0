#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dcorr/core/types.hpp"

namespace dcorr {

// DFL1 layout: "DFL1", u32 H, u32 W, then H*W*2 float32 (dx, dy) row-major,
// everything little-endian.
std::vector<uint8_t> encode_flow(const FlowField& flow);
FlowField decode_flow(const std::vector<uint8_t>& bytes);

void write_flow(const FlowField& flow, const std::filesystem::path& path);
FlowField read_flow(const std::filesystem::path& path);

}  // namespace dcorr
