#include "dcorr/core/flow_io.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "dcorr/core/error.hpp"

namespace dcorr {
namespace {

constexpr std::array<uint8_t, 4> kMagic = {'D', 'F', 'L', '1'};
constexpr size_t kHeaderBytes = 12;

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

uint32_t get_u32(const uint8_t* p) {
  return uint32_t(p[0]) | uint32_t(p[1]) << 8 | uint32_t(p[2]) << 16 | uint32_t(p[3]) << 24;
}

}  // namespace

std::vector<uint8_t> encode_flow(const FlowField& flow) {
  if (flow.data.dim() != 4 || flow.data.size(0) != 1 || flow.data.size(1) != 2) {
    throw ArgumentError("encode_flow: expected a single flow [1,2,H,W]");
  }
  const auto h = static_cast<uint32_t>(flow.height());
  const auto w = static_cast<uint32_t>(flow.width());
  // [H, W, 2] so (dx, dy) are interleaved per pixel.
  auto hwc = flow.data[0].detach().to(torch::kCPU, torch::kFloat32).permute({1, 2, 0}).contiguous();
  const float* values = hwc.data_ptr<float>();

  std::vector<uint8_t> out;
  out.reserve(kHeaderBytes + size_t(h) * w * 2 * 4);
  out.insert(out.end(), kMagic.begin(), kMagic.end());
  put_u32(out, h);
  put_u32(out, w);
  for (size_t i = 0; i < size_t(h) * w * 2; ++i) put_u32(out, std::bit_cast<uint32_t>(values[i]));
  return out;
}

FlowField decode_flow(const std::vector<uint8_t>& bytes) {
  if (bytes.size() < kHeaderBytes) {
    throw FormatError("DFL1: truncated header (" + std::to_string(bytes.size()) + " bytes)");
  }
  if (!std::equal(kMagic.begin(), kMagic.end(), bytes.begin())) {
    throw FormatError("DFL1: bad magic");
  }
  const uint32_t h = get_u32(bytes.data() + 4);
  const uint32_t w = get_u32(bytes.data() + 8);
  const size_t count = size_t(h) * w * 2;
  const size_t payload = bytes.size() - kHeaderBytes;
  if (payload != count * 4) {
    throw FormatError("DFL1: payload holds " + std::to_string(payload / 4) + " floats, header " +
                      std::to_string(h) + "x" + std::to_string(w) + " requires " +
                      std::to_string(count) + (payload < count * 4 ? " (truncated)" : ""));
  }
  auto hwc = torch::empty({int64_t(h), int64_t(w), 2}, torch::kFloat32);
  float* values = hwc.data_ptr<float>();
  for (size_t i = 0; i < count; ++i) {
    values[i] = std::bit_cast<float>(get_u32(bytes.data() + kHeaderBytes + 4 * i));
  }
  return FlowField{hwc.permute({2, 0, 1}).unsqueeze(0).contiguous(), FlowResolution::Full};
}

void write_flow(const FlowField& flow, const std::filesystem::path& path) {
  const auto bytes = encode_flow(flow);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("write_flow: cannot open " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
  if (!out) throw DataError("write_flow: write failed for " + path.string());
}

FlowField read_flow(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("read_flow: cannot open " + path.string());
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_flow(bytes);
}

}  // namespace dcorr
