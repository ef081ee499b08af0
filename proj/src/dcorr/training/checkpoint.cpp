#include "dcorr/training/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "dcorr/core/error.hpp"

namespace dcorr {
namespace fs = std::filesystem;
using nlohmann::json;

static_assert(std::endian::native == std::endian::little, "checkpoint payloads are stored little-endian");

namespace {

constexpr char kMagic[4] = {'D', 'C', 'K', '1'};

std::string dtype_name(torch::ScalarType t) {
  switch (t) {
    case torch::kFloat32: return "f32";
    case torch::kFloat64: return "f64";
    case torch::kInt64: return "i64";
    default: throw ArgumentError("checkpoint: unsupported tensor dtype");
  }
}

torch::ScalarType dtype_from(const std::string& s) {
  if (s == "f32") return torch::kFloat32;
  if (s == "f64") return torch::kFloat64;
  if (s == "i64") return torch::kInt64;
  throw FormatError("checkpoint: unknown dtype '" + s + "'");
}

std::vector<std::pair<std::string, torch::Tensor>> named_state(const CorrespondenceModel& model) {
  std::vector<std::pair<std::string, torch::Tensor>> out;
  for (const auto& item : model.encoder()->named_parameters()) out.emplace_back(item.key(), item.value());
  for (const auto& item : model.encoder()->named_buffers()) out.emplace_back(item.key(), item.value());
  return out;
}

}  // namespace

std::string encode_checkpoint(const Checkpoint& c) {
  json table = json::array();
  std::string payload;
  for (const auto& [name, tensor] : c.tensors) {
    auto t = tensor.detach().contiguous().cpu();
    const size_t nbytes = size_t(t.numel()) * size_t(t.element_size());
    table.push_back({{"name", name},
                     {"dtype", dtype_name(t.scalar_type())},
                     {"shape", t.sizes().vec()},
                     {"offset", payload.size()},
                     {"nbytes", nbytes}});
    payload.append(static_cast<const char*>(t.data_ptr()), nbytes);
  }
  json header = {{"config", config_to_json(c.config)},
                 {"config_hash", c.config_hash},
                 {"step", c.step},
                 {"tensors", table},
                 {"optimizer_steps", c.optimizer_steps}};
  const std::string text = header.dump();
  const auto len = static_cast<uint32_t>(text.size());
  std::string out(kMagic, 4);
  char lenbuf[4];
  std::memcpy(lenbuf, &len, 4);
  out.append(lenbuf, 4);
  out += text;
  out += payload;
  return out;
}

Checkpoint decode_checkpoint(const std::string& bytes) {
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw FormatError("checkpoint: bad magic (expected DCK1)");
  }
  uint32_t len = 0;
  std::memcpy(&len, bytes.data() + 4, 4);
  if (bytes.size() < 8 + size_t(len)) throw FormatError("checkpoint: truncated header");
  json header;
  try {
    header = json::parse(bytes.substr(8, len));
  } catch (const json::exception& e) {
    throw FormatError(std::string("checkpoint: malformed header: ") + e.what());
  }
  const size_t base = 8 + size_t(len);
  Checkpoint c;
  try {
    c.config = config_from_json(header.at("config"));
    c.config_hash = header.at("config_hash").get<std::string>();
    c.step = header.at("step").get<int64_t>();
    c.optimizer_steps = header.at("optimizer_steps").get<std::map<std::string, int64_t>>();
    for (const auto& entry : header.at("tensors")) {
      const auto dtype = dtype_from(entry.at("dtype").get<std::string>());
      const auto shape = entry.at("shape").get<std::vector<int64_t>>();
      const auto offset = entry.at("offset").get<size_t>();
      const auto nbytes = entry.at("nbytes").get<size_t>();
      auto t = torch::empty(shape, torch::TensorOptions().dtype(dtype));
      if (size_t(t.numel()) * size_t(t.element_size()) != nbytes) {
        throw FormatError("checkpoint: tensor size mismatch for " + entry.at("name").get<std::string>());
      }
      if (base + offset + nbytes > bytes.size()) throw FormatError("checkpoint: truncated payload");
      std::memcpy(t.data_ptr(), bytes.data() + base + offset, nbytes);
      c.tensors.emplace_back(entry.at("name").get<std::string>(), t);
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("checkpoint: malformed header: ") + e.what());
  }
  return c;
}

void write_checkpoint(const Checkpoint& c, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const auto tmp = fs::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write checkpoint " + path.string());
    const auto bytes = encode_checkpoint(c);
    out.write(bytes.data(), std::streamsize(bytes.size()));
    if (!out) throw DataError("short write on checkpoint " + path.string());
  }
  fs::rename(tmp, path);
}

Checkpoint read_checkpoint(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return decode_checkpoint(ss.str());
}

Checkpoint capture_checkpoint(const CorrespondenceModel& model, const torch::optim::AdamW* optimizer,
                              int64_t step) {
  Checkpoint c;
  c.config = model.config();
  c.config_hash = config_hash(model.config());
  c.step = step;
  const auto params = named_state(model);
  for (const auto& [name, t] : params) c.tensors.emplace_back("encoder/" + name, t.detach().clone());
  if (optimizer) {
    const auto& state = optimizer->state();
    for (const auto& [name, t] : params) {
      auto it = state.find(t.unsafeGetTensorImpl());
      if (it == state.end()) continue;
      const auto& s = static_cast<const torch::optim::AdamWParamState&>(*it->second);
      c.optimizer_steps[name] = s.step();
      c.tensors.emplace_back("adamw/" + name + "/exp_avg", s.exp_avg().detach().clone());
      c.tensors.emplace_back("adamw/" + name + "/exp_avg_sq", s.exp_avg_sq().detach().clone());
    }
  }
  return c;
}

namespace {

const torch::Tensor& find_tensor(const Checkpoint& c, const std::string& name) {
  for (const auto& [n, t] : c.tensors) {
    if (n == name) return t;
  }
  throw FormatError("checkpoint: missing tensor " + name);
}

}  // namespace

void restore_weights(const Checkpoint& c, CorrespondenceModel& model) {
  torch::NoGradGuard no_grad;
  for (auto& [name, t] : named_state(model)) {
    const auto& src = find_tensor(c, "encoder/" + name);
    if (src.sizes() != t.sizes()) throw FormatError("checkpoint: shape mismatch for " + name);
    t.copy_(src);
  }
}

void restore_optimizer(const Checkpoint& c, const CorrespondenceModel& model, torch::optim::AdamW& optimizer) {
  auto& state = optimizer.state();
  state.clear();
  for (const auto& [name, t] : named_state(model)) {
    auto it = c.optimizer_steps.find(name);
    if (it == c.optimizer_steps.end()) continue;
    auto s = std::make_unique<torch::optim::AdamWParamState>();
    s->step(it->second);
    s->exp_avg(find_tensor(c, "adamw/" + name + "/exp_avg").clone().to(t.scalar_type()));
    s->exp_avg_sq(find_tensor(c, "adamw/" + name + "/exp_avg_sq").clone().to(t.scalar_type()));
    state[t.unsafeGetTensorImpl()] = std::move(s);
  }
}

std::unique_ptr<CorrespondenceModel> model_from_checkpoint(const Checkpoint& c) {
  auto model = std::make_unique<CorrespondenceModel>(c.config);
  restore_weights(c, *model);
  return model;
}

std::unique_ptr<CorrespondenceModel> load_model(const fs::path& path) {
  return model_from_checkpoint(read_checkpoint(path));
}

}  // namespace dcorr
