#include "brp/checkpoint.hpp"

#include <array>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "brp/io.hpp"

namespace brp {

namespace {

constexpr std::array<char, 4> kMagic = {'B', 'R', 'P', 'C'};

template <typename T>
void put(std::ostream& out, T v) {
  std::array<char, sizeof(T)> bytes{};
  std::uint64_t raw = 0;
  std::memcpy(&raw, &v, sizeof(T));
  for (std::size_t i = 0; i < sizeof(T); ++i) bytes[i] = static_cast<char>((raw >> (8 * i)) & 0xff);
  out.write(bytes.data(), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  std::array<unsigned char, sizeof(T)> bytes{};
  in.read(reinterpret_cast<char*>(bytes.data()), sizeof(T));
  if (!in) throw IoError("checkpoint: unexpected end of file");
  std::uint64_t raw = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) raw |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  T v;
  std::memcpy(&v, &raw, sizeof(T));
  return v;
}

void put_string(std::ostream& out, const std::string& s) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& in) {
  const auto n = get<std::uint32_t>(in);
  if (n > (1u << 24)) throw IoError("checkpoint: implausible string length");
  std::string s(n, '\0');
  in.read(s.data(), n);
  if (!in) throw IoError("checkpoint: unexpected end of file");
  return s;
}

std::uint8_t dtype_code(const torch::Tensor& t) {
  switch (t.scalar_type()) {
    case torch::kFloat32: return 0;
    case torch::kFloat64: return 1;
    case torch::kInt64: return 2;
    default: throw std::invalid_argument("checkpoint: unsupported tensor dtype");
  }
}

torch::ScalarType dtype_from_code(std::uint8_t code) {
  switch (code) {
    case 0: return torch::kFloat32;
    case 1: return torch::kFloat64;
    case 2: return torch::kInt64;
    default: throw IoError("checkpoint: unknown dtype code");
  }
}

template <typename T>
void put_values(std::ostream& out, const torch::Tensor& t) {
  const auto* p = t.data_ptr<T>();
  for (int64_t i = 0; i < t.numel(); ++i) put<T>(out, p[i]);
}

template <typename T>
void get_values(std::istream& in, torch::Tensor& t) {
  auto* p = t.data_ptr<T>();
  for (int64_t i = 0; i < t.numel(); ++i) p[i] = get<T>(in);
}

}  // namespace

void Checkpoint::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(kMagic.data(), 4);
  put<std::uint32_t>(out, kVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(meta.size()));
  for (const auto& [k, v] : meta) {
    put_string(out, k);
    put_string(out, v);
  }
  put<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, tensor] : tensors) {
    const auto t = tensor.detach().cpu().contiguous();
    put_string(out, name);
    const auto code = dtype_code(t);
    put<std::uint8_t>(out, code);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.dim()));
    for (auto d : t.sizes()) put<std::int64_t>(out, d);
    if (code == 0) put_values<float>(out, t);
    else if (code == 1) put_values<double>(out, t);
    else put_values<std::int64_t>(out, t);
  }
  if (!out) throw IoError("write failed: " + path.string());
}

Checkpoint Checkpoint::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  std::array<char, 4> magic{};
  in.read(magic.data(), 4);
  if (!in || magic != kMagic) throw IoError("not a checkpoint: " + path.string());
  const auto version = get<std::uint32_t>(in);
  if (version != kVersion) {
    throw IoError("unsupported checkpoint version " + std::to_string(version) + " in " + path.string());
  }
  Checkpoint ckpt;
  const auto n_meta = get<std::uint32_t>(in);
  for (std::uint32_t i = 0; i < n_meta; ++i) {
    auto k = get_string(in);
    ckpt.meta[k] = get_string(in);
  }
  const auto n_tensors = get<std::uint32_t>(in);
  for (std::uint32_t i = 0; i < n_tensors; ++i) {
    auto name = get_string(in);
    const auto dtype = dtype_from_code(get<std::uint8_t>(in));
    const auto ndim = get<std::uint32_t>(in);
    if (ndim > 8) throw IoError("checkpoint: implausible tensor rank");
    std::vector<int64_t> dims(ndim);
    for (auto& d : dims) d = get<std::int64_t>(in);
    auto t = torch::empty(dims, torch::TensorOptions().dtype(dtype));
    if (dtype == torch::kFloat32) get_values<float>(in, t);
    else if (dtype == torch::kFloat64) get_values<double>(in, t);
    else get_values<std::int64_t>(in, t);
    ckpt.tensors.emplace_back(std::move(name), std::move(t));
  }
  return ckpt;
}

const std::string& Checkpoint::require(const std::string& key) const {
  auto it = meta.find(key);
  if (it == meta.end()) throw IoError("checkpoint is missing metadata key '" + key + "'");
  return it->second;
}

Checkpoint capture_module(const torch::nn::Module& module) {
  Checkpoint ckpt;
  for (const auto& item : module.named_parameters(true)) {
    ckpt.tensors.emplace_back(item.key(), item.value().detach().clone());
  }
  for (const auto& item : module.named_buffers(true)) {
    ckpt.tensors.emplace_back(item.key(), item.value().detach().clone());
  }
  return ckpt;
}

void restore_module(torch::nn::Module& module, const Checkpoint& ckpt) {
  std::map<std::string, const torch::Tensor*> by_name;
  for (const auto& [name, t] : ckpt.tensors) by_name[name] = &t;
  torch::NoGradGuard no_grad;
  std::size_t consumed = 0;
  auto copy_into = [&](const std::string& name, torch::Tensor& dst) {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw IoError("checkpoint has no tensor '" + name + "'");
    if (it->second->sizes() != dst.sizes()) throw IoError("shape mismatch for tensor '" + name + "'");
    dst.copy_(*it->second);
    ++consumed;
  };
  for (auto& item : module.named_parameters(true)) copy_into(item.key(), item.value());
  for (auto& item : module.named_buffers(true)) copy_into(item.key(), item.value());
  if (consumed != by_name.size()) throw IoError("checkpoint holds tensors the module does not have");
}

}  // namespace brp
