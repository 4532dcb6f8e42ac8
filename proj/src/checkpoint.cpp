#include "cymba/checkpoint.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <functional>

namespace cymba {

namespace {

using detail::check;

constexpr char kMagic[4] = {'C', 'Y', 'T', '1'};

void write_u64(std::ostream& out, std::uint64_t v) {
  unsigned char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(buf), 8);
}

std::uint64_t read_u64(std::istream& in) {
  unsigned char buf[8];
  in.read(reinterpret_cast<char*>(buf), 8);
  if (!in) throw std::runtime_error("truncated tensor block");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return v;
}

void write_f64_block(std::ostream& out, const double* data, Index n) {
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(data), n * 8);
  } else {
    for (Index i = 0; i < n; ++i) {
      std::uint64_t bits;
      std::memcpy(&bits, data + i, 8);
      write_u64(out, bits);
    }
  }
}

void read_f64_block(std::istream& in, double* data, Index n) {
  if constexpr (std::endian::native == std::endian::little) {
    in.read(reinterpret_cast<char*>(data), n * 8);
    if (!in) throw std::runtime_error("truncated tensor data");
  } else {
    for (Index i = 0; i < n; ++i) {
      const std::uint64_t bits = read_u64(in);
      std::memcpy(data + i, &bits, 8);
    }
  }
}

std::filesystem::path manifest_path(const std::filesystem::path& path) {
  return std::filesystem::path(path.string() + ".json");
}

void atomic_write(const std::filesystem::path& path,
                  const std::function<void(std::ostream&)>& writer) {
  const std::filesystem::path tmp(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    writer(out);
    out.flush();
    if (!out) throw std::runtime_error("short write on " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace

void ParamStore::add(const std::string& name, const Tensor& t) {
  check(t.defined(), "ParamStore: undefined tensor for " + name);
  check(find(name) == nullptr, "ParamStore: duplicate name " + name);
  items.emplace_back(name, t);
}

Tensor* ParamStore::find(const std::string& name) {
  for (auto& [n, t] : items)
    if (n == name) return &t;
  return nullptr;
}

Index ParamStore::total_size() const {
  Index n = 0;
  for (const auto& [name, t] : items) n += t.size();
  return n;
}

void write_tensor(std::ostream& out, const Tensor& t) {
  check(t.defined(), "write_tensor: undefined tensor");
  out.write(kMagic, 4);
  write_u64(out, static_cast<std::uint64_t>(t.rank()));
  for (Index e : t.shape()) write_u64(out, static_cast<std::uint64_t>(e));
  write_f64_block(out, t.value().data(), t.size());
}

Tensor read_tensor(std::istream& in) {
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw std::runtime_error("bad tensor block magic");
  const std::uint64_t rank = read_u64(in);
  if (rank > 8) throw std::runtime_error("implausible tensor rank");
  Shape shape(rank);
  for (auto& e : shape) e = static_cast<Index>(read_u64(in));
  Array data(numel(shape));
  read_f64_block(in, data.data(), data.size());
  return Tensor::from_array(std::move(shape), std::move(data));
}

void save_checkpoint(const std::filesystem::path& path, const ParamStore& params,
                     const nlohmann::json& metadata) {
  atomic_write(path, [&params](std::ostream& out) {
    write_u64(out, params.items.size());
    for (const auto& [name, t] : params.items) {
      write_u64(out, name.size());
      out.write(name.data(), static_cast<std::streamsize>(name.size()));
      write_tensor(out, t);
    }
  });

  nlohmann::json manifest;
  manifest["metadata"] = metadata;
  auto& tensors = manifest["tensors"] = nlohmann::json::array();
  for (const auto& [name, t] : params.items) {
    nlohmann::json entry;
    entry["name"] = name;
    entry["shape"] = t.shape();
    tensors.push_back(std::move(entry));
  }
  const std::string text = manifest.dump(2) + "\n";
  atomic_write(manifest_path(path),
               [&text](std::ostream& out) { out.write(text.data(), static_cast<std::streamsize>(text.size())); });
}

nlohmann::json load_checkpoint(const std::filesystem::path& path, ParamStore& params) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  const std::uint64_t count = read_u64(in);
  if (count != params.items.size())
    throw std::runtime_error("checkpoint " + path.string() + " holds " +
                             std::to_string(count) + " tensors, expected " +
                             std::to_string(params.items.size()));
  for (auto& [name, t] : params.items) {
    const std::uint64_t len = read_u64(in);
    std::string stored(len, '\0');
    in.read(stored.data(), static_cast<std::streamsize>(len));
    if (!in) throw std::runtime_error("truncated checkpoint " + path.string());
    if (stored != name)
      throw std::runtime_error("checkpoint tensor " + stored + " where " + name +
                               " was expected");
    Tensor loaded = read_tensor(in);
    if (!same_shape(loaded.shape(), t.shape()))
      throw std::runtime_error("checkpoint tensor " + name + " has shape " +
                               shape_str(loaded.shape()) + ", expected " +
                               shape_str(t.shape()));
    t.raw_value() = loaded.value();
  }

  std::ifstream mf(manifest_path(path));
  if (!mf) throw std::runtime_error("missing manifest for " + path.string());
  nlohmann::json manifest = nlohmann::json::parse(mf);
  return manifest.value("metadata", nlohmann::json::object());
}

nlohmann::json read_checkpoint_metadata(const std::filesystem::path& path) {
  std::ifstream mf(manifest_path(path));
  if (!mf) throw std::runtime_error("missing manifest for " + path.string());
  nlohmann::json manifest = nlohmann::json::parse(mf);
  return manifest.value("metadata", nlohmann::json::object());
}

std::string file_digest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::uint64_t hash = 1469598103934665603ULL;
  char buf[65536];
  while (in) {
    in.read(buf, sizeof(buf));
    const std::streamsize got = in.gcount();
    for (std::streamsize i = 0; i < got; ++i) {
      hash ^= static_cast<unsigned char>(buf[i]);
      hash *= 1099511628211ULL;
    }
  }
  char hex[17];
  std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(hash));
  return std::string(hex);
}

}  // namespace cymba
