#pragma once

#include "cymba/tensor.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

namespace cymba {

// Ordered registry of named parameter tensors. Names are unique; order is
// the serialization order.
struct ParamStore {
  std::vector<std::pair<std::string, Tensor>> items;

  void add(const std::string& name, const Tensor& t);
  Tensor* find(const std::string& name);
  Index total_size() const;
};

// Single-tensor binary block: magic "CYT1", rank as LE u64, extents as
// LE u64, then values as LE f64.
void write_tensor(std::ostream& out, const Tensor& t);
Tensor read_tensor(std::istream& in);

// Checkpoint container: LE u64 tensor count, then length-prefixed names with
// tensor blocks. A JSON manifest (same path + ".json") lists every tensor
// with its shape plus caller-provided metadata. Both files are written to a
// temporary name and renamed into place, so readers never see a torn file.
void save_checkpoint(const std::filesystem::path& path, const ParamStore& params,
                     const nlohmann::json& metadata);

// Loads values into an already-built ParamStore; names and shapes must match
// exactly. Returns the stored metadata.
nlohmann::json load_checkpoint(const std::filesystem::path& path, ParamStore& params);

// Metadata stored in a checkpoint manifest without reading tensor data.
nlohmann::json read_checkpoint_metadata(const std::filesystem::path& path);

// FNV-1a 64-bit digest of a file's bytes, as fixed-width hex.
std::string file_digest(const std::filesystem::path& path);

}  // namespace cymba
