#include "ncr/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <map>

namespace ncr {

namespace {

void put_u32(std::ofstream& os, uint32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); }

bool get_u32(std::ifstream& is, uint32_t& v) {
  is.read(reinterpret_cast<char*>(&v), 4);
  return static_cast<bool>(is);
}

}  // namespace

void save_checkpoint(const std::string& path, const std::vector<NamedParam<float>>& params) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw CheckpointError(CheckpointError::Kind::kIo, "cannot open " + path + " for writing");
  os.write("NCKP", 4);
  put_u32(os, kCheckpointVersion);
  put_u32(os, static_cast<uint32_t>(params.size()));
  for (const auto& p : params) {
    put_u32(os, static_cast<uint32_t>(p.name.size()));
    os.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    put_u32(os, static_cast<uint32_t>(p.tensor.rank()));
    for (int i = 0; i < p.tensor.rank(); ++i) put_u32(os, static_cast<uint32_t>(p.tensor.dim(i)));
    os.write(reinterpret_cast<const char*>(p.tensor.data()),
             static_cast<std::streamsize>(p.tensor.numel()) * 4);
  }
  if (!os) throw CheckpointError(CheckpointError::Kind::kIo, "write failed for " + path);
}

void load_checkpoint(const std::string& path, std::vector<NamedParam<float>>& params) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw CheckpointError(CheckpointError::Kind::kIo, "cannot open " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "NCKP", 4) != 0)
    throw CheckpointError(CheckpointError::Kind::kBadMagic, "bad checkpoint magic in " + path);
  uint32_t version = 0, count = 0;
  if (!get_u32(is, version))
    throw CheckpointError(CheckpointError::Kind::kTruncated, "truncated header in " + path);
  if (version != kCheckpointVersion)
    throw CheckpointError(CheckpointError::Kind::kBadVersion,
                          "checkpoint version " + std::to_string(version) + " unsupported");
  if (!get_u32(is, count))
    throw CheckpointError(CheckpointError::Kind::kTruncated, "truncated header in " + path);

  struct Block {
    std::vector<int> shape;
    std::vector<float> data;
  };
  std::map<std::string, Block> blocks;
  for (uint32_t bi = 0; bi < count; ++bi) {
    uint32_t name_len = 0;
    if (!get_u32(is, name_len))
      throw CheckpointError(CheckpointError::Kind::kTruncated, "truncated block header");
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    uint32_t rank = 0;
    if (!is || !get_u32(is, rank))
      throw CheckpointError(CheckpointError::Kind::kTruncated, "truncated block header");
    Block b;
    long long n = 1;
    for (uint32_t r = 0; r < rank; ++r) {
      uint32_t e = 0;
      if (!get_u32(is, e))
        throw CheckpointError(CheckpointError::Kind::kTruncated, "truncated shape of " + name);
      b.shape.push_back(static_cast<int>(e));
      n *= e;
    }
    b.data.resize(static_cast<size_t>(n));
    is.read(reinterpret_cast<char*>(b.data.data()), n * 4);
    if (!is)
      throw CheckpointError(CheckpointError::Kind::kTruncated, "truncated payload of " + name);
    blocks.emplace(std::move(name), std::move(b));
  }

  for (auto& p : params) {
    auto it = blocks.find(p.name);
    if (it == blocks.end())
      throw CheckpointError(CheckpointError::Kind::kNameMismatch,
                            "checkpoint is missing parameter '" + p.name + "'");
    if (it->second.shape != p.tensor.shape())
      throw CheckpointError(CheckpointError::Kind::kShapeMismatch,
                            "parameter '" + p.name + "' has mismatched shape");
    std::copy(it->second.data.begin(), it->second.data.end(), p.tensor.data());
  }
}

}  // namespace ncr
