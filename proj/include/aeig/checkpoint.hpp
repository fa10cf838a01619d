#pragma once

// Model checkpoints.
//
// Binary layout (all integers and reals little-endian):
//   "AEIGCKPT"                        8-byte magic
//   u32 format_version                currently 1
//   u64 manifest_bytes, manifest      UTF-8 text, one record per line:
//                                       meta <key> <value>
//                                       layer <network> <LayerSpec text>
//   u64 tensor_count
//   per tensor: u32 name_bytes, name, u32 rank, u64 dims[rank],
//               f64 values[prod(dims)]

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "aeig/layers.hpp"

namespace aeig::nn {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  std::map<std::string, std::string> meta;
  // network name -> layer specs, in order
  std::map<std::string, std::vector<LayerSpec>> networks;
  std::vector<NamedTensor> tensors;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Little-endian primitives shared with the grid file format.
void write_u32(std::ostream& os, std::uint32_t v);
void write_u64(std::ostream& os, std::uint64_t v);
void write_f64(std::ostream& os, double v);
std::uint32_t read_u32(std::istream& is);
std::uint64_t read_u64(std::istream& is);
double read_f64(std::istream& is);

}  // namespace aeig::nn
