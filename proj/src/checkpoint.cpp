#include "aeig/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "aeig/errors.hpp"

namespace aeig::nn {

namespace {

constexpr char kMagic[8] = {'A', 'E', 'I', 'G', 'C', 'K', 'P', 'T'};

template <typename T>
void write_le(std::ostream& os, T v) {
  unsigned char b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big)
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
  os.write(reinterpret_cast<const char*>(b), sizeof(T));
}

template <typename T>
T read_le(std::istream& is) {
  unsigned char b[sizeof(T)];
  if (!is.read(reinterpret_cast<char*>(b), sizeof(T))) throw IoError("unexpected end of file");
  if constexpr (std::endian::native == std::endian::big)
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
  T v;
  std::memcpy(&v, b, sizeof(T));
  return v;
}

}  // namespace

void write_u32(std::ostream& os, std::uint32_t v) { write_le(os, v); }
void write_u64(std::ostream& os, std::uint64_t v) { write_le(os, v); }
void write_f64(std::ostream& os, double v) { write_le(os, v); }
std::uint32_t read_u32(std::istream& is) { return read_le<std::uint32_t>(is); }
std::uint64_t read_u64(std::istream& is) { return read_le<std::uint64_t>(is); }
double read_f64(std::istream& is) { return read_le<double>(is); }

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ostringstream manifest;
  for (const auto& [k, v] : ckpt.meta) manifest << "meta " << k << ' ' << v << '\n';
  for (const auto& [name, specs] : ckpt.networks)
    for (const auto& s : specs) manifest << "layer " << name << ' ' << to_string(s) << '\n';
  const std::string text = manifest.str();

  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot write checkpoint " + path.string());
  os.write(kMagic, sizeof(kMagic));
  write_u32(os, kCheckpointVersion);
  write_u64(os, text.size());
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  write_u64(os, ckpt.tensors.size());
  for (const auto& t : ckpt.tensors) {
    write_u32(os, static_cast<std::uint32_t>(t.name.size()));
    os.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
    write_u32(os, static_cast<std::uint32_t>(t.value.rank()));
    for (auto d : t.value.shape()) write_u64(os, d);
    for (double x : t.value.data()) write_f64(os, x);
  }
  if (!os) throw IoError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint " + path.string());
  char magic[8];
  if (!is.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(magic)) != 0)
    throw IoError(path.string() + " is not a checkpoint");
  const auto version = read_u32(is);
  if (version != kCheckpointVersion)
    throw IoError("unsupported checkpoint version " + std::to_string(version));

  Checkpoint ckpt;
  std::string text(read_u64(is), '\0');
  if (!is.read(text.data(), static_cast<std::streamsize>(text.size())))
    throw IoError("truncated checkpoint manifest");
  std::istringstream lines(text);
  std::string line;
  while (std::getline(lines, line)) {
    std::istringstream ls(line);
    std::string tag, name;
    ls >> tag >> name;
    std::string rest;
    std::getline(ls >> std::ws, rest);
    if (tag == "meta")
      ckpt.meta[name] = rest;
    else if (tag == "layer")
      ckpt.networks[name].push_back(parse_layer_spec(rest));
    else
      throw IoError("bad checkpoint manifest line: " + line);
  }

  const auto count = read_u64(is);
  for (std::uint64_t i = 0; i < count; ++i) {
    std::string name(read_u32(is), '\0');
    if (!is.read(name.data(), static_cast<std::streamsize>(name.size())))
      throw IoError("truncated tensor name");
    const auto rank = read_u32(is);
    ad::Shape shape(rank);
    for (auto& d : shape) d = read_u64(is);
    std::vector<double> values(ad::numel(shape));
    for (auto& x : values) x = read_f64(is);
    ckpt.tensors.push_back({std::move(name), ad::Tensor::from(std::move(shape), std::move(values))});
  }
  return ckpt;
}

}  // namespace aeig::nn
