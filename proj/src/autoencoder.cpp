#include "aeig/autoencoder.hpp"

#include "aeig/checkpoint.hpp"
#include "aeig/errors.hpp"
#include "aeig/text.hpp"

namespace aeig::ae {

using nn::Activation;
using nn::LayerSpec;

AEModel build_ae(const GridGeometry& geom, const AEArch& arch, std::uint64_t seed) {
  if (geom.dims() != 2) throw ShapeError("autoencoder: maps must be 2D");
  if (arch.latent_dim == 0 || arch.channels == 0 || arch.stages == 0)
    throw ShapeError("autoencoder: latent_dim, channels and stages must be positive");
  const std::size_t f = std::size_t{1} << arch.stages;
  const std::size_t nx = geom.interior[0], ny = geom.interior[1];
  if (nx % f || ny % f)
    throw ShapeError("autoencoder: map extents " + std::to_string(nx) + "x" + std::to_string(ny) +
                     " are not divisible by 2^" + std::to_string(arch.stages));
  const std::size_t C = arch.channels, k = arch.kernel;
  const std::size_t bx = nx / f, by = ny / f, flat = bx * by * C;

  std::vector<LayerSpec> enc;
  for (std::size_t s = 0; s < arch.stages; ++s) {
    enc.push_back(LayerSpec::conv2d(k, s == 0 ? 1 : C, C, Activation::tanh));
    enc.push_back(LayerSpec::pool(2));
  }
  enc.push_back(LayerSpec::reshape_to({flat}));
  enc.push_back(LayerSpec::dense(flat, arch.latent_dim));

  std::vector<LayerSpec> dec;
  dec.push_back(LayerSpec::dense(arch.latent_dim, flat));
  dec.push_back(LayerSpec::reshape_to({bx, by, C}));
  dec.push_back(LayerSpec::act(Activation::tanh));
  for (std::size_t s = 0; s < arch.stages; ++s) {
    dec.push_back(LayerSpec::up(2));
    dec.push_back(LayerSpec::conv2d(k, C, C, Activation::tanh));
  }
  dec.push_back(LayerSpec::conv2d(k, C, 1));

  AEModel m;
  m.geom = geom;
  m.arch = arch;
  m.encoder = nn::Sequential(std::move(enc), seed);
  m.decoder = nn::Sequential(std::move(dec), seed + 1);
  return m;
}

Tensor AEModel::reconstruct(const Tensor& x) const { return decoder.forward(encoder.forward(x)); }

std::vector<nn::EpochRecord> train_ae(AEModel& model, const Tensor& inputs,
                                      const nn::Schedule& schedule,
                                      const nn::EpochCallback& on_epoch) {
  const auto& s = inputs.shape();
  if (s.size() != 4 || s[1] != model.geom.interior[0] || s[2] != model.geom.interior[1] || s[3] != 1)
    throw ShapeError("train_ae: inputs " + ad::to_string(s) + " do not match the model grid");
  model.encoder.set_trainable(true);
  model.decoder.set_trainable(true);
  auto params = model.encoder.parameters();
  for (auto& p : model.decoder.parameters()) params.push_back(p);
  return nn::fit(
      "autoencoder training", params,
      [&] { return ad::reduce_mean_square(ad::sub(model.reconstruct(inputs), inputs)); }, schedule,
      on_epoch);
}

Tensor normalize(const Tensor& q, double scale) {
  if (!(scale > 0.0)) throw DomainError("normalization scale must be positive");
  std::vector<double> v(q.data().begin(), q.data().end());
  for (auto& x : v) x /= scale;
  return Tensor::from(q.shape(), std::move(v));
}

Tensor denormalize(const Tensor& q, double scale) {
  if (!(scale > 0.0)) throw DomainError("normalization scale must be positive");
  std::vector<double> v(q.data().begin(), q.data().end());
  for (auto& x : v) x *= scale;
  return Tensor::from(q.shape(), std::move(v));
}

Tensor map_batch(const std::vector<const PowerMap*>& maps, double scale) {
  if (maps.empty()) throw ShapeError("map_batch: no maps");
  const GridGeometry& g = maps.front()->geom;
  std::vector<double> v;
  v.reserve(maps.size() * g.interior_cells());
  for (const PowerMap* m : maps) {
    if (m->geom != g) throw ShapeError("map_batch: map " + m->id + " has a different grid");
    v.insert(v.end(), m->values.begin(), m->values.end());
  }
  return normalize(Tensor::from({maps.size(), g.interior[0], g.interior[1], 1}, std::move(v)), scale);
}

Tensor encode_batch(const AEModel& model, const std::vector<const PowerMap*>& maps, double scale) {
  for (const PowerMap* m : maps)
    if (m->geom != model.geom)
      throw ShapeError("encode: map " + m->id + " does not match the encoder's grid");
  ad::NoGradScope frozen;
  return model.encoder.forward(map_batch(maps, scale)).detach();
}

LatentCode encode(const AEModel& model, const PowerMap& map, double scale) {
  const Tensor z = encode_batch(model, {&map}, scale);
  return {map.id, {z.data().begin(), z.data().end()}};
}

namespace {

std::string extents_text(const GridGeometry& g) {
  std::string s;
  for (auto e : g.interior) s += (s.empty() ? "" : " ") + std::to_string(e);
  return s;
}

std::size_t meta_size(const nn::Checkpoint& c, const std::string& key) {
  auto it = c.meta.find(key);
  if (it == c.meta.end()) throw ConfigError("autoencoder checkpoint lacks '" + key + "'");
  return static_cast<std::size_t>(text::parse_int(it->second));
}

}  // namespace

void save_ae(const std::filesystem::path& path, const AEModel& model,
             const std::vector<std::pair<std::string, std::string>>& extra_meta) {
  nn::Checkpoint c;
  c.meta["model"] = "autoencoder";
  c.meta["map_extents"] = extents_text(model.geom);
  c.meta["latent_dim"] = std::to_string(model.arch.latent_dim);
  c.meta["channels"] = std::to_string(model.arch.channels);
  c.meta["stages"] = std::to_string(model.arch.stages);
  c.meta["kernel"] = std::to_string(model.arch.kernel);
  for (const auto& [k, v] : extra_meta) c.meta[k] = v;
  c.networks["encoder"] = model.encoder.specs();
  c.networks["decoder"] = model.decoder.specs();
  c.tensors = model.encoder.named_parameters("encoder.");
  for (auto& t : model.decoder.named_parameters("decoder.")) c.tensors.push_back(t);
  nn::save_checkpoint(path, c);
}

AEModel load_ae(const std::filesystem::path& path) {
  const nn::Checkpoint c = nn::load_checkpoint(path);
  auto kind = c.meta.find("model");
  if (kind == c.meta.end() || kind->second != "autoencoder")
    throw ConfigError(path.string() + " is not an autoencoder checkpoint");
  AEModel m;
  for (const auto& t : text::split(c.meta.at("map_extents"), ' '))
    m.geom.interior.push_back(static_cast<std::size_t>(text::parse_int(t)));
  m.arch.latent_dim = meta_size(c, "latent_dim");
  m.arch.channels = meta_size(c, "channels");
  m.arch.stages = meta_size(c, "stages");
  m.arch.kernel = meta_size(c, "kernel");
  if (!c.networks.count("encoder") || !c.networks.count("decoder"))
    throw ConfigError(path.string() + ": missing encoder or decoder network");
  m.encoder = nn::Sequential(c.networks.at("encoder"), 0);
  m.decoder = nn::Sequential(c.networks.at("decoder"), 0);
  m.encoder.load(c.tensors, "encoder.");
  m.decoder.load(c.tensors, "decoder.");
  return m;
}

}  // namespace aeig::ae
