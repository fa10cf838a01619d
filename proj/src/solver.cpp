#include "aeig/solver.hpp"

#include <cmath>

#include "aeig/checkpoint.hpp"
#include "aeig/errors.hpp"
#include "aeig/stencil.hpp"
#include "aeig/text.hpp"

namespace aeig::solver {

using nn::Activation;
using nn::LayerSpec;

IGModel build_ig(const GridGeometry& geom, std::size_t latent_dim, const IGArch& arch,
                 double t_boundary, std::uint64_t seed) {
  geom.validate();
  if (latent_dim == 0 || arch.channels == 0) throw ShapeError("solver network: zero width");
  const std::size_t d = geom.dims(), f = std::size_t{1} << arch.stages, C = arch.channels;
  ad::Shape coarse;
  std::size_t flat = C;
  for (std::size_t a = 0; a < d; ++a) {
    if (geom.interior[a] % f)
      throw ShapeError("solver network: interior extent " + std::to_string(geom.interior[a]) +
                       " is not divisible by 2^" + std::to_string(arch.stages));
    coarse.push_back(geom.interior[a] / f);
    flat *= geom.interior[a] / f;
  }
  coarse.push_back(C);
  auto conv = [&](std::size_t cin, std::size_t cout, Activation act) {
    return d == 3 ? LayerSpec::conv3d(arch.kernel, cin, cout, act)
                  : LayerSpec::conv2d(arch.kernel, cin, cout, act);
  };
  std::vector<LayerSpec> specs;
  specs.push_back(LayerSpec::dense(latent_dim, flat));
  specs.push_back(LayerSpec::reshape_to(coarse));
  specs.push_back(LayerSpec::act(Activation::tanh));
  for (std::size_t s = 0; s < arch.stages; ++s) {
    specs.push_back(LayerSpec::up(2));
    specs.push_back(conv(C, C, Activation::tanh));
  }
  LayerSpec out = conv(C, 1, Activation::linear);
  out.init = nn::Init::zeros;
  specs.push_back(out);

  IGModel m;
  m.geom = geom;
  m.latent_dim = latent_dim;
  m.arch = arch;
  m.t_boundary = t_boundary;
  m.net = nn::Sequential(std::move(specs), seed);
  return m;
}

Tensor IGModel::forward(const Tensor& z) const {
  if (z.rank() != 2 || z.extent(1) != latent_dim)
    throw ShapeError("solver network expects latent codes [B, " + std::to_string(latent_dim) +
                     "], got " + ad::to_string(z.shape()));
  return ad::affine(net.forward(z), arch.output_scale, t_boundary);
}

namespace {

TemperatureField field_from(const IGModel& model, const Tensor& t, std::size_t b, std::string id) {
  const std::size_t cells = model.geom.interior_cells();
  std::vector<double> v(t.data().begin() + static_cast<std::ptrdiff_t>(b * cells),
                        t.data().begin() + static_cast<std::ptrdiff_t>((b + 1) * cells));
  return make_field(std::move(id), model.geom, model.t_boundary, std::move(v));
}

}  // namespace

TemperatureField predict(const IGModel& model, const ae::LatentCode& z) {
  if (z.values.size() != model.latent_dim)
    throw ShapeError("predict: latent code of length " + std::to_string(z.values.size()) +
                     ", model expects " + std::to_string(model.latent_dim));
  ad::NoGradScope no_grad;
  const Tensor t = model.forward(Tensor::from({1, model.latent_dim}, z.values));
  return field_from(model, t, 0, z.map_id);
}

Tensor residual_loss(const IGModel& model, const Tensor& z, const Tensor& q,
                     const PhysicsParams& physics, const std::vector<std::string>& ids) {
  if (q.rank() != model.geom.dims() + 2 || q.extent(0) != z.extent(0))
    throw ShapeError("residual_loss: sources " + ad::to_string(q.shape()) + " do not pair with codes " +
                     ad::to_string(z.shape()));
  const Tensor t = stencil::pad_with_boundary(model.forward(z), model.t_boundary);
  const Tensor r = stencil::residual(t, q, physics, model.geom);
  const Tensor loss = ad::reduce_mean_square(r);
  if (!std::isfinite(loss.item())) {
    const std::size_t per = r.size() / r.extent(0);
    for (std::size_t b = 0; b < r.extent(0); ++b)
      for (std::size_t i = 0; i < per; ++i)
        if (!std::isfinite(r.at(b * per + i)))
          throw NumericalError("non-finite PDE residual for map " +
                               (b < ids.size() ? ids[b] : "#" + std::to_string(b)));
    throw NumericalError("non-finite residual loss");
  }
  return loss;
}

std::vector<nn::EpochRecord> train_aeig(IGModel& model, const ae::AEModel& encoder,
                                        const DatasetManifest& manifest,
                                        const PhysicsParams& physics, const AeigSchedule& schedule,
                                        const nn::EpochCallback& on_epoch) {
  physics.validate();
  if (manifest.solve_geom != model.geom)
    throw ShapeError("train_aeig: dataset solve grid does not match the solver network");
  const auto train = manifest.split(Split::train);
  if (train.empty()) throw ConfigError("train_aeig: dataset has no training maps");
  std::vector<std::string> ids;
  for (const PowerMap* m : train) ids.push_back(m->id);

  const std::uint64_t before = encoder.encoder.checksum();
  const Tensor z = ae::encode_batch(encoder, train, manifest.normalization_max);
  const Tensor q = source_batch(train, model.geom);

  model.net.set_trainable(true);
  double initial = 0.0;
  std::size_t above = 0;
  std::vector<nn::EpochRecord> seen;
  auto guard = [&](const nn::EpochRecord& r) {
    seen.push_back(r);
    if (r.epoch == 0) initial = r.loss;
    above = r.loss > schedule.divergence_factor * initial ? above + 1 : 0;
    if (above >= schedule.divergence_window)
      throw DivergenceError("solver training diverged: loss " + text::format_double(r.loss) +
                                " at epoch " + std::to_string(r.epoch) + " stayed above " +
                                text::format_double(schedule.divergence_factor) + " x initial " +
                                text::format_double(initial) + " for " + std::to_string(above) +
                                " epochs",
                            seen);
  };
  auto history = nn::fit(
      "solver training", model.net.parameters(),
      [&] { return residual_loss(model, z, q, physics, ids); }, schedule.schedule, on_epoch, guard);
  if (encoder.encoder.checksum() != before)
    throw ContractError("encoder parameters changed during solver training");
  return history;
}

std::vector<TemperatureField> infer_batch(const IGModel& model, const ae::AEModel& encoder,
                                          const std::vector<const PowerMap*>& maps,
                                          double normalization_max) {
  if (encoder.latent_dim() != model.latent_dim)
    throw ShapeError("encoder latent size does not match the solver network");
  std::vector<TemperatureField> out;
  if (maps.empty()) return out;
  ad::NoGradScope no_grad;
  const Tensor t = model.forward(ae::encode_batch(encoder, maps, normalization_max));
  for (std::size_t b = 0; b < maps.size(); ++b) out.push_back(field_from(model, t, b, maps[b]->id));
  return out;
}

TemperatureField infer_unseen(const IGModel& model, const ae::AEModel& encoder,
                              const PowerMap& map, double normalization_max) {
  return infer_batch(model, encoder, {&map}, normalization_max).front();
}

void save_ig(const std::filesystem::path& path, const IGModel& model,
             const std::vector<std::pair<std::string, std::string>>& extra_meta) {
  nn::Checkpoint c;
  c.meta["model"] = "solver";
  std::string ext;
  for (auto e : model.geom.interior) ext += (ext.empty() ? "" : " ") + std::to_string(e);
  c.meta["interior_extents"] = ext;
  c.meta["latent_dim"] = std::to_string(model.latent_dim);
  c.meta["channels"] = std::to_string(model.arch.channels);
  c.meta["stages"] = std::to_string(model.arch.stages);
  c.meta["kernel"] = std::to_string(model.arch.kernel);
  c.meta["output_scale"] = text::format_double(model.arch.output_scale);
  c.meta["t_boundary"] = text::format_double(model.t_boundary);
  for (const auto& [k, v] : extra_meta) c.meta[k] = v;
  c.networks["solver"] = model.net.specs();
  c.tensors = model.net.named_parameters("solver.");
  nn::save_checkpoint(path, c);
}

IGModel load_ig(const std::filesystem::path& path) {
  const nn::Checkpoint c = nn::load_checkpoint(path);
  auto get = [&](const std::string& key) -> const std::string& {
    auto it = c.meta.find(key);
    if (it == c.meta.end()) throw ConfigError(path.string() + ": checkpoint lacks '" + key + "'");
    return it->second;
  };
  if (get("model") != "solver") throw ConfigError(path.string() + " is not a solver checkpoint");
  IGModel m;
  for (const auto& t : text::split(get("interior_extents"), ' '))
    m.geom.interior.push_back(static_cast<std::size_t>(text::parse_int(t)));
  m.latent_dim = static_cast<std::size_t>(text::parse_int(get("latent_dim")));
  m.arch.channels = static_cast<std::size_t>(text::parse_int(get("channels")));
  m.arch.stages = static_cast<std::size_t>(text::parse_int(get("stages")));
  m.arch.kernel = static_cast<std::size_t>(text::parse_int(get("kernel")));
  m.arch.output_scale = text::parse_double(get("output_scale"));
  m.t_boundary = text::parse_double(get("t_boundary"));
  if (!c.networks.count("solver")) throw ConfigError(path.string() + ": missing solver network");
  m.net = nn::Sequential(c.networks.at("solver"), 0);
  m.net.load(c.tensors, "solver.");
  return m;
}

}  // namespace aeig::solver
