#pragma once

// Image-gradient solver network: maps a frozen latent code to the interior
// temperature field and is trained only on the PDE residual of every
// training map at once.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "aeig/autoencoder.hpp"
#include "aeig/errors.hpp"
#include "aeig/field.hpp"
#include "aeig/grid.hpp"
#include "aeig/layers.hpp"
#include "aeig/powermap.hpp"
#include "aeig/training.hpp"

namespace aeig::solver {

using ad::Tensor;

struct IGArch {
  std::size_t channels = 16;
  std::size_t stages = 2;  // upsample + conv blocks after the dense expansion
  std::size_t kernel = 3;
  double output_scale = 100.0;  // T = t_boundary + output_scale * raw
};

struct IGModel {
  GridGeometry geom;  // interior solve grid, 2D or 3D
  std::size_t latent_dim = 0;
  IGArch arch;
  double t_boundary = 150.0;
  nn::Sequential net;

  // [B, latent_dim] -> interior temperatures [B, n..., 1].
  Tensor forward(const Tensor& z) const;
};

// dense latent -> C x (n / 2^stages)^d, reshape, tanh, [upsample 2, conv +
// tanh] x stages, zero-initialised linear conv to one channel.
IGModel build_ig(const GridGeometry& geom, std::size_t latent_dim, const IGArch& arch = {},
                 double t_boundary = 150.0, std::uint64_t seed = 2);

TemperatureField predict(const IGModel& model, const ae::LatentCode& z);

// Mean over maps of the mean-square interior residual. z: [B, latent_dim];
// q: source batch on the model grid [B, n..., 1]. Throws NumericalError
// naming the first map whose residual is not finite (ids may be empty).
Tensor residual_loss(const IGModel& model, const Tensor& z, const Tensor& q,
                     const PhysicsParams& physics, const std::vector<std::string>& ids = {});

struct AeigSchedule {
  nn::Schedule schedule{10000, 1e-4};
  double divergence_factor = 1e3;       // loss above factor * initial ...
  std::size_t divergence_window = 100;  // ... this many epochs in a row aborts
};

// Thrown when training blows up; carries the history so far.
class DivergenceError : public NumericalError {
 public:
  DivergenceError(const std::string& what, std::vector<nn::EpochRecord> history)
      : NumericalError(what), history_(std::move(history)) {}
  const std::vector<nn::EpochRecord>& history() const { return history_; }

 private:
  std::vector<nn::EpochRecord> history_;
};

// Full-batch training on every training map of `manifest`. The encoder is
// used read-only; its checksum is compared before and after and a change is
// a ContractError.
std::vector<nn::EpochRecord> train_aeig(IGModel& model, const ae::AEModel& encoder,
                                        const DatasetManifest& manifest,
                                        const PhysicsParams& physics, const AeigSchedule& schedule,
                                        const nn::EpochCallback& on_epoch = {});

// Encode then predict, no training.
TemperatureField infer_unseen(const IGModel& model, const ae::AEModel& encoder,
                              const PowerMap& map, double normalization_max);
std::vector<TemperatureField> infer_batch(const IGModel& model, const ae::AEModel& encoder,
                                          const std::vector<const PowerMap*>& maps,
                                          double normalization_max);

void save_ig(const std::filesystem::path& path, const IGModel& model,
             const std::vector<std::pair<std::string, std::string>>& extra_meta = {});
IGModel load_ig(const std::filesystem::path& path);

}  // namespace aeig::solver
