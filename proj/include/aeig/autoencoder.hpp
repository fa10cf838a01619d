#pragma once

// Convolutional autoencoder over 2D power maps. After training only the
// encoder is kept; it turns each map into a latent code for the solver
// network.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "aeig/grid.hpp"
#include "aeig/layers.hpp"
#include "aeig/powermap.hpp"
#include "aeig/training.hpp"

namespace aeig::ae {

using ad::Tensor;

struct AEArch {
  std::size_t latent_dim = 32;
  std::size_t channels = 16;
  std::size_t stages = 3;  // conv + pool blocks; extents must divide by 2^stages
  std::size_t kernel = 3;
};

struct AEModel {
  GridGeometry geom;  // 2D map grid
  AEArch arch;
  nn::Sequential encoder;
  nn::Sequential decoder;

  std::size_t latent_dim() const { return arch.latent_dim; }
  // Decoder output for a [B, nx, ny, 1] batch.
  Tensor reconstruct(const Tensor& x) const;
};

// Encoder: [conv k x k x C + tanh, pool 2] x stages, flatten, dense ->
// latent. Decoder: dense, reshape, tanh, [upsample 2, conv + tanh] x stages,
// linear conv to one channel.
AEModel build_ae(const GridGeometry& geom, const AEArch& arch = {}, std::uint64_t seed = 1);

// Full-batch Adam on the reconstruction MSE of `inputs` ([B, nx, ny, 1],
// already normalized). Throws NumericalError on a non-finite loss, naming
// the epoch, learning rate and per-parameter gradient norms.
std::vector<nn::EpochRecord> train_ae(AEModel& model, const Tensor& inputs,
                                      const nn::Schedule& schedule,
                                      const nn::EpochCallback& on_epoch = {});

struct LatentCode {
  std::string map_id;
  std::vector<double> values;
};

// Division by the dataset's normalization max (scale must be positive).
Tensor normalize(const Tensor& q, double scale);
Tensor denormalize(const Tensor& q, double scale);

// Normalized [B, nx, ny, 1] batch of maps.
Tensor map_batch(const std::vector<const PowerMap*>& maps, double scale);

// Encoder pass without recording a graph. Throws ShapeError when a map's
// grid differs from the model's.
LatentCode encode(const AEModel& model, const PowerMap& map, double scale);
// [B, latent_dim]
Tensor encode_batch(const AEModel& model, const std::vector<const PowerMap*>& maps, double scale);

// Checkpoint with networks "encoder" and "decoder" and the architecture in
// the metadata. `extra_meta` entries are stored alongside.
void save_ae(const std::filesystem::path& path, const AEModel& model,
             const std::vector<std::pair<std::string, std::string>>& extra_meta = {});
AEModel load_ae(const std::filesystem::path& path);

}  // namespace aeig::ae
