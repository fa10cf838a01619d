#pragma once

// Layer vocabulary for the autoencoder and solver networks.
//
// Spatial tensors are channels-last: [batch, x, y, channels] in 2D and
// [batch, x, y, z, channels] in 3D. Convolutions use stride 1 and zero
// same-padding; all downsampling is done by max pooling.

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "aeig/tensor.hpp"

namespace aeig::nn {

using ad::Shape;
using ad::Tensor;

// ---------------------------------------------------------------------------
// Differentiable spatial ops

// kernel: [kx, ky, (kz,) c_in, c_out]; bias: [c_out].
Tensor conv_forward(const Tensor& input, const Tensor& kernel, const Tensor& bias);

// Block max over factor^d windows. Gradient goes to the first maximal
// element of each block in row-major order.
Tensor maxpool(const Tensor& input, std::size_t factor);

// Nearest-neighbour replication into factor^d blocks.
Tensor upsample(const Tensor& input, std::size_t factor);

// Adds `width` cells of constant `value` on both sides of every spatial axis.
Tensor pad_constant(const Tensor& input, std::size_t width, double value);

// Removes `width` cells from both sides of every spatial axis.
Tensor crop(const Tensor& input, std::size_t width);

// ---------------------------------------------------------------------------
// Layer specifications

enum class LayerKind { conv2d, conv3d, maxpool, upsample, dense, activation, reshape, pad };
enum class Activation { linear, tanh };
enum class Init { glorot, zeros };

struct LayerSpec {
  LayerKind kind = LayerKind::activation;
  std::vector<std::size_t> kernel;  // conv extents, one per spatial axis
  std::size_t in_channels = 0;      // conv channels / dense features
  std::size_t out_channels = 0;
  std::size_t stride = 1;
  std::size_t factor = 1;           // pool / upsample factor, pad width
  Activation activation = Activation::linear;
  Shape target;                     // reshape target, excluding batch
  double pad_value = 0.0;
  Init init = Init::glorot;

  static LayerSpec conv2d(std::size_t k, std::size_t cin, std::size_t cout,
                          Activation act = Activation::linear);
  static LayerSpec conv3d(std::size_t k, std::size_t cin, std::size_t cout,
                          Activation act = Activation::linear);
  static LayerSpec pool(std::size_t factor);
  static LayerSpec up(std::size_t factor);
  static LayerSpec dense(std::size_t in, std::size_t out, Activation act = Activation::linear);
  static LayerSpec act(Activation a);
  static LayerSpec reshape_to(Shape target);
  static LayerSpec pad(std::size_t width, double value);

  // Throws ShapeError on even kernels, zero factors or zero channels.
  void validate() const;
  // Number of trainable scalars.
  std::size_t parameter_count() const;
};

std::string to_string(const LayerSpec& spec);
LayerSpec parse_layer_spec(const std::string& line);

// ---------------------------------------------------------------------------
// Sequential network

struct NamedTensor {
  std::string name;
  Tensor value;
};

class Sequential {
 public:
  Sequential() = default;
  // Parameters are Glorot-uniform (or zero, per LayerSpec::init) from a
  // generator seeded with `seed`; biases start at zero.
  Sequential(std::vector<LayerSpec> specs, std::uint64_t seed);

  Tensor forward(const Tensor& input) const;

  const std::vector<LayerSpec>& specs() const { return specs_; }
  std::vector<Tensor> parameters() const;
  std::vector<NamedTensor> named_parameters(const std::string& prefix) const;
  std::size_t parameter_count() const;

  void set_trainable(bool on);
  void zero_grad();
  // Copies values from `tensors` by name; every parameter must be present.
  void load(const std::vector<NamedTensor>& tensors, const std::string& prefix);
  // FNV-1a hash over the raw bytes of every parameter value.
  std::uint64_t checksum() const;

 private:
  struct Slot {
    Tensor weight;
    Tensor bias;
  };
  std::vector<LayerSpec> specs_;
  std::vector<Slot> slots_;
};

// Uniform variates from mt19937_64 converted from raw bits, so sequences do
// not depend on the standard library's distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  // [0, 1)
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Integer in [lo, hi].
  std::int64_t integer(std::int64_t lo, std::int64_t hi) {
    const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<std::int64_t>(engine_() % span);
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace aeig::nn
