#include "aeig/layers.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>

#include <Eigen/Core>

#include "aeig/errors.hpp"

namespace aeig::nn {

using ad::attach;
using ad::make_result;
using ad::OpKind;
using ad::TensorImpl;
using ad::to_string;

namespace {

// Spatial view of a channels-last tensor, with 2D embedded as depth 1.
struct Grid {
  std::size_t batch = 0, x = 1, y = 1, z = 1, channels = 0;
  std::size_t dims = 0;

  std::size_t cells() const { return x * y * z; }
  std::size_t index(std::size_t b, std::size_t i, std::size_t j, std::size_t k) const {
    return ((b * x + i) * y + j) * z + k;
  }
};

Grid grid_of(const Shape& s, const char* op) {
  if (s.size() != 4 && s.size() != 5)
    throw ShapeError(std::string(op) + ": expected [batch, spatial..., channels] with 2 or 3 "
                     "spatial axes, got " + to_string(s));
  Grid g;
  g.dims = s.size() - 2;
  g.batch = s.front();
  g.channels = s.back();
  g.x = s[1];
  g.y = s[2];
  g.z = g.dims == 3 ? s[3] : 1;
  return g;
}

using Mat = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using ConstMat =
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

// Same-padded, stride-1 convolution lowered to a matrix product per batch
// entry: the column buffer holds, for every output cell, the kx*ky*kz*cin
// input values under the kernel (zero outside the grid).
struct ConvPlan {
  Grid in;
  std::size_t kx, ky, kz, cin, cout;

  std::size_t patch() const { return kx * ky * kz * cin; }

  ConstMat col_matrix(const double* col) const {
    return ConstMat(col, static_cast<Eigen::Index>(in.cells()), static_cast<Eigen::Index>(patch()));
  }

  // Visits (cell, tap, source cell or -1) in a fixed order.
  template <class F>
  void for_each(F&& f) const {
    const auto rx = static_cast<std::ptrdiff_t>(kx / 2), ry = static_cast<std::ptrdiff_t>(ky / 2),
               rz = static_cast<std::ptrdiff_t>(kz / 2);
    const auto X = static_cast<std::ptrdiff_t>(in.x), Y = static_cast<std::ptrdiff_t>(in.y),
               Z = static_cast<std::ptrdiff_t>(in.z);
    std::size_t cell = 0;
    for (std::ptrdiff_t i = 0; i < X; ++i)
      for (std::ptrdiff_t j = 0; j < Y; ++j)
        for (std::ptrdiff_t k = 0; k < Z; ++k, ++cell) {
          std::size_t tap = 0;
          for (std::ptrdiff_t a = -rx; a <= rx; ++a)
            for (std::ptrdiff_t c = -ry; c <= ry; ++c)
              for (std::ptrdiff_t d = -rz; d <= rz; ++d, ++tap) {
                const std::ptrdiff_t ii = i + a, jj = j + c, kk = k + d;
                const bool inside = ii >= 0 && ii < X && jj >= 0 && jj < Y && kk >= 0 && kk < Z;
                f(cell, tap, inside ? (ii * Y + jj) * Z + kk : std::ptrdiff_t{-1});
              }
        }
  }

  void im2col(const double* x, double* col) const {
    const std::size_t p = patch();
    for_each([&](std::size_t cell, std::size_t tap, std::ptrdiff_t srcc) {
      double* dst = col + cell * p + tap * cin;
      if (srcc < 0)
        std::fill(dst, dst + cin, 0.0);
      else
        std::memcpy(dst, x + static_cast<std::size_t>(srcc) * cin, cin * sizeof(double));
    });
  }

  void col2im_add(const double* col, double* gx) const {
    const std::size_t p = patch();
    for_each([&](std::size_t cell, std::size_t tap, std::ptrdiff_t srcc) {
      if (srcc < 0) return;
      const double* s = col + cell * p + tap * cin;
      double* d = gx + static_cast<std::size_t>(srcc) * cin;
      for (std::size_t c = 0; c < cin; ++c) d[c] += s[c];
    });
  }
};

Shape shape_of(const Grid& g) {
  if (g.dims == 2) return {g.batch, g.x, g.y, g.channels};
  return {g.batch, g.x, g.y, g.z, g.channels};
}

}  // namespace

// ---------------------------------------------------------------------------
// Convolution

Tensor conv_forward(const Tensor& input, const Tensor& kernel, const Tensor& bias) {
  const Grid in = grid_of(input.shape(), "conv");
  const Shape& ks = kernel.shape();
  if (ks.size() != in.dims + 2)
    throw ShapeError("conv: kernel " + to_string(ks) + " does not match input " +
                     to_string(input.shape()));
  const std::size_t kx = ks[0], ky = ks[1], kz = in.dims == 3 ? ks[2] : 1;
  const std::size_t cin = ks[ks.size() - 2], cout = ks.back();
  if (cin != in.channels)
    throw ShapeError("conv: kernel expects " + std::to_string(cin) + " input channels, input has " +
                     std::to_string(in.channels));
  if (bias.size() != cout)
    throw ShapeError("conv: bias length " + std::to_string(bias.size()) + " != " +
                     std::to_string(cout) + " output channels");
  if (kx % 2 == 0 || ky % 2 == 0 || kz % 2 == 0)
    throw ShapeError("conv: kernel extents must be odd, got " + to_string(ks));

  Grid out = in;
  out.channels = cout;
  const ConvPlan plan{in, kx, ky, kz, cin, cout};
  const double* src = input.data().data();
  std::vector<double> v(in.batch * in.cells() * cout);
  {
    std::vector<double> col(in.cells() * plan.patch());
    const ConstMat w(kernel.data().data(), static_cast<Eigen::Index>(plan.patch()),
                     static_cast<Eigen::Index>(cout));
    const Eigen::Map<const Eigen::RowVectorXd> bv(bias.data().data(), static_cast<Eigen::Index>(cout));
    for (std::size_t b = 0; b < in.batch; ++b) {
      plan.im2col(src + b * in.cells() * cin, col.data());
      Mat o(&v[b * in.cells() * cout], static_cast<Eigen::Index>(in.cells()),
            static_cast<Eigen::Index>(cout));
      o.noalias() = plan.col_matrix(col.data()) * w;
      o.rowwise() += bv;
    }
  }

  Tensor result = make_result(shape_of(out), std::move(v), {input, kernel, bias});
  auto pi = input.impl(), pk = kernel.impl(), pb = bias.impl();
  auto po = result.impl().get();
  attach(result, OpKind::conv, {input, kernel, bias}, [pi, pk, pb, po, plan] {
    const Grid& in = plan.in;
    const auto cells = static_cast<Eigen::Index>(in.cells());
    const auto cout = static_cast<Eigen::Index>(plan.cout);
    const auto patch = static_cast<Eigen::Index>(plan.patch());
    if (pb->requires_grad) {
      Eigen::Map<Eigen::RowVectorXd> gb(pb->grad.data(), cout);
      const ConstMat g(po->grad.data(), static_cast<Eigen::Index>(in.batch) * cells, cout);
      gb += g.colwise().sum();
    }
    const bool want_x = pi->requires_grad, want_w = pk->requires_grad;
    if (!want_x && !want_w) return;
    std::vector<double> col(in.cells() * plan.patch());
    const ConstMat w(pk->data.data(), patch, cout);
    for (std::size_t b = 0; b < in.batch; ++b) {
      const ConstMat g(po->grad.data() + b * in.cells() * plan.cout, cells, cout);
      if (want_w) {
        plan.im2col(pi->data.data() + b * in.cells() * plan.cin, col.data());
        Mat gw(pk->grad.data(), patch, cout);
        gw.noalias() += plan.col_matrix(col.data()).transpose() * g;
      }
      if (want_x) {
        Mat gcol(col.data(), cells, patch);
        gcol.noalias() = g * w.transpose();
        plan.col2im_add(col.data(), pi->grad.data() + b * in.cells() * plan.cin);
      }
    }
  });
  return result;
}

// ---------------------------------------------------------------------------
// Pooling and upsampling

Tensor maxpool(const Tensor& input, std::size_t factor) {
  const Grid in = grid_of(input.shape(), "maxpool");
  if (factor == 0) throw ShapeError("maxpool: factor must be positive");
  const std::size_t fz = in.dims == 3 ? factor : 1;
  if (in.x % factor || in.y % factor || in.z % fz)
    throw ShapeError("maxpool: extents " + to_string(input.shape()) + " not divisible by " +
                     std::to_string(factor));
  Grid out = in;
  out.x /= factor;
  out.y /= factor;
  out.z /= fz;
  const std::size_t C = in.channels;
  const double* x = input.data().data();
  std::vector<double> v(out.batch * out.cells() * C);
  std::vector<std::size_t> argmax(v.size());
  for (std::size_t b = 0; b < out.batch; ++b)
    for (std::size_t i = 0; i < out.x; ++i)
      for (std::size_t j = 0; j < out.y; ++j)
        for (std::size_t k = 0; k < out.z; ++k)
          for (std::size_t c = 0; c < C; ++c) {
            const std::size_t o = out.index(b, i, j, k) * C + c;
            bool first = true;
            for (std::size_t a = 0; a < factor; ++a)
              for (std::size_t e = 0; e < factor; ++e)
                for (std::size_t d = 0; d < fz; ++d) {
                  const std::size_t s =
                      in.index(b, i * factor + a, j * factor + e, k * fz + d) * C + c;
                  if (first || x[s] > v[o]) {
                    v[o] = x[s];
                    argmax[o] = s;
                    first = false;
                  }
                }
          }
  Tensor result = make_result(shape_of(out), std::move(v), {input});
  auto pi = input.impl();
  auto po = result.impl().get();
  attach(result, OpKind::maxpool, {input}, [pi, po, argmax = std::move(argmax)] {
    if (!pi->requires_grad) return;
    for (std::size_t o = 0; o < argmax.size(); ++o) pi->grad[argmax[o]] += po->grad[o];
  });
  return result;
}

Tensor upsample(const Tensor& input, std::size_t factor) {
  const Grid in = grid_of(input.shape(), "upsample");
  if (factor == 0) throw ShapeError("upsample: factor must be positive");
  const std::size_t fz = in.dims == 3 ? factor : 1;
  Grid out = in;
  out.x *= factor;
  out.y *= factor;
  out.z *= fz;
  const std::size_t C = in.channels;
  const double* x = input.data().data();
  std::vector<double> v(out.batch * out.cells() * C);
  for (std::size_t b = 0; b < out.batch; ++b)
    for (std::size_t i = 0; i < out.x; ++i)
      for (std::size_t j = 0; j < out.y; ++j)
        for (std::size_t k = 0; k < out.z; ++k) {
          const double* s = &x[in.index(b, i / factor, j / factor, k / fz) * C];
          std::copy(s, s + C, &v[out.index(b, i, j, k) * C]);
        }
  Tensor result = make_result(shape_of(out), std::move(v), {input});
  auto pi = input.impl();
  auto po = result.impl().get();
  attach(result, OpKind::upsample, {input}, [pi, po, in, out, factor, fz, C] {
    if (!pi->requires_grad) return;
    for (std::size_t b = 0; b < out.batch; ++b)
      for (std::size_t i = 0; i < out.x; ++i)
        for (std::size_t j = 0; j < out.y; ++j)
          for (std::size_t k = 0; k < out.z; ++k) {
            const std::size_t s = in.index(b, i / factor, j / factor, k / fz) * C;
            const std::size_t o = out.index(b, i, j, k) * C;
            for (std::size_t c = 0; c < C; ++c) pi->grad[s + c] += po->grad[o + c];
          }
  });
  return result;
}

// ---------------------------------------------------------------------------
// Padding and cropping

Tensor pad_constant(const Tensor& input, std::size_t width, double value) {
  const Grid in = grid_of(input.shape(), "pad");
  Grid out = in;
  out.x += 2 * width;
  out.y += 2 * width;
  const std::size_t wz = in.dims == 3 ? width : 0;
  out.z += 2 * wz;
  const std::size_t C = in.channels;
  std::vector<double> v(out.batch * out.cells() * C, value);
  const double* x = input.data().data();
  for (std::size_t b = 0; b < in.batch; ++b)
    for (std::size_t i = 0; i < in.x; ++i)
      for (std::size_t j = 0; j < in.y; ++j)
        for (std::size_t k = 0; k < in.z; ++k) {
          const double* s = &x[in.index(b, i, j, k) * C];
          std::copy(s, s + C, &v[out.index(b, i + width, j + width, k + wz) * C]);
        }
  Tensor result = make_result(shape_of(out), std::move(v), {input});
  auto pi = input.impl();
  auto po = result.impl().get();
  attach(result, OpKind::pad, {input}, [pi, po, in, out, width, wz, C] {
    if (!pi->requires_grad) return;
    for (std::size_t b = 0; b < in.batch; ++b)
      for (std::size_t i = 0; i < in.x; ++i)
        for (std::size_t j = 0; j < in.y; ++j)
          for (std::size_t k = 0; k < in.z; ++k) {
            const std::size_t s = in.index(b, i, j, k) * C;
            const std::size_t o = out.index(b, i + width, j + width, k + wz) * C;
            for (std::size_t c = 0; c < C; ++c) pi->grad[s + c] += po->grad[o + c];
          }
  });
  return result;
}

Tensor crop(const Tensor& input, std::size_t width) {
  const Grid in = grid_of(input.shape(), "crop");
  const std::size_t wz = in.dims == 3 ? width : 0;
  if (in.x <= 2 * width || in.y <= 2 * width || (in.dims == 3 && in.z <= 2 * wz))
    throw ShapeError("crop: cannot remove " + std::to_string(width) + " cells from each side of " +
                     to_string(input.shape()));
  Grid out = in;
  out.x -= 2 * width;
  out.y -= 2 * width;
  out.z -= 2 * wz;
  const std::size_t C = in.channels;
  std::vector<double> v(out.batch * out.cells() * C);
  const double* x = input.data().data();
  for (std::size_t b = 0; b < out.batch; ++b)
    for (std::size_t i = 0; i < out.x; ++i)
      for (std::size_t j = 0; j < out.y; ++j)
        for (std::size_t k = 0; k < out.z; ++k) {
          const double* s = &x[in.index(b, i + width, j + width, k + wz) * C];
          std::copy(s, s + C, &v[out.index(b, i, j, k) * C]);
        }
  Tensor result = make_result(shape_of(out), std::move(v), {input});
  auto pi = input.impl();
  auto po = result.impl().get();
  attach(result, OpKind::crop, {input}, [pi, po, in, out, width, wz, C] {
    if (!pi->requires_grad) return;
    for (std::size_t b = 0; b < out.batch; ++b)
      for (std::size_t i = 0; i < out.x; ++i)
        for (std::size_t j = 0; j < out.y; ++j)
          for (std::size_t k = 0; k < out.z; ++k) {
            const std::size_t s = in.index(b, i + width, j + width, k + wz) * C;
            const std::size_t o = out.index(b, i, j, k) * C;
            for (std::size_t c = 0; c < C; ++c) pi->grad[s + c] += po->grad[o + c];
          }
  });
  return result;
}

// ---------------------------------------------------------------------------
// LayerSpec

LayerSpec LayerSpec::conv2d(std::size_t k, std::size_t cin, std::size_t cout, Activation act) {
  LayerSpec s;
  s.kind = LayerKind::conv2d;
  s.kernel = {k, k};
  s.in_channels = cin;
  s.out_channels = cout;
  s.activation = act;
  return s;
}

LayerSpec LayerSpec::conv3d(std::size_t k, std::size_t cin, std::size_t cout, Activation act) {
  LayerSpec s = conv2d(k, cin, cout, act);
  s.kind = LayerKind::conv3d;
  s.kernel = {k, k, k};
  return s;
}

LayerSpec LayerSpec::pool(std::size_t factor) {
  LayerSpec s;
  s.kind = LayerKind::maxpool;
  s.factor = factor;
  return s;
}

LayerSpec LayerSpec::up(std::size_t factor) {
  LayerSpec s;
  s.kind = LayerKind::upsample;
  s.factor = factor;
  return s;
}

LayerSpec LayerSpec::dense(std::size_t in, std::size_t out, Activation act) {
  LayerSpec s;
  s.kind = LayerKind::dense;
  s.in_channels = in;
  s.out_channels = out;
  s.activation = act;
  return s;
}

LayerSpec LayerSpec::act(Activation a) {
  LayerSpec s;
  s.kind = LayerKind::activation;
  s.activation = a;
  return s;
}

LayerSpec LayerSpec::reshape_to(Shape target) {
  LayerSpec s;
  s.kind = LayerKind::reshape;
  s.target = std::move(target);
  return s;
}

LayerSpec LayerSpec::pad(std::size_t width, double value) {
  LayerSpec s;
  s.kind = LayerKind::pad;
  s.factor = width;
  s.pad_value = value;
  return s;
}

void LayerSpec::validate() const {
  switch (kind) {
    case LayerKind::conv2d:
    case LayerKind::conv3d: {
      const std::size_t dims = kind == LayerKind::conv2d ? 2 : 3;
      if (kernel.size() != dims)
        throw ShapeError("conv layer needs " + std::to_string(dims) + " kernel extents");
      for (auto k : kernel)
        if (k % 2 == 0) throw ShapeError("conv kernel extents must be odd");
      if (in_channels == 0 || out_channels == 0) throw ShapeError("conv channels must be positive");
      if (stride != 1) throw ShapeError("only stride 1 convolutions are supported");
      break;
    }
    case LayerKind::maxpool:
    case LayerKind::upsample:
      if (factor == 0) throw ShapeError("pool/upsample factor must be positive");
      break;
    case LayerKind::dense:
      if (in_channels == 0 || out_channels == 0) throw ShapeError("dense sizes must be positive");
      break;
    case LayerKind::reshape:
      if (target.empty()) throw ShapeError("reshape needs a target shape");
      break;
    default:
      break;
  }
}

std::size_t LayerSpec::parameter_count() const {
  switch (kind) {
    case LayerKind::conv2d:
    case LayerKind::conv3d: {
      std::size_t taps = 1;
      for (auto k : kernel) taps *= k;
      return taps * in_channels * out_channels + out_channels;
    }
    case LayerKind::dense:
      return in_channels * out_channels + out_channels;
    default:
      return 0;
  }
}

namespace {

const char* kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::conv2d: return "conv2d";
    case LayerKind::conv3d: return "conv3d";
    case LayerKind::maxpool: return "maxpool";
    case LayerKind::upsample: return "upsample";
    case LayerKind::dense: return "dense";
    case LayerKind::activation: return "activation";
    case LayerKind::reshape: return "reshape";
    case LayerKind::pad: return "pad";
  }
  return "?";
}

std::string join(const std::vector<std::size_t>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

std::vector<std::size_t> split_sizes(const std::string& s) {
  std::vector<std::size_t> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) out.push_back(std::stoull(tok));
  return out;
}

}  // namespace

std::string to_string(const LayerSpec& spec) {
  std::ostringstream os;
  os.precision(17);
  os << kind_name(spec.kind);
  if (!spec.kernel.empty()) os << " kernel=" << join(spec.kernel);
  os << " in=" << spec.in_channels << " out=" << spec.out_channels << " stride=" << spec.stride
     << " factor=" << spec.factor
     << " act=" << (spec.activation == Activation::tanh ? "tanh" : "linear");
  if (!spec.target.empty()) os << " target=" << join(spec.target);
  os << " pad=" << spec.pad_value << " init=" << (spec.init == Init::zeros ? "zeros" : "glorot");
  return os.str();
}

LayerSpec parse_layer_spec(const std::string& line) {
  std::istringstream is(line);
  std::string kind;
  is >> kind;
  LayerSpec s;
  if (kind == "conv2d") s.kind = LayerKind::conv2d;
  else if (kind == "conv3d") s.kind = LayerKind::conv3d;
  else if (kind == "maxpool") s.kind = LayerKind::maxpool;
  else if (kind == "upsample") s.kind = LayerKind::upsample;
  else if (kind == "dense") s.kind = LayerKind::dense;
  else if (kind == "activation") s.kind = LayerKind::activation;
  else if (kind == "reshape") s.kind = LayerKind::reshape;
  else if (kind == "pad") s.kind = LayerKind::pad;
  else throw ConfigError("unknown layer kind '" + kind + "'");
  std::string field;
  while (is >> field) {
    const auto eq = field.find('=');
    if (eq == std::string::npos) throw ConfigError("malformed layer field '" + field + "'");
    const std::string key = field.substr(0, eq), val = field.substr(eq + 1);
    if (key == "kernel") s.kernel = split_sizes(val);
    else if (key == "in") s.in_channels = std::stoull(val);
    else if (key == "out") s.out_channels = std::stoull(val);
    else if (key == "stride") s.stride = std::stoull(val);
    else if (key == "factor") s.factor = std::stoull(val);
    else if (key == "act") s.activation = val == "tanh" ? Activation::tanh : Activation::linear;
    else if (key == "target") s.target = split_sizes(val);
    else if (key == "pad") s.pad_value = std::stod(val);
    else if (key == "init") s.init = val == "zeros" ? Init::zeros : Init::glorot;
    else throw ConfigError("unknown layer field '" + key + "'");
  }
  s.validate();
  return s;
}

// ---------------------------------------------------------------------------
// Sequential

Sequential::Sequential(std::vector<LayerSpec> specs, std::uint64_t seed) : specs_(std::move(specs)) {
  Rng rng(seed);
  slots_.resize(specs_.size());
  for (std::size_t l = 0; l < specs_.size(); ++l) {
    const LayerSpec& s = specs_[l];
    s.validate();
    Shape wshape;
    std::size_t fan_in = 0, fan_out = 0;
    if (s.kind == LayerKind::conv2d || s.kind == LayerKind::conv3d) {
      std::size_t taps = 1;
      for (auto k : s.kernel) taps *= k;
      wshape = s.kernel;
      wshape.push_back(s.in_channels);
      wshape.push_back(s.out_channels);
      fan_in = taps * s.in_channels;
      fan_out = taps * s.out_channels;
    } else if (s.kind == LayerKind::dense) {
      wshape = {s.in_channels, s.out_channels};
      fan_in = s.in_channels;
      fan_out = s.out_channels;
    } else {
      continue;
    }
    std::vector<double> w(ad::numel(wshape), 0.0);
    if (s.init == Init::glorot) {
      const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
      for (auto& x : w) x = rng.uniform(-limit, limit);
    }
    slots_[l].weight = Tensor::parameter(wshape, std::move(w));
    slots_[l].bias = Tensor::parameter({s.out_channels}, std::vector<double>(s.out_channels, 0.0));
  }
}

Tensor Sequential::forward(const Tensor& input) const {
  Tensor x = input;
  for (std::size_t l = 0; l < specs_.size(); ++l) {
    const LayerSpec& s = specs_[l];
    switch (s.kind) {
      case LayerKind::conv2d:
      case LayerKind::conv3d:
        x = conv_forward(x, slots_[l].weight, slots_[l].bias);
        break;
      case LayerKind::dense:
        if (x.rank() != 2) x = ad::reshape(x, {x.extent(0), x.size() / x.extent(0)});
        x = ad::add_bias(ad::matmul(x, slots_[l].weight), slots_[l].bias);
        break;
      case LayerKind::maxpool:
        x = maxpool(x, s.factor);
        break;
      case LayerKind::upsample:
        x = upsample(x, s.factor);
        break;
      case LayerKind::reshape: {
        Shape shape{x.extent(0)};
        shape.insert(shape.end(), s.target.begin(), s.target.end());
        x = ad::reshape(x, shape);
        break;
      }
      case LayerKind::pad:
        x = pad_constant(x, s.factor, s.pad_value);
        break;
      case LayerKind::activation:
        break;
    }
    if (s.activation == Activation::tanh) x = ad::tanh(x);
  }
  return x;
}

std::vector<Tensor> Sequential::parameters() const {
  std::vector<Tensor> out;
  for (const auto& slot : slots_)
    if (slot.weight.defined()) {
      out.push_back(slot.weight);
      out.push_back(slot.bias);
    }
  return out;
}

std::vector<NamedTensor> Sequential::named_parameters(const std::string& prefix) const {
  std::vector<NamedTensor> out;
  for (std::size_t l = 0; l < slots_.size(); ++l)
    if (slots_[l].weight.defined()) {
      out.push_back({prefix + "layer" + std::to_string(l) + ".weight", slots_[l].weight});
      out.push_back({prefix + "layer" + std::to_string(l) + ".bias", slots_[l].bias});
    }
  return out;
}

std::size_t Sequential::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : parameters()) n += p.size();
  return n;
}

void Sequential::set_trainable(bool on) {
  for (auto& p : parameters()) p.set_requires_grad(on);
}

void Sequential::zero_grad() {
  for (auto& p : parameters()) p.zero_grad();
}

void Sequential::load(const std::vector<NamedTensor>& tensors, const std::string& prefix) {
  for (auto& [name, param] : named_parameters(prefix)) {
    auto it = std::find_if(tensors.begin(), tensors.end(),
                           [&](const NamedTensor& t) { return t.name == name; });
    if (it == tensors.end()) throw ConfigError("checkpoint is missing parameter '" + name + "'");
    if (it->value.shape() != param.shape())
      throw ShapeError("checkpoint parameter '" + name + "' has shape " +
                       to_string(it->value.shape()) + ", model expects " + to_string(param.shape()));
    auto dst = param.mutable_data();
    std::copy(it->value.data().begin(), it->value.data().end(), dst.begin());
  }
}

std::uint64_t Sequential::checksum() const {
  std::uint64_t h = 1469598103934665603ULL;
  for (const auto& p : parameters())
    for (double x : p.data()) {
      unsigned char bytes[sizeof(double)];
      std::memcpy(bytes, &x, sizeof(double));
      for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
      }
    }
  return h;
}

}  // namespace aeig::nn
