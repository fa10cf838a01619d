#include <cmath>
#include <filesystem>

#include "aeig/autoencoder.hpp"
#include "aeig/errors.hpp"
#include "doctest.h"
#include "grad_check.hpp"

using namespace aeig;
using ad::Tensor;

namespace {

std::vector<PowerMap> small_sin_maps(std::size_t n) {
  std::vector<PowerMap> maps;
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 2; ++b) {
      maps.push_back(gen_sinusoidal(0.125, a, b, GridGeometry::square(n)));
      maps.back().id = "m" + std::to_string(a) + std::to_string(b);
    }
  return maps;
}

std::vector<const PowerMap*> pointers(const std::vector<PowerMap>& maps) {
  std::vector<const PowerMap*> p;
  for (const auto& m : maps) p.push_back(&m);
  return p;
}

double reconstruction_mse(const ae::AEModel& m, const Tensor& x) {
  ad::NoGradScope no_grad;
  return ad::reduce_mean_square(ad::sub(m.reconstruct(x), x)).item();
}

}  // namespace

TEST_CASE("build_ae") {
  SUBCASE("64x64 with three stages has an 8x8 bottleneck") {
    auto m = ae::build_ae(GridGeometry::square(64));
    const auto& enc = m.encoder.specs();
    REQUIRE(enc.size() == 8);
    CHECK(enc[6].kind == nn::LayerKind::reshape);
    CHECK(enc[6].target == ad::Shape{8 * 8 * 16});
    CHECK(enc[7].out_channels == 32);
  }
  SUBCASE("parameter count by hand") {
    // encoder: 1->16 conv (160), two 16->16 convs (2320 each), dense 1024->32
    // decoder: dense 32->1024, three 16->16 convs, 16->1 conv (145)
    auto m = ae::build_ae(GridGeometry::square(64));
    CHECK(m.encoder.parameter_count() == 160 + 2 * 2320 + (1024 * 32 + 32));
    CHECK(m.decoder.parameter_count() == (32 * 1024 + 1024) + 3 * 2320 + 145);
  }
  SUBCASE("round-trip shape and latent length") {
    auto m = ae::build_ae(GridGeometry::square(16), {.latent_dim = 5, .channels = 4});
    Tensor x = Tensor::from({3, 16, 16, 1}, testing::random_values(3 * 256, 4, 0.0, 1.0));
    CHECK(m.encoder.forward(x).shape() == ad::Shape{3, 5});
    CHECK(m.reconstruct(x).shape() == x.shape());
  }
  SUBCASE("extents must divide by 2^stages") {
    CHECK_THROWS_AS(ae::build_ae(GridGeometry::square(36)), ShapeError);
    CHECK_THROWS_AS(ae::build_ae(GridGeometry::cube(16)), ShapeError);
    CHECK_NOTHROW(ae::build_ae(GridGeometry::square(36), {.stages = 2}));
  }
}

TEST_CASE("normalization") {
  Tensor q = Tensor::from({2, 3}, testing::random_values(6, 9, 0.0, 0.3));
  const double scale = 0.2718281828;
  Tensor back = ae::denormalize(ae::normalize(q, scale), scale);
  for (std::size_t i = 0; i < q.size(); ++i) CHECK(std::abs(back.at(i) - q.at(i)) <= 1e-12);
  CHECK_THROWS_AS(ae::normalize(q, 0.0), DomainError);
}

TEST_CASE("train_ae") {
  SUBCASE("single constant map is memorised") {
    PowerMap flat;
    flat.id = "flat";
    flat.geom = GridGeometry::square(8);
    flat.values.assign(64, 0.5);
    auto m = ae::build_ae(flat.geom);
    auto hist = ae::train_ae(m, ae::map_batch({&flat}, 1.0), {2000, 1e-3});
    REQUIRE(hist.size() == 2000);
    CHECK(hist.back().loss <= 1e-6);
  }
  SUBCASE("seeded runs repeat exactly") {
    const auto maps = small_sin_maps(16);
    const Tensor x = ae::map_batch(pointers(maps), 0.25);
    auto a = ae::build_ae(maps[0].geom, {.latent_dim = 6, .channels = 4}, 11);
    auto b = ae::build_ae(maps[0].geom, {.latent_dim = 6, .channels = 4}, 11);
    auto ha = ae::train_ae(a, x, {15, 1e-3});
    auto hb = ae::train_ae(b, x, {15, 1e-3});
    for (std::size_t e = 0; e < ha.size(); ++e) CHECK(ha[e].loss == hb[e].loss);
    CHECK(a.encoder.checksum() == b.encoder.checksum());
  }
  SUBCASE("loss trends down and beats the untrained model") {
    const auto maps = small_sin_maps(16);
    const Tensor x = ae::map_batch(pointers(maps), 0.25);
    auto m = ae::build_ae(maps[0].geom, {.latent_dim = 6, .channels = 4}, 3);
    const double untrained = reconstruction_mse(m, x);
    auto hist = ae::train_ae(m, x, {600, 1e-3});
    for (const auto& r : hist) REQUIRE(std::isfinite(r.loss));
    // 100-epoch moving average over the second half
    std::vector<double> ma;
    for (std::size_t e = 300; e + 100 <= hist.size(); ++e) {
      double s = 0.0;
      for (std::size_t i = e; i < e + 100; ++i) s += hist[i].loss;
      ma.push_back(s / 100.0);
    }
    for (std::size_t i = 1; i < ma.size(); ++i) CHECK(ma[i] <= ma[i - 1]);
    CHECK(reconstruction_mse(m, x) < untrained);
  }
  SUBCASE("non-finite loss aborts with diagnostics") {
    std::vector<double> v(256, 0.1);
    v[17] = std::nan("");
    auto m = ae::build_ae(GridGeometry::square(16), {.latent_dim = 4, .channels = 2});
    try {
      ae::train_ae(m, Tensor::from({1, 16, 16, 1}, v), {5, 1e-4});
      FAIL("expected NumericalError");
    } catch (const NumericalError& e) {
      const std::string what = e.what();
      CHECK(what.find("epoch 0") != std::string::npos);
      CHECK(what.find("lr 0.0001") != std::string::npos);
    }
  }
  SUBCASE("input grid mismatch") {
    auto m = ae::build_ae(GridGeometry::square(16), {.latent_dim = 4, .channels = 2});
    CHECK_THROWS_AS(ae::train_ae(m, Tensor::zeros({1, 8, 8, 1}), {1, 1e-4}), ShapeError);
  }
}

TEST_CASE("encode") {
  const auto maps = small_sin_maps(16);
  auto m = ae::build_ae(maps[0].geom, {.latent_dim = 7, .channels = 4}, 5);
  SUBCASE("deterministic, sized, and unrecorded") {
    ad::Graph g;
    ad::GraphScope scope(g);
    auto z1 = ae::encode(m, maps[2], 0.25);
    auto z2 = ae::encode(m, maps[2], 0.25);
    CHECK(z1.values.size() == 7);
    CHECK(z1.values == z2.values);
    CHECK(z1.map_id == maps[2].id);
    CHECK(g.size() == 0);
  }
  SUBCASE("batch rows equal single encodes") {
    Tensor z = ae::encode_batch(m, pointers(maps), 0.25);
    REQUIRE(z.shape() == ad::Shape{maps.size(), 7});
    for (std::size_t b = 0; b < maps.size(); ++b) {
      auto zb = ae::encode(m, maps[b], 0.25);
      for (std::size_t i = 0; i < 7; ++i) CHECK(z.at(b * 7 + i) == zb.values[i]);
    }
  }
  SUBCASE("grid mismatch") {
    auto other = gen_sinusoidal(0.1, 1, 1, GridGeometry::square(8));
    CHECK_THROWS_AS(ae::encode(m, other, 0.25), ShapeError);
  }
  SUBCASE("checkpoint round trip") {
    const auto path = std::filesystem::temp_directory_path() / "aeig_ae_test.ckpt";
    ae::save_ae(path, m, {{"normalization_max", "0.25"}});
    auto back = ae::load_ae(path);
    CHECK(back.geom == m.geom);
    CHECK(back.latent_dim() == 7);
    CHECK(back.encoder.checksum() == m.encoder.checksum());
    CHECK(back.decoder.checksum() == m.decoder.checksum());
    CHECK(ae::encode(back, maps[4], 0.25).values == ae::encode(m, maps[4], 0.25).values);
    std::filesystem::remove(path);
  }
}
