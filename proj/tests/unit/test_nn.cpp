#include <cmath>
#include <random>

#include "doctest.h"
#include "pushgrasp/nn/adam.hpp"
#include "pushgrasp/nn/layers.hpp"
#include "pushgrasp/nn/qnet.hpp"
#include "support/checks.hpp"
#include "support/generators.hpp"

using namespace pushgrasp;
using namespace pushgrasp::nn;

namespace {

FeatureMap<double> random_map(int n, int c, int h, int w, std::mt19937_64& rng) {
  FeatureMap<double> x(n, c, h, w);
  for (Eigen::Index i = 0; i < x.data.size(); ++i) x.data.data()[i] = pgtest::uniform(rng, -1, 1);
  return x;
}

}  // namespace

TEST_CASE("conv2d matches a direct convolution") {
  std::mt19937_64 rng(1);
  Conv2d<double> conv(2, 3, 3, 2, 1);
  conv.init(rng);
  for (Eigen::Index i = 0; i < conv.bias.size(); ++i) conv.bias(i) = 0.1 * static_cast<double>(i);
  const FeatureMap<double> x = random_map(2, 2, 7, 6, rng);
  const FeatureMap<double> y = conv.forward(x, nullptr);
  REQUIRE(y.h == 4);
  REQUIRE(y.w == 3);
  for (int n = 0; n < 2; ++n) {
    for (int o = 0; o < 3; ++o) {
      for (int oy = 0; oy < y.h; ++oy) {
        for (int ox = 0; ox < y.w; ++ox) {
          double acc = conv.bias(o);
          for (int c = 0; c < 2; ++c) {
            for (int ky = 0; ky < 3; ++ky) {
              for (int kx = 0; kx < 3; ++kx) {
                const int iy = oy * 2 - 1 + ky;
                const int ix = ox * 2 - 1 + kx;
                if (iy < 0 || ix < 0 || iy >= 7 || ix >= 6) continue;
                acc += conv.weight(o, (c * 3 + ky) * 3 + kx) * x.at(n, c, iy, ix);
              }
            }
          }
          CHECK(y.at(n, o, oy, ox) == doctest::Approx(acc).epsilon(1e-12));
        }
      }
    }
  }
}

TEST_CASE("batch norm normalizes per channel in train mode and uses running stats otherwise") {
  std::mt19937_64 rng(2);
  BatchNorm<double> bn(3);
  FeatureMap<double> x = random_map(4, 3, 5, 5, rng);
  x.data.row(1).array() = x.data.row(1).array() * 3.0 + 2.0;
  BatchNorm<double>::Cache cache;
  const FeatureMap<double> y = bn.forward(x, Mode::train, &cache);
  for (int c = 0; c < 3; ++c) {
    const double mean = y.data.row(c).mean();
    const double var = (y.data.row(c).array() - mean).square().mean();
    CHECK(mean == doctest::Approx(0.0).scale(1.0).epsilon(1e-9));
    CHECK(var == doctest::Approx(1.0).epsilon(1e-3));
  }
  // Fresh running stats are (0, 1): inference is the identity up to eps.
  const FeatureMap<double> z = bn.forward(x, Mode::inference, nullptr);
  CHECK(z.data.isApprox(x.data / std::sqrt(1.0 + 1e-5), 1e-12));
  bn.update_running(cache);
  const double batch_mean = x.data.row(1).mean();
  CHECK(bn.running_mean(1) == doctest::Approx(0.1 * batch_mean));
}

TEST_CASE("bilinear upsample: constant maps stay constant and scatter is the adjoint of sample") {
  std::mt19937_64 rng(3);
  BilinearUpsample<double> up(8, 8, 16, 16);
  FeatureMap<double> c(1, 1, 8, 8);
  c.data.setConstant(0.7);
  const FeatureMap<double> cu = up.forward(c);
  CHECK((cu.data.array() - 0.7).abs().maxCoeff() < 1e-12);

  const FeatureMap<double> x = random_map(2, 1, 8, 8, rng);
  const FeatureMap<double> full = up.forward(x);
  for (int i = 0; i < 50; ++i) {
    const int img = pgtest::uniform_int(rng, 0, 1);
    const int oy = pgtest::uniform_int(rng, 0, 15);
    const int ox = pgtest::uniform_int(rng, 0, 15);
    CHECK(up.sample(x, img, oy, ox) == doctest::Approx(full.at(img, 0, oy, ox)));
    const double g = pgtest::uniform(rng, -1, 1);
    FeatureMap<double> dx(2, 1, 8, 8);
    up.scatter(dx, img, oy, ox, g);
    // <sample(x), g> == <x, scatter(g)>
    CHECK(up.sample(x, img, oy, ox) * g ==
          doctest::Approx((x.data.array() * dx.data.array()).sum()).epsilon(1e-12));
  }
}

TEST_CASE("huber loss values and slopes") {
  double g = 0;
  CHECK(huber(0.5, 0.0, 1.0, &g) == doctest::Approx(0.125));
  CHECK(g == doctest::Approx(0.5));
  CHECK(huber(3.0, 0.0, 1.0, &g) == doctest::Approx(2.5));
  CHECK(g == doctest::Approx(1.0));
  CHECK(huber(-3.0, 0.0, 1.0, &g) == doctest::Approx(2.5));
  CHECK(g == doctest::Approx(-1.0));
}

TEST_CASE("adam step matches the closed form for the first update") {
  AdamConfig cfg;
  cfg.learning_rate = 0.01;
  cfg.weight_decay = 0.1;
  Adam<double> opt(cfg);
  Eigen::VectorXd w(2), gw(2);
  w << 1.0, -2.0;
  gw << 0.5, 0.0;
  std::vector<ParamRef<double>> params = {{"w", w.data(), gw.data(), 2}};
  opt.step(params);
  // g = grad + wd * w; first step moves by lr * g / (|g| + eps).
  for (int i = 0; i < 2; ++i) {
    const double g = (i == 0 ? 0.5 : 0.0) + 0.1 * (i == 0 ? 1.0 : -2.0);
    const double expected = (i == 0 ? 1.0 : -2.0) - 0.01 * g / (std::abs(g) + 1e-8);
    CHECK(w(i) == doctest::Approx(expected).epsilon(1e-12));
  }
  CHECK(opt.steps() == 1);
}

TEST_CASE("gradient check on a miniature network") {
  const pgtest::GradCheckReport r = pgtest::gradient_check(20, 1e-4, 5);
  CHECK(r.checked == 20);
  CHECK(r.worst_relative_error <= 1e-3);
}

TEST_CASE("q network output shape and rotation batching") {
  const NetworkConfig cfg = pgtest::tiny_net(16);
  QNet net(cfg, 3);
  const SimConfig sim;
  const RotatedStack stack = build_rotated_stack(render(spawn_sparse_scene(5, 2, sim), 16, sim.max_object_height));
  const QMapStack q = forward(net, NetId::grasp, stack);
  CHECK(q.resolution() == 16);
  CHECK(q.all_finite());
  // A batch of one gives the same map as the batched pass.
  const auto single = net.forward(make_inputs<float>({&stack.views[6]}));
  for (int v = 0; v < 16; ++v) {
    for (int u = 0; u < 16; ++u) {
      CHECK(single.at(0, 0, v, u) == doctest::Approx(q.at(6, u, v)).epsilon(1e-5));
    }
  }
}

TEST_CASE("input shape mismatch is rejected") {
  const NetworkConfig cfg = pgtest::tiny_net(16);
  QNet net(cfg, 3);
  const SimConfig sim;
  const RotatedStack stack = build_rotated_stack(render(spawn_sparse_scene(5, 2, sim), 32, sim.max_object_height));
  CHECK_THROWS_AS(forward(net, NetId::grasp, stack), ConfigError);
}

TEST_CASE("network config validation") {
  NetworkConfig c;
  CHECK_NOTHROW(c.validate());
  c.pretrained_backbone = true;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = NetworkConfig{};
  c.tower_depth = 9;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = NetworkConfig{};
  c.tower_width = {};
  CHECK_THROWS_AS(c.validate(), ConfigError);
  CHECK(NetworkConfig{}.feature_resolution() == 32);
}

TEST_CASE("weight hash tracks parameter changes") {
  QNet a(pgtest::tiny_net(), 1);
  QNet b = a;
  CHECK(a.weight_hash() == b.weight_hash());
  b.parameters()[0].value[0] += 1.0f;
  CHECK(a.weight_hash() != b.weight_hash());
  CHECK(QNet(pgtest::tiny_net(), 1).weight_hash() == a.weight_hash());
}

TEST_CASE("overfitting one transition drives the loss down") {
  const pgtest::OverfitReport r = pgtest::overfit_one_sample(50, 9);
  CHECK(r.first_loss > 0.0);
  CHECK(r.last_loss <= 0.1 * r.first_loss);
}
