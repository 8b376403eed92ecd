#include <filesystem>
#include <fstream>
#include <string>

#include "doctest.h"
#include "pushgrasp/checkpoint.hpp"
#include "support/generators.hpp"

using namespace pushgrasp;
namespace fs = std::filesystem;

namespace {

fs::path temp_path(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "pushgrasp_ckpt_test";
  fs::create_directories(dir);
  return dir / name;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void dump(const fs::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << bytes;
}

// A pair that has taken optimizer steps, so Adam moments are non-trivial.
NetworkPair trained_pair(std::uint64_t seed) {
  NetworkPair nets(pgtest::tiny_net(16), nn::AdamConfig{}, seed);
  for (auto* net : {&nets.grasp, &nets.push}) {
    auto params = net->parameters();
    for (auto& p : params) p.grads().setConstant(0.01f);
    (net == &nets.grasp ? nets.grasp_opt : nets.push_opt).step(params);
  }
  return nets;
}

}  // namespace

TEST_CASE("save and load reproduce weights, optimizer and meta") {
  const NetworkPair nets = trained_pair(3);
  CheckpointMeta meta;
  meta.stage = "grasp_explore";
  meta.step = 1234;
  meta.episode = 56;
  meta.config_hash = "abcdef";
  meta.extra["grasp_threshold"] = "1.25";
  const fs::path path = temp_path("round.ckpt");
  save_weights(path.string(), nets, meta);

  NetworkPair loaded(pgtest::tiny_net(16), nn::AdamConfig{}, 99);
  const CheckpointMeta m = load_weights(path.string(), loaded);
  CHECK(loaded.grasp.weight_hash() == nets.grasp.weight_hash());
  CHECK(loaded.push.weight_hash() == nets.push.weight_hash());
  CHECK(loaded.grasp_opt.steps() == 1);
  CHECK(m.stage == "grasp_explore");
  CHECK(m.step == 1234);
  CHECK(m.episode == 56);
  CHECK(m.config_hash == "abcdef");
  CHECK(m.extra.at("grasp_threshold") == "1.25");
  CHECK(read_meta(path.string()).episode == 56);

  // Saving the loaded pair again gives identical bytes.
  const fs::path again = temp_path("again.ckpt");
  save_weights(again.string(), loaded, meta);
  CHECK(slurp(again) == slurp(path));
}

TEST_CASE("truncated and corrupt files are rejected without touching the target") {
  const NetworkPair nets = trained_pair(4);
  const fs::path path = temp_path("bad.ckpt");
  save_weights(path.string(), nets, CheckpointMeta{});
  const std::string good = slurp(path);

  NetworkPair target(pgtest::tiny_net(16), nn::AdamConfig{}, 7);
  const std::uint64_t before = target.grasp.weight_hash();
  for (std::size_t cut : {std::size_t{0}, std::size_t{5}, good.size() / 2, good.size() - 1}) {
    dump(path, good.substr(0, cut));
    CHECK_THROWS_AS(load_weights(path.string(), target), CheckpointError);
    CHECK(target.grasp.weight_hash() == before);
  }
  std::string flipped = good;
  flipped[flipped.size() / 2] = static_cast<char>(flipped[flipped.size() / 2] ^ 0x40);
  dump(path, flipped);
  CHECK_THROWS_AS(load_weights(path.string(), target), CheckpointError);
  CHECK(target.grasp.weight_hash() == before);
  CHECK_THROWS_AS(load_weights(temp_path("missing.ckpt").string(), target), CheckpointError);
}

TEST_CASE("unsupported versions name both versions") {
  const NetworkPair nets = trained_pair(5);
  const fs::path path = temp_path("version.ckpt");
  save_weights(path.string(), nets, CheckpointMeta{});
  std::string bytes = slurp(path);
  // The u32 version follows the 4-byte magic.
  REQUIRE(bytes.size() > 8);
  bytes[4] = 9;
  dump(path, bytes);
  NetworkPair target(pgtest::tiny_net(16), nn::AdamConfig{}, 1);
  try {
    load_weights(path.string(), target);
    FAIL("expected a CheckpointError");
  } catch (const CheckpointError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("version 9") != std::string::npos);
    CHECK(msg.find("expected 1") != std::string::npos);
  }
}

TEST_CASE("shape mismatches are rejected") {
  const NetworkPair nets = trained_pair(6);
  const fs::path path = temp_path("shape.ckpt");
  save_weights(path.string(), nets, CheckpointMeta{});
  NetworkConfig other = pgtest::tiny_net(16);
  other.tower_width = {4, 8};
  NetworkPair target(other, nn::AdamConfig{}, 1);
  CHECK_THROWS_AS(load_weights(path.string(), target), CheckpointError);
}
