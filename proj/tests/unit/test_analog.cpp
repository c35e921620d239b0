#include <random>

#include "artemis/analog_accumulator.hpp"
#include "artemis/error.hpp"
#include "doctest.h"

using namespace artemis;
using namespace artemis::analog;

TEST_CASE("default accumulator takes exactly twenty products") {
  MomcapConfig cfg;
  MomcapState st;
  for (int i = 0; i < 20; ++i) {
    st = accumulate(st, 100, cfg);
    REQUIRE_FALSE(st.saturated);
  }
  CHECK(st.level == 2000);
  st = accumulate(st, 100, cfg);
  CHECK(st.saturated);
  CHECK(st.level == 2000);
  CHECK(st.count == 20);
}

TEST_CASE("accumulation is additive before saturation") {
  MomcapConfig cfg;
  std::mt19937_64 rng(11);
  for (int s = 0; s < 2000; ++s) {
    MomcapState st;
    int sum = 0;
    const int n = 1 + static_cast<int>(rng() % 20);
    for (int i = 0; i < n; ++i) {
      const int p = static_cast<int>(rng() % 129);
      st = accumulate(st, p, cfg);
      sum += p;
    }
    REQUIRE(st.level == sum);
    REQUIRE(st.count == n);
  }
}

TEST_CASE("popcount outside 0..128 is a range error") {
  MomcapConfig cfg;
  CHECK_THROWS_AS(accumulate(MomcapState{}, 129, cfg), Error);
  CHECK_THROWS_AS(accumulate(MomcapState{}, -1, cfg), Error);
}

TEST_CASE("readout error stays within half a code over all levels") {
  MomcapConfig cfg;
  const int full = cfg.full_scale_level();
  CHECK(full == 2560);
  int prev = -1;
  for (int level = 0; level <= full; ++level) {
    const auto r = read_a_to_b(MomcapState{level, 1, false}, cfg);
    // |code/127 - level/2560| <= 1/254, compared exactly in integers.
    const long lhs = std::labs(2L * r.code * full - 2L * level * (cfg.readout_levels - 1));
    REQUIRE(lhs <= full);
    REQUIRE(r.code >= prev);
    prev = r.code;
  }
}

TEST_CASE("readout endpoints and value grid") {
  MomcapConfig cfg;
  CHECK(read_a_to_b(MomcapState{}, cfg).code == 0);
  const auto top = read_a_to_b(MomcapState{2560, 20, false}, cfg);
  CHECK(top.code == 127);
  CHECK(top.fraction == 1.0);
  CHECK(top.value.raw == 2560);
}

TEST_CASE("noise is deterministic per seed and key and averages to the configured level") {
  MomcapConfig cfg;
  cfg.noise_mae = 0.01;
  cfg.seed = 42;
  const MomcapState st{1280, 10, false};
  CHECK(read_a_to_b(st, cfg, 7).code == read_a_to_b(st, cfg, 7).code);
  double dev = 0.0;
  const int n = 20000;
  for (int k = 0; k < n; ++k) {
    dev += std::abs(read_a_to_b(st, cfg, static_cast<std::uint64_t>(k)).fraction - 0.5);
  }
  // Quantization adds at most half a code on top of the injected noise.
  CHECK(dev / n == doctest::Approx(0.01).epsilon(0.5));
}

TEST_CASE("reset clears the state") {
  CHECK(reset(MomcapState{50, 3, true}) == MomcapState{});
}

TEST_CASE("capacity table only knows the measured point by default") {
  CapacityTable t;
  CHECK(t.capacity_for(8.0) == 20);
  CHECK_THROWS_AS(t.capacity_for(16.0), Error);
  CHECK_THROWS_AS(t.capacity_for(2.0), Error);
  CHECK_THROWS_AS(t.capacity_for(41.0), Error);
  t.set(16.0, 40);
  CHECK(t.capacity_for(16.0) == 40);
}

TEST_CASE("invalid accumulator config is rejected") {
  MomcapConfig cfg;
  cfg.capacity = 0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = MomcapConfig{};
  cfg.readout_levels = 1;
  CHECK_THROWS_AS(cfg.validate(), Error);
}
