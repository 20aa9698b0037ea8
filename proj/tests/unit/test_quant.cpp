#include <doctest.h>

#include <cmath>

#include "wsca/quant.hpp"
#include "wsca/rng.hpp"

using namespace wsca;

TEST_CASE("derive_scale follows the published formula") {
  const QuantScheme b8{8, 0, true};
  CHECK(derive_scale(std::vector<double>{1.0, -0.25}, b8) == 255.0);
  CHECK(derive_scale(std::vector<double>{0.5, 0.1}, b8) == 510.0);
  const QuantScheme b4{4, 0, true};
  CHECK(derive_scale(std::vector<double>{3.0, -1.0}, b4) == doctest::Approx(5.0));

  SUBCASE("the common convention sits behind the flag") {
    const QuantScheme alt{8, 0, false};
    CHECK(derive_scale(std::vector<double>{1.0}, alt) == 127.0);
  }
  SUBCASE("all-zero or empty blocks throw") {
    CHECK_THROWS_WITH_AS((void)derive_scale(std::vector<double>{0.0, 0.0}, b8),
                         doctest::Contains("AllZeroBlock"), Error);
    CHECK_THROWS_WITH_AS((void)derive_scale(std::vector<double>{}, b8),
                         doctest::Contains("AllZeroBlock"), Error);
  }
  SUBCASE("scale covariance: scaling the block divides q_s") {
    Rng rng(5);
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<double> block(16);
      for (auto& w : block) w = rng.uniform(-2.0, 2.0);
      if (std::all_of(block.begin(), block.end(), [](double w) { return w == 0.0; })) continue;
      const double alpha = rng.uniform(0.1, 10.0);
      std::vector<double> scaled = block;
      for (auto& w : scaled) w *= alpha;
      const double q1 = derive_scale(block, b8);
      const double q2 = derive_scale(scaled, b8);
      CHECK(q2 == doctest::Approx(q1 / alpha).epsilon(1e-12));
      // extremal element's code is invariant
      const auto c1 = quantize_block(block, b8);
      const auto c2 = quantize_block(scaled, b8);
      size_t ext = 0;
      for (size_t i = 1; i < block.size(); ++i)
        if (std::abs(block[i]) > std::abs(block[ext])) ext = i;
      CHECK(c1[ext] == c2[ext]);
      CHECK(std::abs(c1[ext]) == 255);
    }
  }
}

TEST_CASE("quantize/dequantize") {
  const QuantScheme b8{8, 0, true};
  SUBCASE("extremal magnitude maps back exactly") {
    Rng rng(7);
    for (int trial = 0; trial < 200; ++trial) {
      std::vector<double> block(32);
      for (auto& w : block) w = rng.uniform(-3.0, 3.0);
      const BlockQuant bq = derive_block(block, b8);
      size_t ext = 0;
      for (size_t i = 1; i < block.size(); ++i)
        if (std::abs(block[i]) > std::abs(block[ext])) ext = i;
      CHECK(bq.dequantize(bq.quantize(block[ext])) == block[ext]);
    }
  }
  SUBCASE("zero maps to code zero and back") {
    const BlockQuant bq = derive_block(std::vector<double>{1.0, 0.0}, b8);
    CHECK(bq.quantize(0.0) == 0);
    CHECK(bq.dequantize(0) == 0.0);
  }
  SUBCASE("round-trip error is bounded by half a step") {
    Rng rng(9);
    for (int trial = 0; trial < 100; ++trial) {
      std::vector<double> block(64);
      for (auto& w : block) w = rng.uniform(-1.0, 1.0);
      const BlockQuant bq = derive_block(block, b8);
      const double bound = 0.5 / bq.scale() * (1.0 + 1e-9);
      for (double w : block) CHECK(std::abs(bq.dequantize(bq.quantize(w)) - w) <= bound);
    }
  }
}

TEST_CASE("leakage_report") {
  const QuantScheme whole{8, 0, true};
  SUBCASE("whole-tensor scheme pins exactly one value") {
    const std::vector<double> w{0.5, -0.75, 0.25};
    const QuantLeakReport rep = leakage_report(w, whole);
    REQUIRE(rep.n_blocks == 1);
    CHECK(rep.blocks[0].pinned_value == -0.75);
    CHECK(rep.blocks[0].pinned_position == 1);
  }
  SUBCASE("block count matches the partition") {
    std::vector<double> w(4096);
    Rng rng(11);
    for (auto& v : w) v = rng.uniform(-1.0, 1.0);
    const QuantScheme blocks{8, 64, true};
    const QuantLeakReport rep = leakage_report(w, blocks);
    CHECK(rep.n_blocks == 64);
    CHECK(rep.bits_per_weight == doctest::Approx(std::log2(511.0)));
  }
  SUBCASE("pinned values equal the true block extrema on random tensors") {
    Rng rng(13);
    const QuantScheme blocks{8, 64, true};
    for (int tensor = 0; tensor < 25; ++tensor) {
      std::vector<double> w(1024);
      for (auto& v : w) v = rng.uniform(-4.0, 4.0);
      const QuantLeakReport rep = leakage_report(w, blocks);
      REQUIRE(rep.n_blocks == 16);
      for (const auto& b : rep.blocks) {
        size_t ext = b.offset;
        for (size_t i = b.offset; i < b.offset + b.count; ++i)
          if (std::abs(w[i]) > std::abs(w[ext])) ext = i;
        CHECK(b.pinned_value == w[ext]);
        CHECK(b.pinned_position == ext);
      }
    }
  }
  SUBCASE("report serializes") {
    const std::vector<double> w{0.5, -0.75, 0.25, 0.1};
    const auto j = report_to_json(leakage_report(w, QuantScheme{8, 2, true}));
    CHECK(j.at("n_blocks") == 2);
    CHECK(j.at("blocks").size() == 2);
  }
}
