#include <doctest.h>

#include "wsca/rng.hpp"
#include "wsca/tensor_kernel.hpp"

#include "../support/oracles.hpp"

using namespace wsca;

namespace {

ImmaState random_state(uint64_t seed, int lo = -128, int hi = 127) {
  ImmaState st = ImmaState::zeroed();
  Rng rng(seed);
  for (auto& v : st.inputs) v = int8_t(rng.range(lo, hi));
  for (auto& v : st.weights) v = int8_t(rng.range(lo, hi));
  return st;
}

HmmaState random_hmma(uint64_t seed) {
  HmmaState st;
  Rng rng(seed);
  for (auto& w : st.weights) w = f32_to_bf16(float(rng.uniform(-2.0, 2.0)));
  for (auto& x : st.inputs) x = f32_to_bf16(float(rng.uniform(-2.0, 2.0)));
  return st;
}

} // namespace

TEST_CASE("hamming distance basics") {
  Rng rng(11);
  for (int i = 0; i < 200; ++i) {
    const auto a = uint32_t(rng.next());
    const auto b = uint32_t(rng.next());
    const int hd = hamming_distance(a, b);
    CHECK(hd == hamming_distance(b, a));
    CHECK(hd >= 0);
    CHECK(hd <= 32);
    CHECK(hd == oracles::slow_popcount(a ^ b));
    CHECK(hamming_distance(a, a) == 0);
    if (a != b) CHECK(hd > 0);
  }
}

TEST_CASE("bf16 widens losslessly and rounds to nearest even") {
  CHECK(bf16_to_f32(0x3F80) == 1.0f);
  CHECK(bf16_to_f32(0xBF80) == -1.0f);
  CHECK(bf16_to_f32(0x3F00) == 0.5f);
  CHECK(f32_to_bf16(1.0f) == 0x3F80);
  Rng rng(12);
  for (int i = 0; i < 500; ++i) {
    const auto bits = uint16_t(rng.next() & 0xFFFF);
    if (!bf16_is_finite(bits)) continue;
    CHECK(f32_to_bf16(bf16_to_f32(bits)) == bits); // round trip through f32 is exact
  }
}

TEST_CASE("imma_step: zero inputs leave accumulators untouched") {
  ImmaState st = ImmaState::zeroed();
  Rng rng(1);
  for (auto& w : st.weights) w = int8_t(rng.range(-128, 127));
  for (auto& a : st.accumulators) a = int32_t(rng.next());
  const auto res = imma_step(st);
  for (size_t i = 0; i < st.accumulators.size(); ++i) {
    CHECK(res.state.accumulators[i] == st.accumulators[i]);
    CHECK(res.leakage[i].hd == 0);
  }
}

TEST_CASE("imma_step: single product 5*3 = 15, hd 4") {
  ImmaState st = ImmaState::zeroed();
  st.in(0, 0) = 5;
  st.wt(0, 0) = 3;
  const auto res = imma_step(st);
  CHECK(res.state.acc(0, 0) == 15);
  CHECK(res.leakage[0].hd == 4); // popcount(0b1111)
  CHECK(res.leakage[0].value_before == 0);
  CHECK(res.leakage[0].value_after == 15);
}

TEST_CASE("imma_step matches the naive GEMM oracle") {
  for (uint64_t seed : {21u, 22u, 23u, 24u}) {
    ImmaState st = random_state(seed);
    Rng rng(seed ^ 0xABCD);
    for (auto& a : st.accumulators) a = int32_t(rng.next());
    const auto res = imma_step(st);
    const auto expect = oracles::naive_imma(st.accumulators, st.inputs, st.weights,
                                            st.shape.m, st.shape.n, st.shape.k);
    CHECK(res.state.accumulators == expect);
    for (size_t i = 0; i < expect.size(); ++i)
      CHECK(res.leakage[i].hd ==
            oracles::slow_popcount(uint32_t(st.accumulators[i]) ^ uint32_t(expect[i])));
  }
}

TEST_CASE("imma_step is linear over inputs without wrap") {
  for (uint64_t seed = 40; seed < 60; ++seed) {
    ImmaState a = random_state(seed, -30, 30);
    ImmaState b = random_state(seed + 1000, -30, 30);
    b.weights = a.weights;
    ImmaState sum = a;
    for (size_t i = 0; i < sum.inputs.size(); ++i)
      sum.inputs[i] = int8_t(a.inputs[i] + b.inputs[i]);
    const auto ra = imma_step(a), rb = imma_step(b), rs = imma_step(sum);
    for (size_t i = 0; i < rs.state.accumulators.size(); ++i)
      CHECK(rs.state.accumulators[i] ==
            ra.state.accumulators[i] + rb.state.accumulators[i]);
  }
}

TEST_CASE("chosen-zero inputs pin each column to one weight") {
  ImmaState st = random_state(77);
  const int target = 2;
  for (int i = 0; i < st.shape.m; ++i)
    for (int d = 0; d < st.shape.k; ++d)
      if (d != target) st.in(i, d) = 0;
  const auto res = imma_step(st);
  for (int i = 0; i < st.shape.m; ++i)
    for (int j = 0; j < st.shape.n; ++j)
      CHECK(res.state.acc(i, j) == int32_t(st.in(i, target)) * int32_t(st.wt(target, j)));
}

TEST_CASE("imma wrap matches two's complement") {
  ImmaState st = ImmaState::zeroed();
  st.acc(0, 0) = INT32_MAX;
  st.in(0, 0) = 1;
  st.wt(0, 0) = 1;
  const auto res = imma_step(st);
  CHECK(res.state.acc(0, 0) == INT32_MIN);
}

TEST_CASE("hmma_dot trivial cases") {
  HmmaState st;
  auto r = hmma_dot(st);
  CHECK(r.s_reg == 0.0f);
  CHECK(r.leak.hd == 0);

  st.weights[0] = f32_to_bf16(1.0f);
  for (auto& x : st.inputs) x = f32_to_bf16(0.5f);
  r = hmma_dot(st);
  CHECK(r.s_reg == 0.5f);
  CHECK(r.leak.value_after == f32_bits(0.5f));
}

TEST_CASE("hmma_dot matches the per-step extended-precision oracle") {
  for (uint64_t seed = 100; seed < 160; ++seed) {
    const HmmaState st = random_hmma(seed);
    float w[8], x[8];
    for (int i = 0; i < 8; ++i) {
      w[i] = bf16_to_f32(st.weights[size_t(i)]);
      x[i] = bf16_to_f32(st.inputs[size_t(i)]);
    }
    const float expect = oracles::hmma_stepwise_oracle(w, x, 8);
    const auto r = hmma_dot(st);
    CHECK(f32_bits(r.s_reg) == f32_bits(expect));
  }
}

TEST_CASE("hmma_dot flags non-finite propagation") {
  HmmaState st = random_hmma(7);
  st.weights[3] = 0x7FC0; // quiet NaN
  const auto r = hmma_dot(st);
  CHECK(r.non_finite);
}

TEST_CASE("hmma_dot is reproducible bit for bit") {
  const HmmaState st = random_hmma(5);
  const auto a = hmma_dot(st);
  const auto b = hmma_dot(st);
  CHECK(f32_bits(a.s_reg) == f32_bits(b.s_reg));
}

TEST_CASE("hmma_decompose splits the target term") {
  HmmaState st = random_hmma(200);

  SUBCASE("zero target input makes s1 vanish") {
    st.inputs[4] = 0;
    const auto split = hmma_decompose(st, 5);
    CHECK(split.s1 == 0.0f);
    // the zero term drops out of the chain, so s2 equals the full dot product
    CHECK(f32_bits(split.s2) == f32_bits(hmma_dot(st).s_reg));
  }

  SUBCASE("zero non-target inputs make s2 vanish") {
    for (int i = 0; i < 8; ++i)
      if (i != 4) st.inputs[size_t(i)] = 0;
    const auto split = hmma_decompose(st, 5);
    CHECK(split.s2 == 0.0f);
    CHECK(f32_bits(split.s1) == f32_bits(hmma_dot(st).s_reg));
  }

  SUBCASE("re-adding the target last reproduces the reordered dot") {
    for (uint64_t seed = 300; seed < 330; ++seed) {
      const HmmaState s = random_hmma(seed);
      for (int target = 1; target <= 8; ++target) {
        const auto split = hmma_decompose(s, target);
        // oracle: same dot product with the target term moved last
        float w[8], x[8];
        int pos = 0;
        for (int i = 0; i < 8; ++i) {
          if (i == target - 1) continue;
          w[pos] = bf16_to_f32(s.weights[size_t(i)]);
          x[pos] = bf16_to_f32(s.inputs[size_t(i)]);
          ++pos;
        }
        w[7] = bf16_to_f32(s.weights[size_t(target - 1)]);
        x[7] = bf16_to_f32(s.inputs[size_t(target - 1)]);
        const float reordered = oracles::hmma_stepwise_oracle(w, x, 8);
        CHECK(f32_bits(split.s2 + split.s1) == f32_bits(reordered));
      }
    }
  }

  SUBCASE("out-of-range target throws") {
    CHECK_THROWS_AS((void)hmma_decompose(st, 0), Error);
    CHECK_THROWS_AS((void)hmma_decompose(st, 9), Error);
  }
}

TEST_CASE("warp_power sums register distances") {
  CHECK_THROWS_AS((void)warp_power({}), Error);

  std::vector<LeakagePoint> pts(16);
  CHECK(warp_power(pts) == 0.0);

  pts.clear();
  pts.push_back(make_leak(0, 0b1111));
  pts.push_back(make_leak(0, 0b0111));
  CHECK(warp_power(pts) == 7.0);

  const ImmaState st = random_state(321);
  const auto res = imma_step(st);
  double naive = 0.0;
  for (size_t i = 0; i < res.leakage.size(); ++i)
    naive += oracles::slow_popcount(res.leakage[i].value_before ^ res.leakage[i].value_after);
  CHECK(warp_power(res.leakage) == naive);
}
