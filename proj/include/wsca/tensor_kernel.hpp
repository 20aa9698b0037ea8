#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "wsca/bits.hpp"
#include "wsca/errors.hpp"

namespace wsca {

// Register-level model of the two Tensor Core MMA instructions we target.
// Both are pure functions of their operand state, so callers may invoke them
// concurrently without synchronization.

// IMMA.16816.S8.S8: 16x16 S8 inputs times 16x8 S8 weights accumulated into
// 16x8 S32 registers. Typical convolution lowerings load only 4 of the 16
// depth rows per kernel column for one instruction.
struct ImmaShape {
  int m = 16; // input rows
  int n = 8;  // weight columns (kernels)
  int k = 16; // dot-product depth
  int weights_per_kernel = 4;

  void validate() const {
    require(m > 0 && n > 0 && k > 0, Err::DimMismatch, "imma shape must be positive");
    require(weights_per_kernel >= 1 && weights_per_kernel <= k, Err::DimMismatch,
            "weights_per_kernel must be in [1, k]");
  }
};

// One register overwrite: old value, new value, and the bit flips between them.
struct LeakagePoint {
  uint32_t value_before = 0;
  uint32_t value_after = 0;
  int hd = 0;
};

inline LeakagePoint make_leak(uint32_t before, uint32_t after) {
  return LeakagePoint{before, after, hamming_distance(before, after)};
}

struct ImmaState {
  ImmaShape shape{};
  std::vector<int32_t> accumulators; // m*n row-major, partial sums s_d
  std::vector<int8_t> inputs;        // m*k row-major
  std::vector<int8_t> weights;       // k*n row-major

  static ImmaState zeroed(ImmaShape shape = {}, int32_t accumulator_bias = 0);
  void validate() const;

  int32_t& acc(int i, int j) { return accumulators[size_t(i) * shape.n + j]; }
  int32_t acc(int i, int j) const { return accumulators[size_t(i) * shape.n + j]; }
  int8_t& in(int i, int d) { return inputs[size_t(i) * shape.k + d]; }
  int8_t in(int i, int d) const { return inputs[size_t(i) * shape.k + d]; }
  int8_t& wt(int d, int j) { return weights[size_t(d) * shape.n + j]; }
  int8_t wt(int d, int j) const { return weights[size_t(d) * shape.n + j]; }
};

struct ImmaStepResult {
  ImmaState state;                   // accumulators advanced to s_{d+1}
  std::vector<LeakagePoint> leakage; // m*n grid of register overwrites
};

// One instruction issue: acc[i][j] += sum_d in[i][d]*wt[d][j], wrapping S32.
ImmaStepResult imma_step(const ImmaState& s);

// HMMA.1688.F32.BF16 register write-back: an 8-deep bfloat16 dot product
// accumulated in binary32, left to right, one rounding per add.
struct HmmaState {
  std::array<uint16_t, 8> weights{}; // bf16 bit patterns
  std::array<uint16_t, 8> inputs{};
  float accumulator = 0.0f; // register contents before the write-back
};

struct HmmaResult {
  float s_reg = 0.0f;
  LeakagePoint leak;
  bool non_finite = false; // NaN/Inf propagated per IEEE rules
};

HmmaResult hmma_dot(const HmmaState& s);

struct HmmaSplit {
  float s1 = 0.0f; // target term w_t * x_t
  float s2 = 0.0f; // all other terms, accumulated in index order with the target skipped
};

// target_index is 1-based, matching the w_1..w_8 operand positions.
HmmaSplit hmma_decompose(const HmmaState& s, int target_index);

// Sum of register-overwrite distances across results sharing one weight.
double warp_power(std::span<const LeakagePoint> points);

} // namespace wsca
