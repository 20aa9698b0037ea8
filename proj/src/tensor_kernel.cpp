#include "wsca/tensor_kernel.hpp"

#include <cmath>

namespace wsca {

ImmaState ImmaState::zeroed(ImmaShape shape, int32_t accumulator_bias) {
  shape.validate();
  ImmaState s;
  s.shape = shape;
  s.accumulators.assign(size_t(shape.m) * shape.n, accumulator_bias);
  s.inputs.assign(size_t(shape.m) * shape.k, 0);
  s.weights.assign(size_t(shape.k) * shape.n, 0);
  return s;
}

void ImmaState::validate() const {
  shape.validate();
  require(accumulators.size() == size_t(shape.m) * shape.n, Err::DimMismatch,
          "accumulator grid must be m*n");
  require(inputs.size() == size_t(shape.m) * shape.k, Err::DimMismatch, "inputs must be m*k");
  require(weights.size() == size_t(shape.k) * shape.n, Err::DimMismatch, "weights must be k*n");
}

ImmaStepResult imma_step(const ImmaState& s) {
  s.validate();
  ImmaStepResult out;
  out.state = s;
  out.leakage.resize(s.accumulators.size());
  const int m = s.shape.m, n = s.shape.n, k = s.shape.k;
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      int32_t acc = s.acc(i, j);
      const uint32_t before = uint32_t(acc);
      for (int d = 0; d < k; ++d) acc = wrap_mac_i8(acc, s.in(i, d), s.wt(d, j));
      out.state.acc(i, j) = acc;
      out.leakage[size_t(i) * n + j] = make_leak(before, uint32_t(acc));
    }
  }
  return out;
}

HmmaResult hmma_dot(const HmmaState& s) {
  HmmaResult r;
  float acc = bf16_to_f32(s.weights[0]) * bf16_to_f32(s.inputs[0]);
  for (int i = 1; i < 8; ++i) acc += bf16_to_f32(s.weights[i]) * bf16_to_f32(s.inputs[i]);
  r.s_reg = acc;
  r.leak = make_leak(f32_bits(s.accumulator), f32_bits(acc));
  r.non_finite = !std::isfinite(acc);
  return r;
}

HmmaSplit hmma_decompose(const HmmaState& s, int target_index) {
  require(target_index >= 1 && target_index <= 8, Err::TargetOutOfRange,
          "target_index must be in 1..8");
  const int t = target_index - 1;
  HmmaSplit split;
  split.s1 = bf16_to_f32(s.weights[t]) * bf16_to_f32(s.inputs[t]);
  bool started = false;
  float acc = 0.0f;
  for (int i = 0; i < 8; ++i) {
    if (i == t) continue;
    const float prod = bf16_to_f32(s.weights[i]) * bf16_to_f32(s.inputs[i]);
    acc = started ? acc + prod : prod;
    started = true;
  }
  split.s2 = acc;
  return split;
}

double warp_power(std::span<const LeakagePoint> points) {
  require(!points.empty(), Err::EmptySet, "warp_power needs at least one register");
  double sum = 0.0;
  for (const auto& p : points) sum += p.hd;
  return sum;
}

} // namespace wsca
