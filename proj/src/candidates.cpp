#include "wsca/candidates.hpp"

#include <cmath>

namespace wsca {

CandidateSpace int8_space() {
  CandidateSpace sp;
  sp.kind = CandidateSpace::Kind::Int8Full;
  sp.values.reserve(256);
  for (int v = -128; v <= 127; ++v) sp.values.push_back(v);
  return sp;
}

CandidateSpace enumerate_bf16(double lo, double hi, bool include_negative) {
  require(lo >= 0.0 && lo <= hi, Err::BadRange, "need 0 <= lo <= hi");
  CandidateSpace sp;
  sp.kind = CandidateSpace::Kind::Bf16Range;
  sp.lo = lo;
  sp.hi = hi;
  sp.include_negative = include_negative;
  for (uint32_t p = 0; p < 65536; ++p) {
    const auto bits = uint16_t(p);
    if (!bf16_is_finite(bits)) continue;
    if (!include_negative && bf16_is_negative(bits)) continue;
    const double mag = std::abs(double(bf16_to_f32(bits)));
    if (mag >= lo && mag < hi) sp.values.push_back(int64_t(bits));
  }
  return sp;
}

} // namespace wsca
