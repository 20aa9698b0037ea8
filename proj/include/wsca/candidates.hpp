#pragma once

#include <cstdint>
#include <vector>

#include "wsca/bits.hpp"
#include "wsca/errors.hpp"

namespace wsca {

// Enumerated weight hypotheses: either every int8 value, or the bfloat16 bit
// patterns whose magnitude falls in a band (lo inclusive, hi exclusive).
struct CandidateSpace {
  enum class Kind { Int8Full, Bf16Range };

  Kind kind = Kind::Int8Full;
  std::vector<int64_t> values; // int8 value, or bf16 bit pattern
  double lo = 0.0, hi = 0.0;   // Bf16Range parameters, echoed for reports
  bool include_negative = true;

  size_t size() const { return values.size(); }

  double decoded(size_t idx) const {
    return kind == Kind::Int8Full ? double(values[idx])
                                  : double(bf16_to_f32(uint16_t(values[idx])));
  }

  // Index of a candidate by its canonical integer; -1 if absent.
  ptrdiff_t index_of(int64_t raw) const {
    for (size_t i = 0; i < values.size(); ++i)
      if (values[i] == raw) return ptrdiff_t(i);
    return -1;
  }
};

CandidateSpace int8_space();

// Exact scan of all 65536 bf16 patterns: keep finite p with
// lo <= |value(p)| < hi, dropping negatives unless include_negative.
CandidateSpace enumerate_bf16(double lo, double hi, bool include_negative);

} // namespace wsca
