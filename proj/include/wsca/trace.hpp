#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "wsca/errors.hpp"

namespace wsca {

enum class Dtype : uint8_t { F32 = 0, I16 = 1, I8 = 2 };

// Row-major matrix of leakage samples. Values are held as binary32 in memory
// regardless of the on-disk dtype; narrow dtypes hold integral values only.
struct TraceSet {
  uint64_t n_traces = 0;
  uint64_t n_samples = 0;
  Dtype dtype = Dtype::F32;
  std::vector<float> samples;

  static TraceSet zeros(uint64_t n_traces, uint64_t n_samples, Dtype dtype = Dtype::F32) {
    TraceSet ts;
    ts.n_traces = n_traces;
    ts.n_samples = n_samples;
    ts.dtype = dtype;
    ts.samples.assign(size_t(n_traces) * n_samples, 0.0f);
    return ts;
  }

  void validate() const {
    require(samples.size() == size_t(n_traces) * n_samples, Err::DimMismatch,
            "sample payload does not match n_traces*n_samples");
  }

  float& at(uint64_t t, uint64_t s) { return samples[size_t(t) * n_samples + s]; }
  float at(uint64_t t, uint64_t s) const { return samples[size_t(t) * n_samples + s]; }

  std::span<float> row(uint64_t t) { return {samples.data() + size_t(t) * n_samples, size_t(n_samples)}; }
  std::span<const float> row(uint64_t t) const {
    return {samples.data() + size_t(t) * n_samples, size_t(n_samples)};
  }
};

} // namespace wsca
