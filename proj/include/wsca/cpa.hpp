#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "wsca/predict.hpp"

namespace wsca {

// Per-candidate, per-sample Pearson correlation surface. Zero-variance
// candidates and samples are flagged and their entries carry NaN; they are
// never silently dropped.
struct CpaResult {
  size_t n_candidates = 0;
  size_t n_samples = 0;
  std::vector<double> rho; // n_candidates * n_samples
  std::vector<uint8_t> candidate_excluded;
  std::vector<uint8_t> sample_excluded;
  std::vector<double> peak_abs;    // max |rho| over the window; NaN if excluded
  std::vector<double> peak_rho;    // signed rho at the peak
  std::vector<int64_t> peak_sample;
  ptrdiff_t truth_index = -1;
  uint64_t n_traces_used = 0;
  int window_lo = 0, window_hi = 0;

  double rho_at(size_t c, size_t s) const { return rho[c * n_samples + s]; }
};

// Streaming CPA over (candidate x sample) with one-pass binary64 accumulators
// (sums of x, y, xy, x^2, y^2). Accumulation runs in trace order per
// candidate, so the result is identical for any thread count.
CpaResult cpa(const TraceSet& ts, const TraceMeta& meta, const CandidateSpace& space,
              const AttackConfig& cfg, int threads = 1);

// Candidates whose peak strictly exceeds the truth's peak; ties do not count.
// Excluded candidates rank below every finite one.
int key_rank(const CpaResult& result, ptrdiff_t truth_index);
int key_rank(const CpaResult& result); // uses result.truth_index

struct RankCurve {
  std::vector<uint64_t> n_traces;
  std::vector<int> ranks;
};

// Per-candidate peak |rho| at every checkpoint, for correlation-evolution plots.
struct Evolution {
  std::vector<uint64_t> n_traces;
  std::vector<std::vector<float>> peak_abs;
};

RankCurve rank_curve(const TraceSet& ts, const TraceMeta& meta, const CandidateSpace& space,
                     const AttackConfig& cfg, uint64_t step, Evolution* evolution = nullptr);

// Smallest checkpoint from which the rank is 0 through the end of the curve.
std::optional<uint64_t> traces_to_rank0(const RankCurve& curve);

// Chosen-fixed-input attack on the unknown 32-bit s2 state: the same
// single-weight predictor swept over externally supplied s2 hypotheses.
// Desk-scale builds cap the hypothesis set; sweeping the full 2^32 state is
// out of reach and the cap documents that.
inline constexpr size_t kMaxS2Hypotheses = 65536;

struct S2Sweep {
  size_t best_hypothesis = 0;
  float best_s2 = 0.0f;
  size_t best_candidate = 0;
  double best_peak = 0.0;
  std::vector<double> peak_per_hypothesis;
};

S2Sweep cpa_fixed_s2_sweep(const TraceSet& ts, const TraceMeta& meta,
                           const CandidateSpace& space, const AttackConfig& cfg,
                           std::span<const float> s2_hypotheses, int threads = 1);

} // namespace wsca
