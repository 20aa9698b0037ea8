#pragma once

#include <cstdint>

#include "wsca/rf_channel.hpp"
#include "wsca/scenario.hpp"
#include "wsca/trace_io.hpp"

namespace wsca {

struct SynthResult {
  TraceSet traces;
  TraceMeta meta;
};

struct PowerStats {
  double mean = 0.0;
  double stddev = 0.0;
};

// Monte-Carlo mean/std of a site's warp power over the scenario's input
// distribution with weights at their planted values. Synthesis centers the
// injected leakage on this mean, so noise_sigma scales against stddev.
PowerStats site_power_stats(const KernelScenario& sc, int site_index, int n_mc = 4096);

// trace[t][s] = dc_level
//             + sum over sites active at s (after the trace's jitter shift) of
//               leak_gain * (warp_power - power_mean)
//             + Gaussian(0, noise_sigma).
// Bit-reproducible for a fixed (scenario, n_traces): every random stream is
// derived from (rng_seed, purpose, index), independent of evaluation order.
SynthResult synthesize(const KernelScenario& sc, uint64_t n_traces);

// Same leakage model pushed through the far-field chain: the noiseless
// baseband envelope (dc_level must keep it non-negative) is modulated onto the
// carrier, attenuated, zero-IF downconverted, and noise_sigma is applied to
// the recovered envelope as receiver noise at baseband.
SynthResult synthesize_far_field(const KernelScenario& sc, uint64_t n_traces,
                                 const RfChannelConfig& rf);

// Smallest dc_level that keeps the far-field envelope non-negative for the
// scenario, with a safety margin in units of the power spread.
double suggested_dc_level(const KernelScenario& sc, double margin_sigmas = 8.0);

} // namespace wsca
