#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "wsca/scenario.hpp"
#include "wsca/trace.hpp"

namespace wsca {

// Per-site bookkeeping carried alongside a trace set. power_mean/power_std are
// Monte-Carlo estimates over the scenario's input distribution with weights at
// their planted values; synthesis centers the injected leakage on power_mean.
struct SiteInfo {
  int warp_id = 0;
  int sample_index = 0;
  int weight_column = 0;
  int parallel_results = 16;
  int span = 1;
  double power_mean = 0.0;
  double power_std = 0.0;
};

// Sidecar metadata binding every trace to its inputs and ground truth.
// Unknown sidecar keys are kept in `extra` and preserved on rewrite.
struct TraceMeta {
  std::optional<KernelScenario> scenario;
  uint64_t n_traces = 0;
  int samples_per_cycle = 1;
  std::vector<SiteInfo> sites;

  std::vector<int32_t> group_ids;      // per trace; empty = one group per trace
  std::vector<uint32_t> group_sizes;   // per group, filled by average_by_input
  std::vector<int32_t> jitter_offsets; // per trace (synthesis only)
  std::vector<std::vector<int32_t>> permutations; // per trace, shuffle only
  std::vector<int64_t> randomized_weight_bits;    // per trace, weight-randomize mode
  std::vector<uint64_t> non_finite_traces;

  // inputs[group][computation] -> flat operand record:
  //   imma: parallel_results * weights_per_kernel int8 values (row-major rows)
  //   hmma: parallel_results * 8 bf16 bit patterns (row-major rows)
  std::vector<std::vector<std::vector<int32_t>>> inputs;

  nlohmann::json extra = nlohmann::json::object();

  int32_t group_of(uint64_t t) const {
    return group_ids.empty() ? int32_t(t) : group_ids[size_t(t)];
  }
  size_t group_count() const {
    return group_ids.empty() ? size_t(n_traces) : inputs.size();
  }
};

nlohmann::json meta_to_json(const TraceMeta& meta);
TraceMeta meta_from_json(const nlohmann::json& j);
nlohmann::json scenario_to_json(const KernelScenario& sc);
KernelScenario scenario_from_json(const nlohmann::json& j);

// Binary trace file, little-endian:
// "KRKN" | u16 version=1 | u8 dtype (0=f32,1=i16,2=i8) | u8 reserved=0 |
// u64 n_traces | u64 n_samples | payload row-major.
// Metadata lives in a UTF-8 JSON sidecar at <path>.meta.json.
void write_trace_file(const std::string& path, const TraceSet& ts, const TraceMeta& meta);
std::pair<TraceSet, TraceMeta> read_trace_file(const std::string& path);

// "Valid"-mode moving average over window_cycles*samples_per_cycle samples;
// the output shrinks by window-1 and leak-site indices shift accordingly.
TraceSet moving_average(const TraceSet& ts, int window_cycles, int samples_per_cycle);
int moving_average_window(int window_cycles, int samples_per_cycle);
int remap_sample_after_moving_average(int sample_index, int window);
TraceMeta remap_meta_after_moving_average(const TraceMeta& meta, int window);

// One averaged trace per distinct input group, accumulated in binary64.
std::pair<TraceSet, TraceMeta> average_by_input(const TraceSet& ts, const TraceMeta& meta);

// Translate every trace by `offset` samples; vacated positions take the
// trace's own mean so correlation statistics stay unbiased there.
TraceSet shift(const TraceSet& ts, int offset);

} // namespace wsca
