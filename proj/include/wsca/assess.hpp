#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "wsca/trace.hpp"

namespace wsca {

// Welch's t per sample between two trace populations. With align_range k > 0,
// group B is re-evaluated at every shift in [-k, k] (mean-fill edges, matching
// trace shift semantics) and each sample keeps the shift maximizing |t|.
struct TvlaReport {
  std::vector<double> t;          // signed t at the maximizing shift
  std::vector<int> best_shift;    // shift achieving it
  std::vector<uint8_t> degenerate; // both groups constant at this sample
  double threshold = 4.5;
  std::vector<size_t> exceed_indices;
  double max_abs_t = 0.0;
  size_t argmax_sample = 0;
};

TvlaReport tvla(const TraceSet& group_a, const TraceSet& group_b, int align_range = 0,
                double threshold = 4.5);

// Threshold segmentation of a non-negative envelope. Above-threshold runs
// separated by fewer than min_gap below-threshold samples merge into one.
struct EnvelopeSegmentation {
  double threshold = 0.0;
  int min_gap = 1;
};

struct Segment {
  size_t start = 0; // inclusive
  size_t end = 0;   // exclusive
  size_t duration() const { return end - start; }
};

std::vector<Segment> count_forward_passes(std::span<const double> envelope,
                                          const EnvelopeSegmentation& cfg);
std::vector<Segment> count_forward_passes(std::span<const float> envelope,
                                          const EnvelopeSegmentation& cfg);

// Total above-threshold duration per labeled envelope, with a non-strict
// monotonicity verdict over ascending batch size.
struct BatchLatencyRow {
  double batch = 0.0;
  double active_duration = 0.0;
  size_t segments = 0;
};

struct BatchLatencyTable {
  std::vector<BatchLatencyRow> rows; // sorted by batch
  bool monotone_nondecreasing = false;
};

BatchLatencyTable batch_latency(
    const std::vector<std::pair<double, std::vector<double>>>& labeled_envelopes,
    const EnvelopeSegmentation& cfg);

} // namespace wsca
