#pragma once

#include <span>
#include <vector>

#include "wsca/cpa.hpp"

namespace wsca {

enum class Combine {
  Sum,     // P_comb = sum of per-site predicted powers
  Product, // classic second-order alternative, not the default
};

enum class Preprocess {
  SquaredSum,      // t_c = (sum of site samples)^2
  CenteredProduct, // classic second-order alternative, not the default
};

// Two or more trace samples carrying leakage of the same weight, fused into a
// single virtual sample per trace.
struct HoConfig {
  std::vector<int> site_samples; // 2..S distinct sample indices
  Combine combine = Combine::Sum;
  Preprocess preprocess = Preprocess::SquaredSum;
};

double combine_predictions(std::span<const double> site_predictions,
                           Combine combine = Combine::Sum);

double preprocess_samples(std::span<const double> site_values,
                          Preprocess preprocess = Preprocess::SquaredSum,
                          std::span<const double> site_means = {});

// Streaming Pearson of (combined prediction, t_c); one virtual sample column.
CpaResult ho_cpa(const TraceSet& ts, const TraceMeta& meta, const CandidateSpace& space,
                 const AttackConfig& cfg, const HoConfig& ho);

RankCurve ho_rank_curve(const TraceSet& ts, const TraceMeta& meta, const CandidateSpace& space,
                        const AttackConfig& cfg, const HoConfig& ho, uint64_t step);

} // namespace wsca
