#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "wsca/candidates.hpp"
#include "wsca/trace_io.hpp"

namespace wsca {

// Hypothetical warp power for an int8 candidate: sum over the parallel
// registers of HD(baseline, baseline + candidate*input), wrapping S32.
double predict_imma(int8_t candidate, std::span<const int8_t> inputs,
                    std::span<const int32_t> baselines);

// Known weights at the non-target operand positions of an HMMA dot product.
struct HmmaPrefix {
  std::array<uint16_t, 8> weights{};
  std::array<bool, 8> known{};
};

// Hypothetical power for a bf16 candidate over n_rows parallel dot products
// (rows_flat is n_rows*8 bf16 patterns). Either the prefix covers every
// non-target position (sequential mode, s2 recomputed per row) or fixed_s2
// supplies the chosen-fixed 32-bit state shared by all rows.
double predict_hmma(uint16_t candidate, std::span<const int32_t> rows_flat, int n_rows,
                    int target_index0, const HmmaPrefix& prefix, std::optional<float> fixed_s2,
                    float register_before);

struct AttackConfig {
  int site = 0;          // which recorded warp site to attack
  int target_index = -1; // 0-based; -1 takes the scenario's target
  int n_model = 0;       // predictor width: 0 = every parallel result, 1 = single register
  std::vector<std::pair<int, int8_t>> known_imma; // (depth, weight) already extracted
  std::optional<HmmaPrefix> hmma_prefix;
  std::optional<float> fixed_s2;
  int window_lo = 0, window_hi = -1; // peak-search window, hi=-1 means trace end
};

// Meta-driven prediction: resolves the attack mode against the recorded
// scenario once, then serves per-trace candidate predictions.
class Predictor {
public:
  Predictor(const TraceMeta& meta, const CandidateSpace& space, const AttackConfig& cfg);

  void predict(uint64_t trace_index, size_t cand_begin, size_t cand_end, double* out) const;
  double predict_one(uint64_t trace_index, size_t candidate) const;

  // Index of the planted weight in the candidate space; TruthNotInSpace if
  // ground truth is recorded but outside the space, -1 if no ground truth.
  ptrdiff_t truth_index() const { return truth_index_; }

  int target_index() const { return target_; }
  const SiteInfo& site() const { return *site_; }

private:
  const TraceMeta* meta_;
  const CandidateSpace* space_;
  AttackConfig cfg_;
  const SiteInfo* site_;
  int target_ = 0;
  int n_rows_ = 1;
  int depth_ = 4; // imma operand record depth
  bool imma_ = true;
  HmmaPrefix prefix_{};
  float hmma_before_ = 0.0f;
  int32_t imma_bias_ = 0;
  ptrdiff_t truth_index_ = -1;

  const std::vector<int32_t>& record_for(uint64_t trace_index) const;
};

} // namespace wsca
