#include "wsca/predict.hpp"

#include <algorithm>

#include "wsca/tensor_kernel.hpp"

namespace wsca {

double predict_imma(int8_t candidate, std::span<const int8_t> inputs,
                    std::span<const int32_t> baselines) {
  require(inputs.size() == baselines.size(), Err::DimMismatch,
          "one baseline per parallel input");
  double power = 0.0;
  for (size_t i = 0; i < inputs.size(); ++i) {
    const int32_t before = baselines[i];
    const int32_t after = wrap_mac_i8(before, candidate, inputs[i]);
    power += hamming_distance(uint32_t(before), uint32_t(after));
  }
  return power;
}

double predict_hmma(uint16_t candidate, std::span<const int32_t> rows_flat, int n_rows,
                    int target_index0, const HmmaPrefix& prefix, std::optional<float> fixed_s2,
                    float register_before) {
  require(target_index0 >= 0 && target_index0 < 8, Err::TargetOutOfRange,
          "hmma target position must be in 0..7");
  require(rows_flat.size() >= size_t(n_rows) * 8, Err::DimMismatch,
          "operand record shorter than n_rows*8");
  if (!fixed_s2) {
    for (int i = 0; i < 8; ++i)
      require(i == target_index0 || prefix.known[size_t(i)], Err::InsufficientKnowledge,
              "need every non-target weight known, or a fixed s2 hypothesis");
  }
  const float cand = bf16_to_f32(candidate);
  const uint32_t before = f32_bits(register_before);
  double power = 0.0;
  for (int r = 0; r < n_rows; ++r) {
    const int32_t* row = rows_flat.data() + size_t(r) * 8;
    float s2;
    if (fixed_s2) {
      s2 = *fixed_s2;
    } else {
      bool started = false;
      s2 = 0.0f;
      for (int i = 0; i < 8; ++i) {
        if (i == target_index0) continue;
        const float prod =
            bf16_to_f32(prefix.weights[size_t(i)]) * bf16_to_f32(uint16_t(row[i]));
        s2 = started ? s2 + prod : prod;
        started = true;
      }
    }
    const float s1 = cand * bf16_to_f32(uint16_t(row[target_index0]));
    power += hamming_distance(before, f32_bits(s2 + s1));
  }
  return power;
}

namespace {

const KernelScenario& scenario_of(const TraceMeta& meta) {
  require(meta.scenario.has_value(), Err::InsufficientKnowledge,
          "metadata carries no scenario; cannot build predictions");
  return *meta.scenario;
}

} // namespace

Predictor::Predictor(const TraceMeta& meta, const CandidateSpace& space, const AttackConfig& cfg)
    : meta_(&meta), space_(&space), cfg_(cfg) {
  const KernelScenario& sc = scenario_of(meta);
  require(cfg.site >= 0 && size_t(cfg.site) < meta.sites.size(), Err::SiteOutOfRange,
          "attack site outside the recorded site list");
  site_ = &meta.sites[size_t(cfg.site)];
  target_ = cfg.target_index >= 0 ? cfg.target_index : sc.target_index;
  imma_ = sc.kind == KernelKind::Imma;
  n_rows_ = cfg.n_model > 0 ? std::min(cfg.n_model, site_->parallel_results)
                            : site_->parallel_results;

  if (imma_) {
    require(space.kind == CandidateSpace::Kind::Int8Full, Err::BadArgument,
            "imma attacks use the int8 candidate space");
    depth_ = sc.active_depth();
    require(target_ >= 0 && target_ < depth_, Err::TargetOutOfRange,
            "target depth outside the loaded weights");
    imma_bias_ = sc.accumulator_bias;
    // Every non-target active depth must contribute a known baseline term:
    // either its inputs are zero by construction or its weight was extracted.
    std::array<bool, 64> covered{};
    for (auto [d, w] : cfg.known_imma) {
      (void)w;
      require(d >= 0 && d < depth_, Err::TargetOutOfRange, "known weight depth out of range");
      covered[size_t(d)] = true;
    }
    for (int d = 0; d < depth_; ++d) {
      if (d == target_ || covered[size_t(d)]) continue;
      const bool zero_by_construction =
          sc.input_mode == InputMode::ChosenZero && d != sc.target_index;
      require(zero_by_construction, Err::UnknownBaseline,
              "depth " + std::to_string(d) +
                  " has unknown weight and possibly nonzero inputs");
    }
    const int8_t truth = sc.imma_weights[size_t(target_) * sc.imma_shape.n +
                                         site_->weight_column];
    truth_index_ = space.index_of(int64_t(truth));
  } else {
    require(space.kind == CandidateSpace::Kind::Bf16Range, Err::BadArgument,
            "hmma attacks use a bf16 candidate space");
    require(target_ >= 0 && target_ < 8, Err::TargetOutOfRange,
            "hmma target position must be in 0..7");
    depth_ = 8;
    hmma_before_ = sc.hmma_accumulator;
    if (cfg.hmma_prefix) {
      prefix_ = *cfg.hmma_prefix;
    } else if (!cfg.fixed_s2) {
      fail(Err::InsufficientKnowledge,
           "hmma attack needs a known prefix or a fixed s2 hypothesis");
    }
    if (!cfg.fixed_s2)
      for (int i = 0; i < 8; ++i)
        require(i == target_ || prefix_.known[size_t(i)], Err::InsufficientKnowledge,
                "prefix must cover every non-target position");
    truth_index_ = space.index_of(int64_t(sc.hmma_weights[size_t(target_)]));
  }
  require(!meta.inputs.empty(), Err::InsufficientKnowledge, "metadata records no inputs");
}

const std::vector<int32_t>& Predictor::record_for(uint64_t trace_index) const {
  const size_t g = size_t(meta_->group_of(trace_index));
  require(g < meta_->inputs.size(), Err::DimMismatch, "trace group outside input records");
  const auto& comp = meta_->inputs[g];
  require(size_t(cfg_.site) < comp.size(), Err::SiteOutOfRange,
          "input record missing for the attack site");
  return comp[size_t(cfg_.site)];
}

double Predictor::predict_one(uint64_t trace_index, size_t candidate) const {
  double out = 0.0;
  predict(trace_index, candidate, candidate + 1, &out);
  return out;
}

void Predictor::predict(uint64_t trace_index, size_t cand_begin, size_t cand_end,
                        double* out) const {
  const std::vector<int32_t>& rec = record_for(trace_index);
  if (imma_) {
    // Baselines are shared by every candidate; compute them once per trace.
    std::array<int32_t, 64> baselines;
    std::array<int8_t, 64> xs;
    for (int r = 0; r < n_rows_; ++r) {
      int32_t base = imma_bias_;
      for (auto [d, w] : cfg_.known_imma)
        base = wrap_mac_i8(base, int8_t(rec[size_t(r) * depth_ + d]), w);
      baselines[size_t(r)] = base;
      xs[size_t(r)] = int8_t(rec[size_t(r) * depth_ + target_]);
    }
    for (size_t c = cand_begin; c < cand_end; ++c) {
      const auto cand = int8_t(space_->values[c]);
      double power = 0.0;
      for (int r = 0; r < n_rows_; ++r) {
        const int32_t before = baselines[size_t(r)];
        const int32_t after = wrap_mac_i8(before, cand, xs[size_t(r)]);
        power += hamming_distance(uint32_t(before), uint32_t(after));
      }
      out[c - cand_begin] = power;
    }
  } else {
    // s2 per row is candidate-independent; hoist it out of the candidate loop.
    std::array<float, 64> s2s;
    std::array<float, 64> xts;
    for (int r = 0; r < n_rows_; ++r) {
      const int32_t* row = rec.data() + size_t(r) * 8;
      float s2 = 0.0f;
      if (cfg_.fixed_s2) {
        s2 = *cfg_.fixed_s2;
      } else {
        bool started = false;
        for (int i = 0; i < 8; ++i) {
          if (i == target_) continue;
          const float prod =
              bf16_to_f32(prefix_.weights[size_t(i)]) * bf16_to_f32(uint16_t(row[i]));
          s2 = started ? s2 + prod : prod;
          started = true;
        }
      }
      s2s[size_t(r)] = s2;
      xts[size_t(r)] = bf16_to_f32(uint16_t(row[target_]));
    }
    const uint32_t before = f32_bits(hmma_before_);
    for (size_t c = cand_begin; c < cand_end; ++c) {
      const float cand = bf16_to_f32(uint16_t(space_->values[c]));
      double power = 0.0;
      for (int r = 0; r < n_rows_; ++r)
        power += hamming_distance(before, f32_bits(s2s[size_t(r)] + cand * xts[size_t(r)]));
      out[c - cand_begin] = power;
    }
  }
}

} // namespace wsca
