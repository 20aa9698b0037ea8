#include "wsca/synth.hpp"

#include <cmath>
#include <numeric>

#include "wsca/rng.hpp"
#include "wsca/tensor_kernel.hpp"

namespace wsca {

namespace {

// Operand record for one computation instance (one warp's MMA issue):
// imma: parallel_results x active_depth int8; hmma: parallel_results x 8 bf16.
struct Operands {
  std::vector<int32_t> flat;
};

struct WeightView {
  // imma: active-depth weights of one kernel column; hmma: the 8 dot operands
  std::vector<int8_t> imma_col;
  std::array<uint16_t, 8> hmma{};
};

WeightView column_weights(const KernelScenario& sc, int column, std::optional<int64_t> override_bits) {
  WeightView wv;
  if (sc.kind == KernelKind::Imma) {
    const auto& sh = sc.imma_shape;
    wv.imma_col.resize(size_t(sh.weights_per_kernel));
    for (int d = 0; d < sh.weights_per_kernel; ++d)
      wv.imma_col[size_t(d)] = sc.imma_weights[size_t(d) * sh.n + column];
    if (override_bits) wv.imma_col[size_t(sc.target_index)] = int8_t(*override_bits);
  } else {
    wv.hmma = sc.hmma_weights;
    if (override_bits) wv.hmma[size_t(sc.target_index)] = uint16_t(*override_bits);
  }
  return wv;
}

Operands draw_operands(const KernelScenario& sc, const WarpSite& site, Rng& rng,
                       const Operands* fixed_master) {
  Operands op;
  const int rows = site.parallel_results;
  if (sc.kind == KernelKind::Imma) {
    const int depth = sc.active_depth();
    op.flat.assign(size_t(rows) * depth, 0);
    for (int r = 0; r < rows; ++r) {
      for (int d = 0; d < depth; ++d) {
        int32_t v = 0;
        switch (sc.input_mode) {
        case InputMode::UniformRandom:
          v = int32_t(rng.range(-128, 127));
          break;
        case InputMode::ChosenZero:
          v = (d == sc.target_index) ? int32_t(rng.range(-128, 127)) : 0;
          break;
        case InputMode::FixedAll:
        case InputMode::FixedNonTarget:
          v = fixed_master->flat[size_t(r) * depth + d];
          if (sc.input_mode == InputMode::FixedNonTarget && d == sc.target_index)
            v = int32_t(rng.range(-128, 127));
          break;
        }
        op.flat[size_t(r) * depth + d] = v;
      }
    }
  } else {
    op.flat.assign(size_t(rows) * 8, 0);
    for (int r = 0; r < rows; ++r) {
      for (int d = 0; d < 8; ++d) {
        uint16_t v = 0;
        switch (sc.input_mode) {
        case InputMode::UniformRandom:
        case InputMode::ChosenZero: // zeroed embeddings are not meaningful; treat as random
          v = f32_to_bf16(float(rng.uniform(-1.0, 1.0)));
          break;
        case InputMode::FixedAll:
        case InputMode::FixedNonTarget:
          v = uint16_t(fixed_master->flat[size_t(r) * 8 + d]);
          if (sc.input_mode == InputMode::FixedNonTarget && d == sc.target_index)
            v = f32_to_bf16(float(rng.uniform(-1.0, 1.0)));
          break;
        }
        op.flat[size_t(r) * 8 + d] = v;
      }
    }
  }
  return op;
}

Operands draw_fixed_master(const KernelScenario& sc, const WarpSite& site, int computation) {
  Operands op;
  const int rows = site.parallel_results;
  if (sc.kind == KernelKind::Imma) {
    const int depth = sc.active_depth();
    if (!sc.fixed_inputs_imma.empty()) {
      require(sc.fixed_inputs_imma.size() == size_t(rows) * depth, Err::DimMismatch,
              "fixed_inputs_imma must be parallel_results*active_depth");
      op.flat.assign(sc.fixed_inputs_imma.begin(), sc.fixed_inputs_imma.end());
      return op;
    }
    Rng rng = stream_rng(sc.rng_seed, Stream::FixedInputs, uint64_t(computation));
    op.flat.resize(size_t(rows) * depth);
    for (auto& v : op.flat) v = int32_t(rng.range(-128, 127));
  } else {
    if (!sc.fixed_inputs_hmma.empty()) {
      require(sc.fixed_inputs_hmma.size() == size_t(rows) * 8, Err::DimMismatch,
              "fixed_inputs_hmma must be parallel_results*8");
      op.flat.assign(sc.fixed_inputs_hmma.begin(), sc.fixed_inputs_hmma.end());
      return op;
    }
    Rng rng = stream_rng(sc.rng_seed, Stream::FixedInputs, uint64_t(computation));
    op.flat.resize(size_t(rows) * 8);
    for (auto& v : op.flat) v = f32_to_bf16(float(rng.uniform(-1.0, 1.0)));
  }
  return op;
}

double computation_power(const KernelScenario& sc, const WarpSite& site, const Operands& op,
                         const WeightView& wv, bool* non_finite) {
  const int rows = site.parallel_results;
  double power = 0.0;
  if (sc.kind == KernelKind::Imma) {
    const int depth = sc.active_depth();
    for (int r = 0; r < rows; ++r) {
      int32_t acc = sc.accumulator_bias;
      uint32_t before;
      if (sc.imma_chained) {
        // earlier instructions already accumulated the non-target depths
        for (int d = 0; d < depth; ++d)
          if (d != sc.target_index)
            acc = wrap_mac_i8(acc, int8_t(op.flat[size_t(r) * depth + d]),
                              wv.imma_col[size_t(d)]);
        before = uint32_t(acc);
        acc = wrap_mac_i8(acc, int8_t(op.flat[size_t(r) * depth + sc.target_index]),
                          wv.imma_col[size_t(sc.target_index)]);
      } else {
        before = uint32_t(acc);
        for (int d = 0; d < depth; ++d)
          acc = wrap_mac_i8(acc, int8_t(op.flat[size_t(r) * depth + d]),
                            wv.imma_col[size_t(d)]);
      }
      power += hamming_distance(before, uint32_t(acc));
    }
  } else {
    for (int r = 0; r < rows; ++r) {
      HmmaState st;
      st.weights = wv.hmma;
      for (int d = 0; d < 8; ++d) st.inputs[size_t(d)] = uint16_t(op.flat[size_t(r) * 8 + d]);
      st.accumulator = sc.hmma_accumulator;
      const HmmaResult res = hmma_dot(st);
      if (res.non_finite && non_finite) *non_finite = true;
      power += res.leak.hd;
    }
  }
  return power;
}

struct Prepared {
  std::vector<std::vector<Operands>> inputs; // [group][computation]
  std::vector<Operands> fixed_masters;       // [computation], fixed modes only
  std::vector<PowerStats> stats;             // [site]
};

Prepared prepare(const KernelScenario& sc, uint64_t n_traces) {
  Prepared prep;
  const size_t n_comp = sc.sites.size();

  const bool fixed_mode =
      sc.input_mode == InputMode::FixedAll || sc.input_mode == InputMode::FixedNonTarget;
  if (fixed_mode) {
    prep.fixed_masters.reserve(n_comp);
    for (size_t c = 0; c < n_comp; ++c)
      prep.fixed_masters.push_back(draw_fixed_master(sc, sc.sites[c], int(c)));
  }

  const int groups = sc.effective_groups(n_traces);
  prep.inputs.resize(size_t(groups));
  for (int g = 0; g < groups; ++g) {
    prep.inputs[size_t(g)].reserve(n_comp);
    for (size_t c = 0; c < n_comp; ++c) {
      Rng rng = stream_rng(sc.rng_seed, Stream::GroupInputs, uint64_t(g) * n_comp + c);
      prep.inputs[size_t(g)].push_back(
          draw_operands(sc, sc.sites[c], rng, fixed_mode ? &prep.fixed_masters[c] : nullptr));
    }
  }

  prep.stats.reserve(n_comp);
  for (size_t c = 0; c < n_comp; ++c)
    prep.stats.push_back(site_power_stats(sc, int(c)));
  return prep;
}

} // namespace

PowerStats site_power_stats(const KernelScenario& sc, int site_index, int n_mc) {
  validate_scenario(sc);
  require(site_index >= 0 && size_t(site_index) < sc.sites.size(), Err::SiteOutOfRange,
          "site index outside the scenario");
  const WarpSite& site = sc.sites[size_t(site_index)];
  const WeightView wv = column_weights(sc, site.weight_column, std::nullopt);

  const bool fixed_mode =
      sc.input_mode == InputMode::FixedAll || sc.input_mode == InputMode::FixedNonTarget;
  Operands master;
  if (fixed_mode) master = draw_fixed_master(sc, site, site_index);

  Rng rng = stream_rng(sc.rng_seed, Stream::MeanEstimate, uint64_t(site_index));
  double sum = 0.0, sumsq = 0.0;
  for (int i = 0; i < n_mc; ++i) {
    const Operands op = draw_operands(sc, site, rng, fixed_mode ? &master : nullptr);
    const double p = computation_power(sc, site, op, wv, nullptr);
    sum += p;
    sumsq += p * p;
  }
  PowerStats st;
  st.mean = sum / n_mc;
  const double var = std::max(0.0, sumsq / n_mc - st.mean * st.mean);
  st.stddev = std::sqrt(var);
  return st;
}

SynthResult synthesize(const KernelScenario& sc, uint64_t n_traces) {
  validate_scenario(sc);
  require(n_traces >= 1, Err::BadArgument, "n_traces must be >= 1");

  const Prepared prep = prepare(sc, n_traces);
  const size_t n_comp = sc.sites.size();
  const int groups = sc.effective_groups(n_traces);

  SynthResult out;
  out.traces = TraceSet::zeros(n_traces, uint64_t(sc.trace_length));
  TraceMeta& meta = out.meta;
  meta.scenario = sc;
  meta.n_traces = n_traces;
  meta.samples_per_cycle = sc.samples_per_cycle;
  for (size_t c = 0; c < n_comp; ++c) {
    const auto& s = sc.sites[c];
    meta.sites.push_back(SiteInfo{s.warp_id, s.sample_index, s.weight_column,
                                  s.parallel_results, s.span, prep.stats[c].mean,
                                  prep.stats[c].stddev});
  }
  if (groups < int(n_traces)) {
    meta.group_ids.resize(n_traces);
    for (uint64_t t = 0; t < n_traces; ++t) meta.group_ids[size_t(t)] = int32_t(t % uint64_t(groups));
  }
  meta.inputs.resize(size_t(groups));
  for (int g = 0; g < groups; ++g)
    for (size_t c = 0; c < n_comp; ++c) meta.inputs[size_t(g)].push_back(prep.inputs[size_t(g)][c].flat);
  meta.jitter_offsets.assign(n_traces, 0);

  // Powers are fixed per (group, computation) unless weights are re-drawn per
  // trace, so hoist them out of the trace loop in the common case.
  std::vector<std::vector<double>> group_power;
  std::vector<bool> group_non_finite(size_t(groups), false);
  if (!sc.randomize_target_weight) {
    group_power.resize(size_t(groups));
    for (int g = 0; g < groups; ++g) {
      group_power[size_t(g)].resize(n_comp);
      for (size_t c = 0; c < n_comp; ++c) {
        bool nf = false;
        const WeightView wv = column_weights(sc, sc.sites[c].weight_column, std::nullopt);
        group_power[size_t(g)][c] =
            computation_power(sc, sc.sites[c], prep.inputs[size_t(g)][c], wv, &nf);
        if (nf) group_non_finite[size_t(g)] = true;
      }
    }
  }

  std::vector<int32_t> perm_scratch;
  for (uint64_t t = 0; t < n_traces; ++t) {
    const int g = int(t % uint64_t(groups));
    auto row = out.traces.row(t);

    if (sc.noise_sigma > 0.0) {
      Rng noise = stream_rng(sc.rng_seed, Stream::Noise, t);
      for (auto& v : row) v = float(sc.dc_level + noise.gaussian(sc.noise_sigma));
    } else {
      for (auto& v : row) v = float(sc.dc_level);
    }

    int jitter = 0;
    if (sc.jitter_max > 0) {
      Rng jrng = stream_rng(sc.rng_seed, Stream::Jitter, t);
      jitter = int(jrng.range(-sc.jitter_max, sc.jitter_max));
    }
    meta.jitter_offsets[size_t(t)] = jitter;

    const int32_t* perm = nullptr;
    if (sc.countermeasure == Countermeasure::Shuffle) {
      perm_scratch.resize(n_comp);
      std::iota(perm_scratch.begin(), perm_scratch.end(), 0);
      Rng prng = stream_rng(sc.rng_seed, Stream::Shuffle, t);
      prng.shuffle(perm_scratch);
      meta.permutations.push_back(perm_scratch);
      perm = perm_scratch.data();
    }

    std::optional<int64_t> override_bits;
    if (sc.randomize_target_weight) {
      Rng wrng = stream_rng(sc.rng_seed, Stream::RandomWeight, t);
      if (sc.kind == KernelKind::Imma)
        override_bits = wrng.range(-128, 127);
      else
        override_bits = int64_t(f32_to_bf16(float(wrng.uniform(-1.0, 1.0))));
      meta.randomized_weight_bits.push_back(*override_bits);
    }

    bool nf = false;
    for (size_t s = 0; s < n_comp; ++s) {
      const size_t comp = perm ? size_t(perm[s]) : s;
      double power;
      if (sc.randomize_target_weight) {
        const WeightView wv =
            column_weights(sc, sc.sites[comp].weight_column, override_bits);
        power = computation_power(sc, sc.sites[comp], prep.inputs[size_t(g)][comp], wv, &nf);
      } else {
        power = group_power[size_t(g)][comp];
        nf = nf || group_non_finite[size_t(g)];
      }
      const double centered = sc.leak_gain * (power - prep.stats[comp].mean);
      const int base = sc.sites[s].sample_index + jitter;
      for (int u = 0; u < sc.sites[s].span; ++u) row[size_t(base + u)] += float(centered);
    }
    if (nf) meta.non_finite_traces.push_back(t);
  }
  return out;
}

SynthResult synthesize_far_field(const KernelScenario& sc, uint64_t n_traces,
                                 const RfChannelConfig& rf) {
  RfChannelConfig cfg = rf;
  if (cfg.baseband_rate_hz <= 0.0) cfg.baseband_rate_hz = cfg.passband_rate_hz;
  cfg.validate();

  KernelScenario clean = sc;
  const double rx_sigma = sc.noise_sigma;
  clean.noise_sigma = 0.0;
  SynthResult base = synthesize(clean, n_traces);

  SynthResult out;
  out.meta = base.meta;
  if (out.meta.scenario) out.meta.scenario->noise_sigma = rx_sigma;
  out.meta.extra["far_field"] = rf_to_json(cfg);
  out.traces = TraceSet::zeros(n_traces, 0);

  std::vector<double> envelope(size_t(sc.trace_length));
  for (uint64_t t = 0; t < n_traces; ++t) {
    auto row = base.traces.row(t);
    for (int s = 0; s < sc.trace_length; ++s) {
      envelope[size_t(s)] = row[size_t(s)];
      require(envelope[size_t(s)] >= 0.0, Err::BadArgument,
              "far-field envelope went negative; raise dc_level (see suggested_dc_level)");
    }
    const auto passband = modulate(envelope, cfg);
    const auto bb = zero_if_downconvert(passband, cfg);
    auto mag = envelope_magnitude(bb);
    if (rx_sigma > 0.0) {
      Rng noise = stream_rng(sc.rng_seed, Stream::Noise, t);
      for (auto& v : mag) v += noise.gaussian(rx_sigma);
    }
    if (t == 0) out.traces = TraceSet::zeros(n_traces, uint64_t(mag.size()));
    for (size_t s = 0; s < mag.size(); ++s) out.traces.at(t, s) = float(mag[s]);
  }
  return out;
}

double suggested_dc_level(const KernelScenario& sc, double margin_sigmas) {
  validate_scenario(sc);
  double worst = 0.0;
  for (size_t c = 0; c < sc.sites.size(); ++c) {
    const PowerStats st = site_power_stats(sc, int(c));
    worst = std::max(worst, sc.leak_gain * (st.mean + margin_sigmas * st.stddev));
  }
  return worst;
}

} // namespace wsca
