#include "wsca/scenario.hpp"

#include "wsca/rng.hpp"

namespace wsca {

void KernelScenario::validate() const { validate_scenario(*this); }

void validate_scenario(const KernelScenario& sc) {
  sc.imma_shape.validate();
  require(sc.trace_length >= 1, Err::BadArgument, "trace_length must be >= 1");
  require(sc.samples_per_cycle >= 1, Err::BadArgument, "samples_per_cycle must be >= 1");
  require(sc.noise_sigma >= 0.0, Err::BadArgument, "noise_sigma must be >= 0");
  require(sc.jitter_max >= 0, Err::BadArgument, "jitter_max must be >= 0");
  require(sc.input_groups >= 0, Err::BadArgument, "input_groups must be >= 0");
  require(!sc.sites.empty(), Err::SiteOutOfRange, "scenario needs at least one leak site");
  if (sc.kind == KernelKind::Imma) {
    require(!sc.imma_weights.empty(), Err::BadArgument, "imma scenario needs planted weights");
    require(sc.imma_weights.size() == size_t(sc.imma_shape.k) * sc.imma_shape.n,
            Err::DimMismatch, "imma weights must be k*n");
    require(sc.target_index >= 0 && sc.target_index < sc.active_depth(),
            Err::TargetOutOfRange, "imma target depth out of the loaded rows");
  } else {
    require(sc.target_index >= 0 && sc.target_index < 8, Err::TargetOutOfRange,
            "hmma target position must be in 0..7");
  }
  for (const auto& site : sc.sites) {
    require(site.warp_id >= 0 && site.warp_id < sc.warp_count, Err::SiteOutOfRange,
            "site warp id outside warp_count");
    require(site.parallel_results >= 1, Err::SiteOutOfRange, "parallel_results must be >= 1");
    if (sc.kind == KernelKind::Imma) {
      require(site.parallel_results <= sc.imma_shape.m, Err::SiteOutOfRange,
              "parallel_results cannot exceed the instruction's input rows");
      require(site.weight_column >= 0 && site.weight_column < sc.imma_shape.n,
              Err::SiteOutOfRange, "weight column outside the instruction shape");
    } else {
      require(site.parallel_results <= 64, Err::SiteOutOfRange,
              "parallel_results above the supported warp width");
    }
    require(site.span >= 1, Err::SiteOutOfRange, "site span must be >= 1");
    const int lo = site.sample_index - sc.jitter_max;
    const int hi = site.sample_index + site.span - 1 + sc.jitter_max;
    require(lo >= 0 && hi < sc.trace_length, Err::SiteOutOfRange,
            "leak site must stay within trace_length under maximal jitter");
  }
}

KernelScenario apply_shuffle(KernelScenario sc) {
  sc.countermeasure = Countermeasure::Shuffle;
  validate_scenario(sc);
  return sc;
}

KernelScenario imma_demo_scenario(uint64_t seed) {
  KernelScenario sc;
  sc.kind = KernelKind::Imma;
  sc.rng_seed = seed;
  sc.input_mode = InputMode::ChosenZero;
  sc.target_index = 0;
  sc.trace_length = 64;
  sc.samples_per_cycle = 4;
  sc.noise_sigma = 24.0;
  sc.sites = {WarpSite{0, 28, 0, 16, 1}};

  Rng rng = stream_rng(seed, Stream::Weights);
  const auto& sh = sc.imma_shape;
  sc.imma_weights.assign(size_t(sh.k) * sh.n, 0);
  for (int d = 0; d < sh.weights_per_kernel; ++d)
    for (int j = 0; j < sh.n; ++j) {
      int8_t w = 0;
      do {
        w = int8_t(rng.range(-128, 127));
      } while (w == 0);
      sc.imma_weights[size_t(d) * sh.n + j] = w;
    }
  return sc;
}

KernelScenario hmma_demo_scenario(uint64_t seed) {
  KernelScenario sc;
  sc.kind = KernelKind::Hmma;
  sc.rng_seed = seed;
  sc.input_mode = InputMode::UniformRandom;
  sc.target_index = 7;
  sc.trace_length = 32;
  sc.samples_per_cycle = 4;
  sc.noise_sigma = 8.0;
  sc.sites = {WarpSite{0, 12, 0, 16, 1}};

  Rng rng = stream_rng(seed, Stream::Weights);
  for (auto& w : sc.hmma_weights) {
    // magnitudes inside (1e-10, 1), the bf16 band neural-net weights live in
    float v = 0.0f;
    do {
      v = float(rng.uniform(-1.0, 1.0));
    } while (!(std::abs(v) > 1e-4f && std::abs(v) < 0.99f));
    w = f32_to_bf16(v);
  }
  return sc;
}

const char* to_string(KernelKind k) { return k == KernelKind::Imma ? "imma" : "hmma"; }

const char* to_string(InputMode m) {
  switch (m) {
  case InputMode::UniformRandom: return "uniform-random";
  case InputMode::FixedAll: return "fixed";
  case InputMode::ChosenZero: return "chosen-zero";
  case InputMode::FixedNonTarget: return "fixed-non-target";
  }
  return "unknown";
}

const char* to_string(Countermeasure c) {
  return c == Countermeasure::Shuffle ? "shuffle" : "none";
}

KernelKind kernel_kind_from_string(const std::string& s) {
  if (s == "imma") return KernelKind::Imma;
  if (s == "hmma") return KernelKind::Hmma;
  fail(Err::BadArgument, "unknown kernel kind: " + s);
}

InputMode input_mode_from_string(const std::string& s) {
  if (s == "uniform-random") return InputMode::UniformRandom;
  if (s == "fixed") return InputMode::FixedAll;
  if (s == "chosen-zero") return InputMode::ChosenZero;
  if (s == "fixed-non-target") return InputMode::FixedNonTarget;
  fail(Err::BadArgument, "unknown input mode: " + s);
}

Countermeasure countermeasure_from_string(const std::string& s) {
  if (s == "none") return Countermeasure::None;
  if (s == "shuffle") return Countermeasure::Shuffle;
  fail(Err::BadArgument, "unknown countermeasure: " + s);
}

} // namespace wsca
