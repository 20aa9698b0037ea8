#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "wsca/errors.hpp"
#include "wsca/tensor_kernel.hpp"

namespace wsca {

enum class KernelKind { Imma, Hmma };

enum class InputMode {
  UniformRandom,  // fresh random operands at every active position
  FixedAll,       // one fixed operand set for every trace
  ChosenZero,     // imma: every active depth except the target forced to zero
  FixedNonTarget, // hmma: non-target operands fixed, target varies
};

enum class Countermeasure { None, Shuffle };

// One scheduled warp execution. The write-back smears over `span` consecutive
// samples; each of the `parallel_results` registers depends on the same weight.
struct WarpSite {
  int warp_id = 0;
  int sample_index = 0;
  int weight_column = 0;
  int parallel_results = 16;
  int span = 1;
};

// Full description of a simulated Tensor Core workload, sufficient to
// regenerate its trace set bit-for-bit from rng_seed.
struct KernelScenario {
  KernelKind kind = KernelKind::Imma;

  ImmaShape imma_shape{};
  std::vector<int8_t> imma_weights;      // k*n row-major ground truth
  std::array<uint16_t, 8> hmma_weights{}; // bf16 bit patterns

  int target_index = 0; // 0-based active depth (imma) / operand position (hmma)
  // Chained accumulation: the non-target depths were written to the register
  // by earlier instructions, so the emission at the site is
  // HD(prefix, prefix + w_target*x) rather than HD(bias, full sum).
  bool imma_chained = false;
  InputMode input_mode = InputMode::UniformRandom;
  int input_groups = 0; // 0: fresh inputs per trace; g>0: trace t uses group t%g

  int warp_count = 16; // 512 threads / 32
  std::vector<WarpSite> sites;
  int samples_per_cycle = 4;
  int trace_length = 64;

  double noise_sigma = 0.0;
  int jitter_max = 0; // uniform whole-trace shift in [-jitter_max, +jitter_max]
  double leak_gain = 1.0;
  double dc_level = 0.0; // constant baseline under every sample
  Countermeasure countermeasure = Countermeasure::None;
  bool randomize_target_weight = false; // fixed-vs-random weight populations

  int32_t accumulator_bias = 0;  // imma register contents before the step
  float hmma_accumulator = 0.0f; // hmma register contents before write-back

  uint64_t rng_seed = 1;

  // FixedAll overrides; drawn from the seed when left empty.
  std::vector<int8_t> fixed_inputs_imma;     // parallel_results * weights_per_kernel
  std::vector<uint16_t> fixed_inputs_hmma;   // parallel_results * 8

  void validate() const;
  int active_depth() const { return imma_shape.weights_per_kernel; }
  int effective_groups(uint64_t n_traces) const {
    if (input_mode == InputMode::FixedAll) return 1;
    return input_groups > 0 ? input_groups : int(n_traces);
  }
};

void validate_scenario(const KernelScenario& sc);

// Returns a copy with the shuffling countermeasure enabled: every trace draws
// a fresh uniform permutation of computations over warp sites.
KernelScenario apply_shuffle(KernelScenario sc);

// Ready-to-run single-site scenarios with seed-derived planted weights.
KernelScenario imma_demo_scenario(uint64_t seed);
KernelScenario hmma_demo_scenario(uint64_t seed);

const char* to_string(KernelKind k);
const char* to_string(InputMode m);
const char* to_string(Countermeasure c);
KernelKind kernel_kind_from_string(const std::string& s);
InputMode input_mode_from_string(const std::string& s);
Countermeasure countermeasure_from_string(const std::string& s);

} // namespace wsca
