#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <json.hpp>

#include "wsca/errors.hpp"

namespace wsca {

// Symmetric affine quantization with the scale q_s = numerator / max|W_block|.
// The default keeps the full-range (2^b - 1) numerator; clearing the flag
// swaps in the more common signed-symmetric (2^(b-1) - 1) convention.
struct QuantScheme {
  int bits = 8;
  int64_t block_size = 0; // 0: whole tensor is one block
  bool full_range_numerator = true;

  int64_t code_limit() const {
    return full_range_numerator ? ((int64_t(1) << bits) - 1)
                                : ((int64_t(1) << (bits - 1)) - 1);
  }
  void validate() const {
    require(bits >= 2, Err::BadArgument, "quantization needs at least 2 bits");
    require(block_size >= 0, Err::BadArgument, "block_size must be >= 0");
  }
};

// Scale derived from one block. dequantize(quantize(w)) maps the
// extremal-magnitude element back to itself exactly.
struct BlockQuant {
  double max_abs = 0.0;
  int64_t code_limit = 0;

  double scale() const { return double(code_limit) / max_abs; }
  int64_t quantize(double w) const;
  double dequantize(int64_t code) const {
    return (double(code) / double(code_limit)) * max_abs;
  }
};

BlockQuant derive_block(std::span<const double> block, const QuantScheme& scheme);
double derive_scale(std::span<const double> block, const QuantScheme& scheme);

std::vector<int64_t> quantize_block(std::span<const double> block, const QuantScheme& scheme);
std::vector<double> dequantize_block(std::span<const int64_t> codes, const BlockQuant& bq);

// What the scheme alone hands an adversary: one pinned weight per block plus
// the residual code entropy for everything else.
struct BlockLeak {
  size_t block_index = 0;
  size_t offset = 0;
  size_t count = 0;
  double scale = 0.0;
  double max_abs = 0.0;
  double pinned_value = 0.0;  // dequantized extremal code == the block extremum
  size_t pinned_position = 0; // position of the extremal element within the tensor
};

struct QuantLeakReport {
  QuantScheme scheme;
  size_t n_weights = 0;
  size_t n_blocks = 0;       // == number of pinned weights
  double codes_per_weight = 0.0;
  double bits_per_weight = 0.0;
  std::vector<BlockLeak> blocks;
};

QuantLeakReport leakage_report(std::span<const double> weights, const QuantScheme& scheme);

nlohmann::json report_to_json(const QuantLeakReport& report);

} // namespace wsca
