#include "wsca/quant.hpp"

#include <cmath>

namespace wsca {

int64_t BlockQuant::quantize(double w) const {
  // round half away from zero, clamped to the code range
  const int64_t code = int64_t(std::round(w * scale()));
  if (code > code_limit) return code_limit;
  if (code < -code_limit) return -code_limit;
  return code;
}

BlockQuant derive_block(std::span<const double> block, const QuantScheme& scheme) {
  scheme.validate();
  require(!block.empty(), Err::AllZeroBlock, "cannot derive a scale from an empty block");
  double max_abs = 0.0;
  for (double w : block) max_abs = std::max(max_abs, std::abs(w));
  require(max_abs > 0.0, Err::AllZeroBlock, "all-zero block has no scale");
  return BlockQuant{max_abs, scheme.code_limit()};
}

double derive_scale(std::span<const double> block, const QuantScheme& scheme) {
  return derive_block(block, scheme).scale();
}

std::vector<int64_t> quantize_block(std::span<const double> block, const QuantScheme& scheme) {
  const BlockQuant bq = derive_block(block, scheme);
  std::vector<int64_t> codes(block.size());
  for (size_t i = 0; i < block.size(); ++i) codes[i] = bq.quantize(block[i]);
  return codes;
}

std::vector<double> dequantize_block(std::span<const int64_t> codes, const BlockQuant& bq) {
  std::vector<double> out(codes.size());
  for (size_t i = 0; i < codes.size(); ++i) out[i] = bq.dequantize(codes[i]);
  return out;
}

QuantLeakReport leakage_report(std::span<const double> weights, const QuantScheme& scheme) {
  scheme.validate();
  require(!weights.empty(), Err::AllZeroBlock, "empty weight tensor");
  QuantLeakReport rep;
  rep.scheme = scheme;
  rep.n_weights = weights.size();
  const size_t bs = scheme.block_size > 0 ? size_t(scheme.block_size) : weights.size();
  rep.codes_per_weight = double(2 * scheme.code_limit() + 1);
  rep.bits_per_weight = std::log2(rep.codes_per_weight);

  for (size_t offset = 0; offset < weights.size(); offset += bs) {
    const size_t count = std::min(bs, weights.size() - offset);
    const auto block = weights.subspan(offset, count);
    const BlockQuant bq = derive_block(block, scheme);

    size_t ext = 0;
    for (size_t i = 1; i < count; ++i)
      if (std::abs(block[i]) > std::abs(block[ext])) ext = i;

    BlockLeak leak;
    leak.block_index = rep.blocks.size();
    leak.offset = offset;
    leak.count = count;
    leak.scale = bq.scale();
    leak.max_abs = bq.max_abs;
    leak.pinned_value = bq.dequantize(bq.quantize(block[ext]));
    leak.pinned_position = offset + ext;
    rep.blocks.push_back(leak);
  }
  rep.n_blocks = rep.blocks.size();
  return rep;
}

nlohmann::json report_to_json(const QuantLeakReport& rep) {
  nlohmann::json j;
  j["bits"] = rep.scheme.bits;
  j["block_size"] = rep.scheme.block_size;
  j["numerator"] = rep.scheme.code_limit();
  j["numerator_convention"] = rep.scheme.full_range_numerator ? "2^b-1" : "2^(b-1)-1";
  j["n_weights"] = rep.n_weights;
  j["n_blocks"] = rep.n_blocks;
  j["pinned_weights"] = rep.n_blocks;
  j["codes_per_weight"] = rep.codes_per_weight;
  j["bits_per_weight"] = rep.bits_per_weight;
  j["blocks"] = nlohmann::json::array();
  for (const auto& b : rep.blocks)
    j["blocks"].push_back(nlohmann::json{{"block_index", b.block_index},
                                         {"offset", b.offset},
                                         {"count", b.count},
                                         {"scale", b.scale},
                                         {"max_abs", b.max_abs},
                                         {"pinned_value", b.pinned_value},
                                         {"pinned_position", b.pinned_position}});
  return j;
}

} // namespace wsca
