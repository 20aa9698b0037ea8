#include "wsca/trace_io.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <map>

namespace wsca {

using nlohmann::json;

namespace {

constexpr char kMagic[4] = {'K', 'R', 'K', 'N'};
constexpr uint16_t kVersion = 1;

void put_bytes(std::string& out, const void* p, size_t n) {
  out.append(static_cast<const char*>(p), n);
}

void put_u16(std::string& out, uint16_t v) {
  unsigned char b[2] = {(unsigned char)(v & 0xFF), (unsigned char)(v >> 8)};
  put_bytes(out, b, 2);
}

void put_u64(std::string& out, uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = (unsigned char)((v >> (8 * i)) & 0xFF);
  put_bytes(out, b, 8);
}

uint16_t get_u16(const unsigned char* p) { return uint16_t(p[0] | (uint16_t(p[1]) << 8)); }

uint64_t get_u64(const unsigned char* p) {
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= uint64_t(p[i]) << (8 * i);
  return v;
}

size_t dtype_size(Dtype d) {
  switch (d) {
  case Dtype::F32: return 4;
  case Dtype::I16: return 2;
  case Dtype::I8: return 1;
  }
  return 4;
}

int64_t clamp_i64(int64_t v, int64_t lo, int64_t hi) { return v < lo ? lo : (v > hi ? hi : v); }

json site_to_json(const SiteInfo& s) {
  return json{{"warp_id", s.warp_id},
              {"sample_index", s.sample_index},
              {"weight_column", s.weight_column},
              {"parallel_results", s.parallel_results},
              {"span", s.span},
              {"power_mean", s.power_mean},
              {"power_std", s.power_std}};
}

SiteInfo site_from_json(const json& j) {
  SiteInfo s;
  s.warp_id = j.at("warp_id").get<int>();
  s.sample_index = j.at("sample_index").get<int>();
  s.weight_column = j.at("weight_column").get<int>();
  s.parallel_results = j.at("parallel_results").get<int>();
  s.span = j.value("span", 1);
  s.power_mean = j.value("power_mean", 0.0);
  s.power_std = j.value("power_std", 0.0);
  return s;
}

} // namespace

json scenario_to_json(const KernelScenario& sc) {
  json j;
  j["kind"] = to_string(sc.kind);
  j["imma_shape"] = {{"m", sc.imma_shape.m},
                     {"n", sc.imma_shape.n},
                     {"k", sc.imma_shape.k},
                     {"weights_per_kernel", sc.imma_shape.weights_per_kernel}};
  j["imma_weights"] = json::array();
  for (int8_t w : sc.imma_weights) j["imma_weights"].push_back(int(w));
  j["hmma_weights"] = json::array();
  for (uint16_t w : sc.hmma_weights) j["hmma_weights"].push_back(int(w));
  j["target_index"] = sc.target_index;
  j["imma_chained"] = sc.imma_chained;
  j["input_mode"] = to_string(sc.input_mode);
  j["input_groups"] = sc.input_groups;
  j["warp_count"] = sc.warp_count;
  j["sites"] = json::array();
  for (const auto& s : sc.sites)
    j["sites"].push_back(json{{"warp_id", s.warp_id},
                              {"sample_index", s.sample_index},
                              {"weight_column", s.weight_column},
                              {"parallel_results", s.parallel_results},
                              {"span", s.span}});
  j["samples_per_cycle"] = sc.samples_per_cycle;
  j["trace_length"] = sc.trace_length;
  j["noise_sigma"] = sc.noise_sigma;
  j["jitter_max"] = sc.jitter_max;
  j["leak_gain"] = sc.leak_gain;
  j["dc_level"] = sc.dc_level;
  j["countermeasure"] = to_string(sc.countermeasure);
  j["randomize_target_weight"] = sc.randomize_target_weight;
  j["accumulator_bias"] = sc.accumulator_bias;
  j["hmma_accumulator_bits"] = int64_t(f32_bits(sc.hmma_accumulator));
  j["rng_seed"] = sc.rng_seed;
  j["fixed_inputs_imma"] = json::array();
  for (int8_t v : sc.fixed_inputs_imma) j["fixed_inputs_imma"].push_back(int(v));
  j["fixed_inputs_hmma"] = json::array();
  for (uint16_t v : sc.fixed_inputs_hmma) j["fixed_inputs_hmma"].push_back(int(v));
  return j;
}

KernelScenario scenario_from_json(const json& j) {
  KernelScenario sc;
  sc.kind = kernel_kind_from_string(j.at("kind").get<std::string>());
  const auto& sh = j.at("imma_shape");
  sc.imma_shape.m = sh.at("m").get<int>();
  sc.imma_shape.n = sh.at("n").get<int>();
  sc.imma_shape.k = sh.at("k").get<int>();
  sc.imma_shape.weights_per_kernel = sh.at("weights_per_kernel").get<int>();
  sc.imma_weights.clear();
  for (const auto& w : j.at("imma_weights")) sc.imma_weights.push_back(int8_t(w.get<int>()));
  {
    size_t i = 0;
    for (const auto& w : j.at("hmma_weights"))
      if (i < sc.hmma_weights.size()) sc.hmma_weights[i++] = uint16_t(w.get<int>());
  }
  sc.target_index = j.at("target_index").get<int>();
  sc.imma_chained = j.value("imma_chained", false);
  sc.input_mode = input_mode_from_string(j.at("input_mode").get<std::string>());
  sc.input_groups = j.at("input_groups").get<int>();
  sc.warp_count = j.at("warp_count").get<int>();
  sc.sites.clear();
  for (const auto& s : j.at("sites")) {
    WarpSite site;
    site.warp_id = s.at("warp_id").get<int>();
    site.sample_index = s.at("sample_index").get<int>();
    site.weight_column = s.at("weight_column").get<int>();
    site.parallel_results = s.at("parallel_results").get<int>();
    site.span = s.value("span", 1);
    sc.sites.push_back(site);
  }
  sc.samples_per_cycle = j.at("samples_per_cycle").get<int>();
  sc.trace_length = j.at("trace_length").get<int>();
  sc.noise_sigma = j.at("noise_sigma").get<double>();
  sc.jitter_max = j.at("jitter_max").get<int>();
  sc.leak_gain = j.at("leak_gain").get<double>();
  sc.dc_level = j.value("dc_level", 0.0);
  sc.countermeasure = countermeasure_from_string(j.at("countermeasure").get<std::string>());
  sc.randomize_target_weight = j.value("randomize_target_weight", false);
  sc.accumulator_bias = j.value("accumulator_bias", 0);
  sc.hmma_accumulator = f32_from_bits(uint32_t(j.value("hmma_accumulator_bits", int64_t(0))));
  sc.rng_seed = j.at("rng_seed").get<uint64_t>();
  sc.fixed_inputs_imma.clear();
  for (const auto& v : j.value("fixed_inputs_imma", json::array()))
    sc.fixed_inputs_imma.push_back(int8_t(v.get<int>()));
  sc.fixed_inputs_hmma.clear();
  for (const auto& v : j.value("fixed_inputs_hmma", json::array()))
    sc.fixed_inputs_hmma.push_back(uint16_t(v.get<int>()));
  return sc;
}

namespace {

const char* const kKnownMetaKeys[] = {
    "format",      "version",          "scenario",
    "n_traces",    "samples_per_cycle", "sites",
    "group_ids",   "group_sizes",      "jitter_offsets",
    "permutations", "randomized_weight_bits", "non_finite_traces",
    "inputs",
};

} // namespace

json meta_to_json(const TraceMeta& meta) {
  json j = meta.extra.is_object() ? meta.extra : json::object();
  j["format"] = "warpsca-meta";
  j["version"] = 1;
  if (meta.scenario) j["scenario"] = scenario_to_json(*meta.scenario);
  j["n_traces"] = meta.n_traces;
  j["samples_per_cycle"] = meta.samples_per_cycle;
  j["sites"] = json::array();
  for (const auto& s : meta.sites) j["sites"].push_back(site_to_json(s));
  j["group_ids"] = meta.group_ids;
  j["group_sizes"] = meta.group_sizes;
  j["jitter_offsets"] = meta.jitter_offsets;
  j["permutations"] = meta.permutations;
  j["randomized_weight_bits"] = meta.randomized_weight_bits;
  j["non_finite_traces"] = meta.non_finite_traces;
  j["inputs"] = meta.inputs;
  return j;
}

TraceMeta meta_from_json(const json& j) {
  TraceMeta meta;
  if (j.contains("scenario")) meta.scenario = scenario_from_json(j.at("scenario"));
  meta.n_traces = j.value("n_traces", uint64_t(0));
  meta.samples_per_cycle = j.value("samples_per_cycle", 1);
  if (j.contains("sites"))
    for (const auto& s : j.at("sites")) meta.sites.push_back(site_from_json(s));
  meta.group_ids = j.value("group_ids", std::vector<int32_t>{});
  meta.group_sizes = j.value("group_sizes", std::vector<uint32_t>{});
  meta.jitter_offsets = j.value("jitter_offsets", std::vector<int32_t>{});
  meta.permutations = j.value("permutations", std::vector<std::vector<int32_t>>{});
  meta.randomized_weight_bits = j.value("randomized_weight_bits", std::vector<int64_t>{});
  meta.non_finite_traces = j.value("non_finite_traces", std::vector<uint64_t>{});
  meta.inputs = j.value("inputs", std::vector<std::vector<std::vector<int32_t>>>{});
  meta.extra = j;
  for (const char* key : kKnownMetaKeys) meta.extra.erase(key);
  return meta;
}

void write_trace_file(const std::string& path, const TraceSet& ts, const TraceMeta& meta) {
  ts.validate();
  require(meta.n_traces == 0 || meta.n_traces == ts.n_traces, Err::DimMismatch,
          "metadata trace count disagrees with the trace set");

  std::string blob;
  blob.reserve(24 + ts.samples.size() * dtype_size(ts.dtype));
  put_bytes(blob, kMagic, 4);
  put_u16(blob, kVersion);
  blob.push_back(char(uint8_t(ts.dtype)));
  blob.push_back(char(0)); // reserved
  put_u64(blob, ts.n_traces);
  put_u64(blob, ts.n_samples);
  switch (ts.dtype) {
  case Dtype::F32:
    for (float v : ts.samples) {
      uint32_t u = f32_bits(v);
      unsigned char b[4] = {(unsigned char)(u & 0xFF), (unsigned char)((u >> 8) & 0xFF),
                            (unsigned char)((u >> 16) & 0xFF), (unsigned char)((u >> 24) & 0xFF)};
      put_bytes(blob, b, 4);
    }
    break;
  case Dtype::I16:
    for (float v : ts.samples) {
      auto q = uint16_t(int16_t(clamp_i64(llroundf(v), INT16_MIN, INT16_MAX)));
      put_u16(blob, q);
    }
    break;
  case Dtype::I8:
    for (float v : ts.samples)
      blob.push_back(char(int8_t(clamp_i64(llroundf(v), INT8_MIN, INT8_MAX))));
    break;
  }

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  require(bool(f), Err::BadArgument, "cannot open " + path + " for writing");
  f.write(blob.data(), std::streamsize(blob.size()));
  require(bool(f), Err::BadArgument, "short write to " + path);

  TraceMeta m = meta;
  m.n_traces = ts.n_traces;
  std::ofstream mf(path + ".meta.json", std::ios::binary | std::ios::trunc);
  require(bool(mf), Err::BadArgument, "cannot open metadata sidecar for writing");
  mf << meta_to_json(m).dump(2) << "\n";
}

std::pair<TraceSet, TraceMeta> read_trace_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  require(bool(f), Err::BadArgument, "cannot open " + path);
  std::string blob((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  require(blob.size() >= 24, Err::TruncatedFile, "file shorter than the fixed header");
  const auto* p = reinterpret_cast<const unsigned char*>(blob.data());
  require(std::memcmp(p, kMagic, 4) == 0, Err::BadMagic, "not a KRKN trace file");
  const uint16_t version = get_u16(p + 4);
  require(version == kVersion, Err::VersionUnsupported,
          "unsupported version " + std::to_string(version));
  const uint8_t dt = p[6];
  require(dt <= 2, Err::VersionUnsupported, "unknown dtype code " + std::to_string(dt));

  TraceSet ts;
  ts.dtype = Dtype(dt);
  ts.n_traces = get_u64(p + 8);
  ts.n_samples = get_u64(p + 16);
  // guard the size computation itself against overflowing headers
  const uint64_t avail = (blob.size() - 24) / dtype_size(ts.dtype);
  require(ts.n_samples == 0 || ts.n_traces <= avail / ts.n_samples, Err::TruncatedFile,
          "header claims more samples than the file holds");
  const size_t want = size_t(ts.n_traces) * ts.n_samples;
  ts.samples.resize(want);
  const unsigned char* q = p + 24;
  switch (ts.dtype) {
  case Dtype::F32:
    for (size_t i = 0; i < want; ++i) {
      uint32_t u = uint32_t(q[0]) | (uint32_t(q[1]) << 8) | (uint32_t(q[2]) << 16) |
                   (uint32_t(q[3]) << 24);
      ts.samples[i] = f32_from_bits(u);
      q += 4;
    }
    break;
  case Dtype::I16:
    for (size_t i = 0; i < want; ++i) {
      ts.samples[i] = float(int16_t(get_u16(q)));
      q += 2;
    }
    break;
  case Dtype::I8:
    for (size_t i = 0; i < want; ++i) ts.samples[i] = float(int8_t(*q++));
    break;
  }

  TraceMeta meta;
  std::ifstream mf(path + ".meta.json", std::ios::binary);
  if (mf) {
    json j = json::parse(mf, nullptr, true);
    meta = meta_from_json(j);
  }
  if (meta.n_traces == 0) meta.n_traces = ts.n_traces;
  require(meta.n_traces == ts.n_traces, Err::DimMismatch,
          "sidecar trace count disagrees with the trace file");
  return {std::move(ts), std::move(meta)};
}

int moving_average_window(int window_cycles, int samples_per_cycle) {
  require(window_cycles >= 1 && samples_per_cycle >= 1, Err::BadArgument,
          "window_cycles and samples_per_cycle must be >= 1");
  return window_cycles * samples_per_cycle;
}

TraceSet moving_average(const TraceSet& ts, int window_cycles, int samples_per_cycle) {
  ts.validate();
  const int w = moving_average_window(window_cycles, samples_per_cycle);
  require(uint64_t(w) <= ts.n_samples, Err::WindowTooLarge,
          "moving-average window exceeds the trace length");
  const uint64_t out_len = ts.n_samples - uint64_t(w) + 1;
  TraceSet out = TraceSet::zeros(ts.n_traces, out_len, ts.dtype);
  for (uint64_t t = 0; t < ts.n_traces; ++t) {
    auto in = ts.row(t);
    auto dst = out.row(t);
    double running = 0.0;
    for (int s = 0; s < w; ++s) running += in[size_t(s)];
    dst[0] = float(running / w);
    for (uint64_t s = 1; s < out_len; ++s) {
      running += double(in[size_t(s) + w - 1]) - double(in[size_t(s) - 1]);
      dst[size_t(s)] = float(running / w);
    }
  }
  return out;
}

int remap_sample_after_moving_average(int sample_index, int window) {
  int idx = sample_index - (window - 1);
  return idx < 0 ? 0 : idx;
}

TraceMeta remap_meta_after_moving_average(const TraceMeta& meta, int window) {
  TraceMeta out = meta;
  for (auto& s : out.sites)
    s.sample_index = remap_sample_after_moving_average(s.sample_index, window);
  return out;
}

std::pair<TraceSet, TraceMeta> average_by_input(const TraceSet& ts, const TraceMeta& meta) {
  ts.validate();
  require(meta.group_ids.empty() || meta.group_ids.size() == ts.n_traces, Err::DimMismatch,
          "group assignment must cover every trace");

  int32_t n_groups = 0;
  if (meta.group_ids.empty()) {
    n_groups = int32_t(ts.n_traces);
  } else {
    for (int32_t g : meta.group_ids) {
      require(g >= 0, Err::BadArgument, "negative group id");
      n_groups = std::max(n_groups, g + 1);
    }
    if (meta.scenario && meta.scenario->input_groups > 0)
      n_groups = std::max(n_groups, meta.scenario->input_groups);
  }
  require(n_groups >= 1, Err::EmptyGroup, "no input groups present");

  std::vector<uint32_t> counts(size_t(n_groups), 0);
  std::vector<double> sums(size_t(n_groups) * ts.n_samples, 0.0);
  for (uint64_t t = 0; t < ts.n_traces; ++t) {
    const int32_t g = meta.group_ids.empty() ? int32_t(t) : meta.group_ids[size_t(t)];
    counts[size_t(g)]++;
    auto in = ts.row(t);
    double* acc = sums.data() + size_t(g) * ts.n_samples;
    for (uint64_t s = 0; s < ts.n_samples; ++s) acc[s] += in[size_t(s)];
  }
  for (int32_t g = 0; g < n_groups; ++g)
    require(counts[size_t(g)] > 0, Err::EmptyGroup,
            "group " + std::to_string(g) + " has no traces");

  TraceSet out = TraceSet::zeros(uint64_t(n_groups), ts.n_samples, Dtype::F32);
  for (int32_t g = 0; g < n_groups; ++g) {
    auto dst = out.row(uint64_t(g));
    const double* acc = sums.data() + size_t(g) * ts.n_samples;
    for (uint64_t s = 0; s < ts.n_samples; ++s) dst[size_t(s)] = float(acc[s] / counts[size_t(g)]);
  }

  TraceMeta m = meta;
  m.n_traces = uint64_t(n_groups);
  m.group_ids.clear(); // averaged trace g is its own group, aligned with inputs[g]
  m.group_sizes = counts;
  m.jitter_offsets.clear();
  m.permutations.clear();
  m.randomized_weight_bits.clear();
  m.non_finite_traces.clear();
  return {std::move(out), std::move(m)};
}

TraceSet shift(const TraceSet& ts, int offset) {
  ts.validate();
  require(uint64_t(std::abs(offset)) < ts.n_samples, Err::OffsetTooLarge,
          "shift offset must be smaller than the trace length");
  TraceSet out = TraceSet::zeros(ts.n_traces, ts.n_samples, ts.dtype);
  for (uint64_t t = 0; t < ts.n_traces; ++t) {
    auto in = ts.row(t);
    auto dst = out.row(t);
    double mean = 0.0;
    for (uint64_t s = 0; s < ts.n_samples; ++s) mean += in[size_t(s)];
    mean /= double(ts.n_samples);
    for (int64_t s = 0; s < int64_t(ts.n_samples); ++s) {
      const int64_t src = s - offset;
      dst[size_t(s)] = (src >= 0 && src < int64_t(ts.n_samples)) ? in[size_t(src)] : float(mean);
    }
  }
  return out;
}

} // namespace wsca
