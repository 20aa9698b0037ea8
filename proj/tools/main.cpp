// warpsca: simulate Tensor Core leakage traces, run CPA/TVLA analyses on
// them, and render the resulting CSV artifacts as SVG plots.

#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "wsca/assess.hpp"
#include "wsca/cpa.hpp"
#include "wsca/higher_order.hpp"
#include "wsca/quant.hpp"
#include "wsca/svg.hpp"
#include "wsca/synth.hpp"

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json read_json_file(const std::string& path) {
  std::ifstream f(path);
  wsca::require(bool(f), wsca::Err::BadArgument, "cannot open " + path);
  return json::parse(f);
}

void write_json_file(const std::string& path, const json& j) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  wsca::require(bool(f), wsca::Err::BadArgument, "cannot open " + path + " for writing");
  f << j.dump(2) << "\n";
}

std::string out_path(const std::string& dir, const std::string& name) {
  fs::create_directories(dir);
  return (fs::path(dir) / name).string();
}

void write_run_echo(const std::string& dir, const std::string& command, const json& args) {
  write_json_file(out_path(dir, "run.json"), json{{"command", command}, {"args", args}});
}

struct SimulateOpts {
  std::string kind = "imma";
  uint64_t traces = 1000;
  uint64_t seed = 1;
  double noise_sigma = -1.0;
  double noise_rel = -1.0;
  int jitter = 0;
  std::string countermeasure = "none";
  std::string input_mode;
  int input_groups = 0;
  int target_index = -1;
  bool chained = false;
  int trace_length = 0;
  int samples_per_cycle = 0;
  int span = 0;
  double dc_level = -1.0;
  double leak_gain = 1.0;
  bool randomize_weight = false;
  std::vector<std::string> sites;
  std::string weights_file;
  std::string out = "traces.krkn";
  std::string out_dir = ".";
  // far field
  bool far_field = false;
  double distance_m = 0.25;
  double glass_db = 0.0;
  double fc_hz = 2.565e6;
  double fs_hz = 1.026e7;
  double bw_hz = 3.20625e5;
  double ref_gain = 1.0;
  double phase_rad = 0.0;
  bool auto_dc = false;
};

wsca::KernelScenario build_scenario(const SimulateOpts& o) {
  using namespace wsca;
  KernelScenario sc = o.kind == "hmma" ? hmma_demo_scenario(o.seed) : imma_demo_scenario(o.seed);
  if (!o.input_mode.empty()) sc.input_mode = input_mode_from_string(o.input_mode);
  sc.countermeasure = countermeasure_from_string(o.countermeasure);
  sc.input_groups = o.input_groups;
  if (o.target_index >= 0) sc.target_index = o.target_index;
  sc.imma_chained = o.chained;
  if (o.trace_length > 0) sc.trace_length = o.trace_length;
  if (o.samples_per_cycle > 0) sc.samples_per_cycle = o.samples_per_cycle;
  sc.jitter_max = o.jitter;
  sc.leak_gain = o.leak_gain;
  if (o.dc_level >= 0.0) sc.dc_level = o.dc_level;
  sc.randomize_target_weight = o.randomize_weight;

  if (!o.sites.empty()) {
    sc.sites.clear();
    for (const auto& spec : o.sites) {
      WarpSite site;
      const int n = std::sscanf(spec.c_str(), "%d,%d,%d,%d,%d", &site.warp_id,
                                &site.sample_index, &site.weight_column,
                                &site.parallel_results, &site.span);
      require(n >= 3, Err::BadArgument,
              "--site wants warp,sample,column[,parallel[,span]]: " + spec);
      sc.sites.push_back(site);
    }
  }
  if (o.span > 0)
    for (auto& site : sc.sites) site.span = o.span;

  if (!o.weights_file.empty()) {
    const json w = read_json_file(o.weights_file);
    if (sc.kind == KernelKind::Imma) {
      std::vector<int8_t> weights;
      for (const auto& v : w.at("weights")) weights.push_back(int8_t(v.get<int>()));
      require(weights.size() == sc.imma_weights.size(), Err::DimMismatch,
              "weights file must hold k*n values");
      sc.imma_weights = weights;
    } else {
      size_t i = 0;
      for (const auto& v : w.at("weights")) {
        require(i < 8, Err::DimMismatch, "hmma wants exactly 8 weights");
        sc.hmma_weights[i++] = f32_to_bf16(v.get<float>());
      }
      require(i == 8, Err::DimMismatch, "hmma wants exactly 8 weights");
    }
  }

  if (o.noise_sigma >= 0.0) {
    sc.noise_sigma = o.noise_sigma;
  } else if (o.noise_rel >= 0.0) {
    const PowerStats st = site_power_stats(sc, 0);
    sc.noise_sigma = o.noise_rel * st.stddev;
  }
  return sc;
}

int run_simulate(const SimulateOpts& o) {
  using namespace wsca;
  KernelScenario sc = build_scenario(o);
  SynthResult res;
  json echo;
  echo["traces"] = o.traces;
  if (o.far_field) {
    RfChannelConfig rf;
    rf.carrier_hz = o.fc_hz;
    rf.passband_rate_hz = o.fs_hz;
    rf.rx_bandwidth_hz = o.bw_hz;
    rf.baseband_rate_hz = 2.0 * o.bw_hz;
    rf.distance_m = o.distance_m;
    rf.glass_loss_db = o.glass_db;
    rf.reference_gain = o.ref_gain;
    rf.phase_rad = o.phase_rad;
    if (o.auto_dc || sc.dc_level <= 0.0) sc.dc_level = suggested_dc_level(sc);
    echo["far_field"] = rf_to_json(rf);
    res = synthesize_far_field(sc, o.traces, rf);
  } else {
    res = synthesize(sc, o.traces);
  }
  echo["scenario"] = scenario_to_json(sc);
  const std::string path = out_path(o.out_dir, o.out);
  write_trace_file(path, res.traces, res.meta);
  write_run_echo(o.out_dir, "simulate", echo);
  std::cout << "wrote " << res.traces.n_traces << " traces x " << res.traces.n_samples
            << " samples to " << path << "\n";
  return 0;
}

struct AttackOpts {
  std::string in;
  std::string space = "int8";
  double lo = 1e-10, hi = 1.0;
  bool positive_only = false;
  int site = 0;
  int target_index = -1;
  int n_model = 0;
  std::string known_prefix_file;
  double fixed_s2 = 0.0;
  bool has_fixed_s2 = false;
  std::string s2_file;
  int window_lo = 0, window_hi = -1;
  int threads = 1;
  std::string out_dir = ".";
  // hocpa extras
  std::string sites_csv;
  std::string combine = "sum";
  std::string preprocess = "squared-sum";
  // rank extras
  uint64_t step = 0;
};

wsca::CandidateSpace build_space(const AttackOpts& o) {
  if (o.space == "int8") return wsca::int8_space();
  if (o.space == "bf16") return wsca::enumerate_bf16(o.lo, o.hi, !o.positive_only);
  wsca::fail(wsca::Err::BadArgument, "unknown candidate space: " + o.space);
}

wsca::AttackConfig build_attack_config(const AttackOpts& o, const wsca::TraceMeta& meta) {
  using namespace wsca;
  AttackConfig cfg;
  cfg.site = o.site;
  cfg.target_index = o.target_index;
  cfg.n_model = o.n_model;
  cfg.window_lo = o.window_lo;
  cfg.window_hi = o.window_hi;
  if (o.has_fixed_s2) cfg.fixed_s2 = float(o.fixed_s2);
  if (!o.known_prefix_file.empty()) {
    const json j = read_json_file(o.known_prefix_file);
    require(meta.scenario.has_value(), Err::InsufficientKnowledge,
            "trace metadata carries no scenario");
    if (meta.scenario->kind == KernelKind::Imma) {
      for (const auto& e : j.at("known"))
        cfg.known_imma.push_back(
            {e.contains("depth") ? e.at("depth").get<int>() : e.at("index").get<int>() - 1,
             int8_t(e.at("value").get<int>())});
    } else {
      HmmaPrefix prefix;
      for (const auto& e : j.at("known")) {
        const int idx =
            e.contains("index") ? e.at("index").get<int>() - 1 : e.at("depth").get<int>();
        require(idx >= 0 && idx < 8, Err::TargetOutOfRange, "prefix index must be 1..8");
        prefix.weights[size_t(idx)] = f32_to_bf16(e.at("value").get<float>());
        prefix.known[size_t(idx)] = true;
      }
      cfg.hmma_prefix = prefix;
    }
  }
  return cfg;
}

json candidate_json(const wsca::CandidateSpace& space, size_t idx) {
  return json{{"raw", space.values[idx]}, {"value", space.decoded(idx)}};
}

void write_corr_csv(const std::string& path, const wsca::CandidateSpace& space,
                    const wsca::CpaResult& r) {
  std::vector<std::vector<double>> rows;
  rows.reserve(r.n_candidates * r.n_samples);
  for (size_t c = 0; c < r.n_candidates; ++c)
    for (size_t s = 0; s < r.n_samples; ++s) {
      const double rho = r.rho_at(c, s);
      if (std::isnan(rho)) continue; // excluded entries are reported in the summary
      rows.push_back({double(space.values[c]), double(s), rho});
    }
  wsca::write_csv(path, {"candidate", "sample", "rho"}, rows);
}

json summarize(const wsca::CandidateSpace& space, const wsca::CpaResult& r) {
  json j;
  j["n_candidates"] = r.n_candidates;
  j["n_samples"] = r.n_samples;
  j["n_traces"] = r.n_traces_used;
  size_t best = 0;
  double best_peak = -1.0;
  size_t excluded = 0;
  for (size_t c = 0; c < r.n_candidates; ++c) {
    if (r.candidate_excluded[c]) {
      ++excluded;
      continue;
    }
    if (!std::isnan(r.peak_abs[c]) && r.peak_abs[c] > best_peak) {
      best_peak = r.peak_abs[c];
      best = c;
    }
  }
  j["excluded_candidates"] = excluded;
  if (best_peak >= 0.0) {
    j["best_candidate"] = candidate_json(space, best);
    j["best_peak_abs_rho"] = best_peak;
    j["best_peak_sample"] = r.peak_sample[best];
  }
  if (r.truth_index >= 0) {
    j["truth"] = candidate_json(space, size_t(r.truth_index));
    j["truth_rank"] = wsca::key_rank(r);
    j["recovered"] = (ptrdiff_t(best) == r.truth_index);
  }
  return j;
}

std::vector<int> parse_sites_csv(const std::string& csv) {
  std::vector<int> out;
  std::stringstream ss(csv);
  std::string tok;
  while (std::getline(ss, tok, ',')) out.push_back(std::stoi(tok));
  return out;
}

int run_attack_cpa(const AttackOpts& o) {
  using namespace wsca;
  const auto [ts, meta] = read_trace_file(o.in);
  const CandidateSpace space = build_space(o);
  const AttackConfig cfg = build_attack_config(o, meta);
  json echo{{"in", o.in},   {"space", o.space},     {"lo", o.lo},
            {"hi", o.hi},   {"site", o.site},       {"target_index", o.target_index},
            {"n_model", o.n_model}, {"threads", o.threads}};

  if (!o.s2_file.empty()) {
    std::vector<float> hypotheses;
    for (const auto& v : read_json_file(o.s2_file).at("s2")) hypotheses.push_back(v.get<float>());
    const S2Sweep sweep = cpa_fixed_s2_sweep(ts, meta, space, cfg, hypotheses, o.threads);
    json j{{"best_s2", sweep.best_s2},
           {"best_hypothesis", sweep.best_hypothesis},
           {"best_candidate", candidate_json(space, sweep.best_candidate)},
           {"best_peak_abs_rho", sweep.best_peak},
           {"hypothesis_cap", kMaxS2Hypotheses}};
    write_json_file(out_path(o.out_dir, "sweep.json"), j);
    write_run_echo(o.out_dir, "attack cpa --s2-sweep", echo);
    std::cout << "best s2 " << sweep.best_s2 << ", best candidate "
              << space.decoded(sweep.best_candidate) << "\n";
    return 0;
  }

  const CpaResult r = cpa(ts, meta, space, cfg, o.threads);
  write_corr_csv(out_path(o.out_dir, "corr.csv"), space, r);
  const json summary = summarize(space, r);
  write_json_file(out_path(o.out_dir, "attack.json"), summary);
  write_run_echo(o.out_dir, "attack cpa", echo);
  std::cout << summary.dump(2) << "\n";
  return 0;
}

int run_attack_hocpa(const AttackOpts& o) {
  using namespace wsca;
  const auto [ts, meta] = read_trace_file(o.in);
  const CandidateSpace space = build_space(o);
  const AttackConfig cfg = build_attack_config(o, meta);
  HoConfig ho;
  ho.site_samples = parse_sites_csv(o.sites_csv);
  if (o.combine == "product") ho.combine = Combine::Product;
  if (o.preprocess == "centered-product") ho.preprocess = Preprocess::CenteredProduct;

  const CpaResult r = ho_cpa(ts, meta, space, cfg, ho);
  write_corr_csv(out_path(o.out_dir, "corr.csv"), space, r);
  const json summary = summarize(space, r);
  write_json_file(out_path(o.out_dir, "attack.json"), summary);
  write_run_echo(o.out_dir, "attack hocpa",
                 json{{"in", o.in}, {"sites", o.sites_csv}, {"combine", o.combine},
                      {"preprocess", o.preprocess}});
  std::cout << summary.dump(2) << "\n";
  return 0;
}

int run_rank(const AttackOpts& o) {
  using namespace wsca;
  const auto [ts, meta] = read_trace_file(o.in);
  const CandidateSpace space = build_space(o);
  const AttackConfig cfg = build_attack_config(o, meta);
  const uint64_t step = o.step > 0 ? o.step : std::max<uint64_t>(1, ts.n_traces / 100);

  Evolution evo;
  RankCurve curve;
  if (!o.sites_csv.empty()) {
    HoConfig ho;
    ho.site_samples = parse_sites_csv(o.sites_csv);
    curve = ho_rank_curve(ts, meta, space, cfg, ho, step);
  } else {
    curve = rank_curve(ts, meta, space, cfg, step, &evo);
  }

  std::vector<std::vector<double>> rows;
  for (size_t i = 0; i < curve.n_traces.size(); ++i)
    rows.push_back({double(curve.n_traces[i]), double(curve.ranks[i])});
  write_csv(out_path(o.out_dir, "rank.csv"), {"n_traces", "rank"}, rows);

  if (!evo.n_traces.empty()) {
    std::vector<std::vector<double>> evo_rows;
    for (size_t i = 0; i < evo.n_traces.size(); ++i)
      for (size_t c = 0; c < space.size(); ++c) {
        const double peak = double(evo.peak_abs[i][c]);
        if (std::isnan(peak)) continue;
        evo_rows.push_back({double(evo.n_traces[i]), double(space.values[c]), peak});
      }
    write_csv(out_path(o.out_dir, "correvo.csv"), {"n_traces", "candidate", "peak_abs_rho"},
              evo_rows);
  }

  json j{{"final_rank", curve.ranks.empty() ? -1 : curve.ranks.back()}, {"step", step}};
  const auto conv = traces_to_rank0(curve);
  if (conv) j["traces_to_rank0"] = *conv;
  write_json_file(out_path(o.out_dir, "rank.json"), j);
  write_run_echo(o.out_dir, "rank", json{{"in", o.in}, {"step", step}, {"space", o.space}});
  std::cout << j.dump(2) << "\n";
  return 0;
}

int run_tvla(const std::string& a_path, const std::string& b_path, int align_range,
             double threshold, const std::string& out_dir) {
  using namespace wsca;
  const auto [a, ameta] = read_trace_file(a_path);
  const auto [b, bmeta] = read_trace_file(b_path);
  if (align_range < 0) align_range = ameta.samples_per_cycle; // default: one clock cycle
  const TvlaReport rep = tvla(a, b, align_range, threshold);
  std::vector<std::vector<double>> rows;
  for (size_t s = 0; s < rep.t.size(); ++s)
    rows.push_back({double(s), rep.t[s], double(rep.best_shift[s])});
  write_csv(out_path(out_dir, "tvla.csv"), {"sample", "t", "best_shift"}, rows);
  json j{{"max_abs_t", rep.max_abs_t},
         {"argmax_sample", rep.argmax_sample},
         {"threshold", rep.threshold},
         {"exceed_count", rep.exceed_indices.size()},
         {"leaky", rep.max_abs_t > rep.threshold}};
  write_json_file(out_path(out_dir, "tvla.json"), j);
  write_run_echo(out_dir, "tvla",
                 json{{"group_a", a_path}, {"group_b", b_path}, {"align_range", align_range},
                      {"threshold", threshold}});
  std::cout << j.dump(2) << "\n";
  return 0;
}

int run_tokens(const std::string& in, double threshold, int min_gap, const std::string& out_dir) {
  using namespace wsca;
  const auto [ts, meta] = read_trace_file(in);
  const EnvelopeSegmentation cfg{threshold, min_gap};
  json per_trace = json::array();
  for (uint64_t t = 0; t < ts.n_traces; ++t) {
    const auto segs = count_forward_passes(ts.row(t), cfg);
    json durations = json::array();
    for (const auto& s : segs)
      durations.push_back(json{{"start", s.start}, {"end", s.end}, {"duration", s.duration()}});
    per_trace.push_back(json{{"trace", t}, {"token_count", segs.size()}, {"segments", durations}});
  }
  write_json_file(out_path(out_dir, "tokens.json"),
                  json{{"threshold", threshold}, {"min_gap", min_gap}, {"traces", per_trace}});
  std::vector<std::vector<double>> env_rows;
  for (uint64_t s = 0; s < ts.n_samples; ++s)
    env_rows.push_back({double(s), double(ts.at(0, s))});
  write_csv(out_path(out_dir, "envelope.csv"), {"sample", "value"}, env_rows);
  write_run_echo(out_dir, "tokens",
                 json{{"in", in}, {"threshold", threshold}, {"min_gap", min_gap}});
  std::cout << per_trace.dump(2) << "\n";
  return 0;
}

int run_batch(const std::vector<std::string>& envs, double threshold, int min_gap,
              const std::string& out_dir) {
  using namespace wsca;
  std::vector<std::pair<double, std::vector<double>>> labeled;
  for (const auto& spec : envs) {
    const auto eq = spec.find('=');
    require(eq != std::string::npos, Err::BadArgument, "--env wants BATCH=PATH: " + spec);
    const double batch = std::stod(spec.substr(0, eq));
    const auto [ts, meta] = read_trace_file(spec.substr(eq + 1));
    std::vector<double> env(ts.row(0).begin(), ts.row(0).end());
    labeled.push_back({batch, std::move(env)});
  }
  const BatchLatencyTable table = batch_latency(labeled, EnvelopeSegmentation{threshold, min_gap});
  std::vector<std::vector<double>> rows;
  for (const auto& r : table.rows)
    rows.push_back({r.batch, r.active_duration, double(r.segments)});
  write_csv(out_path(out_dir, "batch.csv"), {"batch", "active_duration", "segments"}, rows);
  write_json_file(out_path(out_dir, "batch.json"),
                  json{{"monotone_nondecreasing", table.monotone_nondecreasing}});
  write_run_echo(out_dir, "batch",
                 json{{"envs", envs}, {"threshold", threshold}, {"min_gap", min_gap}});
  std::cout << "monotone: " << (table.monotone_nondecreasing ? "yes" : "no") << "\n";
  return 0;
}

int run_quant(const std::string& weights_file, int bits, int64_t block_size, bool common,
              const std::string& out_dir) {
  using namespace wsca;
  const json w = read_json_file(weights_file);
  std::vector<double> weights;
  for (const auto& v : w.at("weights")) weights.push_back(v.get<double>());
  const QuantScheme scheme{bits, block_size, !common};
  const QuantLeakReport rep = leakage_report(weights, scheme);
  const json j = report_to_json(rep);
  write_json_file(out_path(out_dir, "quant-report.json"), j);
  write_run_echo(out_dir, "quant",
                 json{{"weights", weights_file}, {"bits", bits}, {"block_size", block_size}});
  std::cout << "pinned " << rep.n_blocks << " of " << rep.n_weights << " weights; "
            << rep.bits_per_weight << " bits per remaining weight\n";
  return 0;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tensor Core side-channel simulation and weight-extraction toolkit"};
  app.require_subcommand(1);

  SimulateOpts sim;
  auto* simulate = app.add_subcommand("simulate", "synthesize a leakage trace set");
  simulate->add_option("--kind", sim.kind)->check(CLI::IsMember({"imma", "hmma"}));
  simulate->add_option("--traces", sim.traces);
  simulate->add_option("--seed", sim.seed);
  simulate->add_option("--noise-sigma", sim.noise_sigma);
  simulate->add_option("--noise-rel", sim.noise_rel,
                       "noise as a multiple of the site's power spread");
  simulate->add_option("--jitter", sim.jitter);
  simulate->add_option("--countermeasure", sim.countermeasure)
      ->check(CLI::IsMember({"none", "shuffle"}));
  simulate->add_option("--input-mode", sim.input_mode,
                       "uniform-random|fixed|chosen-zero|fixed-non-target");
  simulate->add_option("--input-groups", sim.input_groups);
  simulate->add_option("--target-index", sim.target_index);
  simulate->add_flag("--chained", sim.chained, "target slice accumulates onto a known prefix");
  simulate->add_option("--trace-length", sim.trace_length);
  simulate->add_option("--samples-per-cycle", sim.samples_per_cycle);
  simulate->add_option("--span", sim.span, "emission span per site, in samples");
  simulate->add_option("--dc-level", sim.dc_level);
  simulate->add_option("--leak-gain", sim.leak_gain);
  simulate->add_flag("--randomize-weight", sim.randomize_weight);
  simulate->add_option("--site", sim.sites, "warp,sample,column[,parallel[,span]]; repeatable");
  simulate->add_option("--weights-file", sim.weights_file);
  simulate->add_option("--out", sim.out);
  simulate->add_option("--out-dir", sim.out_dir);
  simulate->add_flag("--far-field", sim.far_field);
  simulate->add_option("--distance-m", sim.distance_m);
  simulate->add_option("--glass-db", sim.glass_db);
  simulate->add_option("--fc-hz", sim.fc_hz);
  simulate->add_option("--fs-hz", sim.fs_hz);
  simulate->add_option("--bw-hz", sim.bw_hz);
  simulate->add_option("--ref-gain", sim.ref_gain);
  simulate->add_option("--phase-rad", sim.phase_rad);
  simulate->add_flag("--auto-dc", sim.auto_dc, "pick a dc level keeping the envelope positive");

  auto add_attack_options = [](CLI::App* cmd, AttackOpts& o, bool ho) {
    cmd->add_option("--in", o.in)->required();
    cmd->add_option("--space", o.space)->check(CLI::IsMember({"int8", "bf16"}));
    cmd->add_option("--lo", o.lo);
    cmd->add_option("--hi", o.hi);
    cmd->add_flag("--positive-only", o.positive_only);
    cmd->add_option("--attack-site", o.site, "index of the recorded warp site to attack");
    cmd->add_option("--target-index", o.target_index);
    cmd->add_option("--n-model", o.n_model,
                    "predictor width: 0 = whole warp, 1 = single register");
    cmd->add_option("--known-prefix", o.known_prefix_file);
    cmd->add_option("--window-lo", o.window_lo);
    cmd->add_option("--window-hi", o.window_hi);
    cmd->add_option("--threads", o.threads);
    cmd->add_option("--out-dir", o.out_dir);
    if (ho) {
      cmd->add_option("--sites", o.sites_csv, "combined sample indices s1,s2[,s3...]")
          ->required();
      cmd->add_option("--combine", o.combine)->check(CLI::IsMember({"sum", "product"}));
      cmd->add_option("--preprocess", o.preprocess)
          ->check(CLI::IsMember({"squared-sum", "centered-product"}));
    }
  };

  auto* attack = app.add_subcommand("attack", "correlation attacks on a trace set");
  attack->require_subcommand(1);
  AttackOpts cpa_opts;
  auto* attack_cpa = attack->add_subcommand("cpa", "first-order warp-level CPA");
  add_attack_options(attack_cpa, cpa_opts, false);
  auto* fixed_s2_opt = attack_cpa->add_option("--fixed-s2", cpa_opts.fixed_s2,
                                              "chosen-fixed 32-bit state hypothesis");
  attack_cpa->add_option("--s2-file", cpa_opts.s2_file,
                         "JSON {\"s2\": [...]} hypothesis sweep");

  AttackOpts ho_opts;
  auto* attack_ho = attack->add_subcommand("hocpa", "higher-order CPA over combined sites");
  add_attack_options(attack_ho, ho_opts, true);

  AttackOpts rank_opts;
  auto* rank_cmd = app.add_subcommand("rank", "key-rank evolution over trace count");
  add_attack_options(rank_cmd, rank_opts, false);
  rank_cmd->add_option("--step", rank_opts.step);
  rank_cmd->add_option("--sites", rank_opts.sites_csv,
                       "optional combined sites for a higher-order rank curve");

  std::string pre_in, pre_out = "preprocessed.krkn", pre_dir = ".";
  int pre_ma = 0, pre_shift = 0;
  bool pre_avg = false;
  auto* preprocess = app.add_subcommand("preprocess", "shift / moving-average / averaging");
  preprocess->add_option("--in", pre_in)->required();
  preprocess->add_option("--moving-average", pre_ma, "window in clock cycles");
  preprocess->add_option("--shift", pre_shift);
  preprocess->add_flag("--average-by-input", pre_avg);
  preprocess->add_option("--out", pre_out);
  preprocess->add_option("--out-dir", pre_dir);

  std::string tvla_a, tvla_b, tvla_dir = ".";
  int tvla_align = -1;
  double tvla_threshold = 4.5;
  auto* tvla_cmd = app.add_subcommand("tvla", "Welch t-test leakage assessment");
  tvla_cmd->add_option("--group-a", tvla_a)->required();
  tvla_cmd->add_option("--group-b", tvla_b)->required();
  tvla_cmd->add_option("--align-range", tvla_align,
                       "aggregate over shifts in [-k, k]; default one clock cycle");
  tvla_cmd->add_option("--threshold", tvla_threshold);
  tvla_cmd->add_option("--out-dir", tvla_dir);

  std::string tok_in, tok_dir = ".";
  double tok_threshold = 0.0;
  int tok_gap = 1;
  auto* tokens_cmd = app.add_subcommand("tokens", "count forward passes in an envelope");
  tokens_cmd->add_option("--in", tok_in)->required();
  tokens_cmd->add_option("--threshold", tok_threshold)->required();
  tokens_cmd->add_option("--min-gap", tok_gap);
  tokens_cmd->add_option("--out-dir", tok_dir);

  std::vector<std::string> batch_envs;
  std::string batch_dir = ".";
  double batch_threshold = 0.0;
  int batch_gap = 1;
  auto* batch_cmd = app.add_subcommand("batch", "latency vs batch size");
  batch_cmd->add_option("--env", batch_envs, "BATCH=PATH, repeatable")->required();
  batch_cmd->add_option("--threshold", batch_threshold)->required();
  batch_cmd->add_option("--min-gap", batch_gap);
  batch_cmd->add_option("--out-dir", batch_dir);

  std::string quant_weights, quant_dir = ".";
  int quant_bits = 8;
  int64_t quant_block = 64;
  bool quant_common = false;
  auto* quant_cmd = app.add_subcommand("quant", "quantization leakage report");
  quant_cmd->add_option("--weights", quant_weights)->required();
  quant_cmd->add_option("--bits", quant_bits);
  quant_cmd->add_option("--block-size", quant_block);
  quant_cmd->add_flag("--common-convention", quant_common,
                      "use the 2^(b-1)-1 numerator instead of the published one");
  quant_cmd->add_option("--out-dir", quant_dir);

  double fb_d = 0.0, fb_lambda = 0.0;
  std::string fb_dir = ".";
  auto* boundary = app.add_subcommand("field-boundary", "near/far-field boundary 2*D^2/lambda");
  boundary->add_option("--d-m", fb_d)->required();
  boundary->add_option("--lambda-m", fb_lambda)->required();
  boundary->add_option("--out-dir", fb_dir);

  std::string plot_csv_path, plot_kind, plot_out = "plot.svg";
  double plot_threshold = 4.5;
  auto* plot_cmd = app.add_subcommand("plot", "render a CSV artifact as SVG");
  plot_cmd->add_option("--csv", plot_csv_path)->required();
  plot_cmd->add_option("--kind", plot_kind)
      ->required()
      ->check(CLI::IsMember({"rank", "corr", "correvo", "tvla", "envelope"}));
  plot_cmd->add_option("--out", plot_out);
  plot_cmd->add_option("--threshold", plot_threshold);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    app.exit(e);
    return 2;
  }

  try {
    if (*simulate) return run_simulate(sim);
    if (*attack_cpa) {
      cpa_opts.has_fixed_s2 = fixed_s2_opt->count() > 0;
      return run_attack_cpa(cpa_opts);
    }
    if (*attack_ho) return run_attack_hocpa(ho_opts);
    if (*rank_cmd) return run_rank(rank_opts);
    if (*preprocess) {
      auto [ts, meta] = wsca::read_trace_file(pre_in);
      if (pre_shift != 0) ts = wsca::shift(ts, pre_shift);
      if (pre_ma > 0) {
        const int window = wsca::moving_average_window(pre_ma, meta.samples_per_cycle);
        ts = wsca::moving_average(ts, pre_ma, meta.samples_per_cycle);
        meta = wsca::remap_meta_after_moving_average(meta, window);
      }
      if (pre_avg) std::tie(ts, meta) = wsca::average_by_input(ts, meta);
      const std::string path = out_path(pre_dir, pre_out);
      wsca::write_trace_file(path, ts, meta);
      write_run_echo(pre_dir, "preprocess",
                     json{{"in", pre_in},
                          {"shift", pre_shift},
                          {"moving_average_cycles", pre_ma},
                          {"average_by_input", pre_avg}});
      std::cout << "wrote " << ts.n_traces << " traces x " << ts.n_samples << " samples to "
                << path << "\n";
      return 0;
    }
    if (*tvla_cmd) return run_tvla(tvla_a, tvla_b, tvla_align, tvla_threshold, tvla_dir);
    if (*tokens_cmd) return run_tokens(tok_in, tok_threshold, tok_gap, tok_dir);
    if (*batch_cmd) return run_batch(batch_envs, batch_threshold, batch_gap, batch_dir);
    if (*quant_cmd) return run_quant(quant_weights, quant_bits, quant_block, quant_common, quant_dir);
    if (*boundary) {
      const double r = wsca::field_boundary(fb_d, fb_lambda);
      std::printf("%.6f m\n", r);
      write_run_echo(fb_dir, "field-boundary",
                     json{{"d_m", fb_d}, {"lambda_m", fb_lambda}, {"boundary_m", r}});
      return 0;
    }
    if (*plot_cmd) {
      wsca::plot_csv(plot_csv_path, plot_kind, plot_out, plot_threshold);
      const auto dir = fs::path(plot_out).parent_path();
      write_run_echo(dir.empty() ? "." : dir.string(), "plot",
                     json{{"csv", plot_csv_path}, {"kind", plot_kind}, {"out", plot_out},
                          {"threshold", plot_threshold}});
      std::cout << "wrote " << plot_out << "\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
