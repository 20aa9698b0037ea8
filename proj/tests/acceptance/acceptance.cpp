// Acceptance suite: every exit criterion runs end to end against the library
// and prints one PASS/FAIL line. Thresholds and tolerances are pinned here.

#include <doctest.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "wsca/assess.hpp"
#include "wsca/cpa.hpp"
#include "wsca/higher_order.hpp"
#include "wsca/quant.hpp"
#include "wsca/rng.hpp"
#include "wsca/synth.hpp"

#include "../support/oracles.hpp"

using namespace wsca;

namespace {

void report(int n, bool pass, const std::string& detail) {
  std::printf("[criterion %2d] %s  %s\n", n, pass ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  CHECK_MESSAGE(pass, "criterion ", n, ": ", detail);
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Shift-alias rivals (w vs 2w) correlate above 0.999 and stall convergence at
// desk scale; dominance experiments compare predictor structures, so they
// plant weights with no power-of-two alias inside int8: odd, |w| >= 65.
int8_t alias_free_weight(Rng& rng) {
  int8_t w = 0;
  do {
    w = int8_t(rng.range(-127, 127));
  } while ((w & 1) == 0 || std::abs(int(w)) < 65);
  return w;
}

void plant_alias_free(KernelScenario& sc, uint64_t seed) {
  Rng rng(derive_stream(seed, Stream::Weights, 99));
  const auto& sh = sc.imma_shape;
  for (int d = 0; d < sh.weights_per_kernel; ++d)
    for (int j = 0; j < sh.n; ++j)
      sc.imma_weights[size_t(d) * sh.n + j] = alias_free_weight(rng);
}

TraceSet head(const TraceSet& ts, uint64_t n) {
  TraceSet out;
  out.n_traces = std::min(n, ts.n_traces);
  out.n_samples = ts.n_samples;
  out.dtype = ts.dtype;
  out.samples.assign(ts.samples.begin(),
                     ts.samples.begin() + ptrdiff_t(out.n_traces * ts.n_samples));
  return out;
}

uint64_t convergence_or(const RankCurve& curve, uint64_t fallback) {
  const auto c = traces_to_rank0(curve);
  return c ? *c : fallback;
}

RfChannelConfig toy_rf(double distance = 1.0, double glass_db = 0.0) {
  RfChannelConfig cfg;
  cfg.carrier_hz = 250e3;
  cfg.passband_rate_hz = 1e6;
  cfg.baseband_rate_hz = 50e3;
  cfg.rx_bandwidth_hz = 25e3;
  cfg.distance_m = distance;
  cfg.glass_loss_db = glass_db;
  cfg.reference_gain = 1.0;
  return cfg;
}

} // namespace

TEST_CASE("criterion 1: streaming Pearson equals the two-pass oracle under budget") {
  const auto t0 = std::chrono::steady_clock::now();
  KernelScenario sc = imma_demo_scenario(1001);
  sc.trace_length = 200;
  sc.sites[0].sample_index = 100;
  const PowerStats st = site_power_stats(sc, 0);
  sc.noise_sigma = 1.0 * st.stddev;
  const uint64_t n = 10000;
  const auto res = synthesize(sc, n);
  const CandidateSpace space = int8_space();
  const AttackConfig cfg;

  const CpaResult streaming = cpa(res.traces, res.meta, space, cfg, /*threads=*/1);

  // naive two-pass: explicit means, then centered products
  const Predictor pred(res.meta, space, cfg);
  const size_t C = space.size(), S = size_t(res.traces.n_samples);
  std::vector<double> preds(C * n);
  {
    std::vector<double> row(C);
    for (uint64_t t = 0; t < n; ++t) {
      pred.predict(t, 0, C, row.data());
      for (size_t c = 0; c < C; ++c) preds[c * n + t] = row[c];
    }
  }
  std::vector<double> mx(C, 0.0), my(S, 0.0);
  for (size_t c = 0; c < C; ++c) {
    for (uint64_t t = 0; t < n; ++t) mx[c] += preds[c * n + t];
    mx[c] /= double(n);
  }
  for (uint64_t t = 0; t < n; ++t)
    for (size_t s = 0; s < S; ++s) my[s] += double(res.traces.at(t, s));
  for (size_t s = 0; s < S; ++s) my[s] /= double(n);

  std::vector<double> sxx(C, 0.0), syy(S, 0.0), sxy(C * S, 0.0);
  std::vector<double> ydev(S);
  for (uint64_t t = 0; t < n; ++t) {
    for (size_t s = 0; s < S; ++s) {
      ydev[s] = double(res.traces.at(t, s)) - my[s];
      syy[s] += ydev[s] * ydev[s];
    }
    for (size_t c = 0; c < C; ++c) {
      const double xd = preds[c * n + t] - mx[c];
      sxx[c] += xd * xd;
      double* out = sxy.data() + c * S;
      for (size_t s = 0; s < S; ++s) out[s] += xd * ydev[s];
    }
  }

  double max_delta = 0.0;
  size_t compared = 0;
  for (size_t c = 0; c < C; ++c)
    for (size_t s = 0; s < S; ++s) {
      const double fast = streaming.rho_at(c, s);
      if (sxx[c] <= 0.0 || syy[s] <= 0.0) continue;
      const double naive = sxy[c * S + s] / std::sqrt(sxx[c] * syy[s]);
      if (std::isnan(fast)) continue;
      max_delta = std::max(max_delta, std::abs(fast - naive));
      ++compared;
    }
  const double elapsed = seconds_since(t0);

  char buf[256];
  std::snprintf(buf, sizeof buf,
                "10000x256x200 max |drho| = %.3g (tol 1e-9), %zu cells, %.1fs single-threaded "
                "(budget 30s)",
                max_delta, compared, elapsed);
  report(1, max_delta < 1e-9 && compared >= 50'000 && elapsed < 30.0, buf);
}

TEST_CASE("criterion 2: noiseless exactness") {
  KernelScenario sc = imma_demo_scenario(1002);
  sc.noise_sigma = 0.0;
  sc.jitter_max = 0;
  const auto res = synthesize(sc, 64);
  const CpaResult r = cpa(res.traces, res.meta, int8_space(), AttackConfig{});
  const double rho = r.rho_at(size_t(r.truth_index), size_t(sc.sites[0].sample_index));
  const int rank = key_rank(r);
  char buf[160];
  std::snprintf(buf, sizeof buf, "sigma=0: rho(correct)=%.15f at the leak site, rank %d with 64 traces",
                rho, rank);
  report(2, std::abs(rho - 1.0) < 1e-12 && rank == 0, buf);
}

TEST_CASE("criterion 3: warp-level predictor dominates the single-register predictor") {
  std::vector<double> n16s, n1s;
  double worst_run = 0.0;
  bool n16_converged = true;
  for (uint64_t seed = 601; seed <= 605; ++seed) {
    const auto t0 = std::chrono::steady_clock::now();
    KernelScenario sc = imma_demo_scenario(seed);
    sc.samples_per_cycle = 1;
    sc.jitter_max = 2;
    plant_alias_free(sc, seed);
    const PowerStats st = site_power_stats(sc, 0);
    sc.noise_sigma = 2.0 * st.stddev;

    const uint64_t budget = 200000;
    const auto res = synthesize(sc, budget);
    // moving average over the 5-sample jitter span gathers the scattered leak
    const TraceSet ma = moving_average(res.traces, 5, 1);
    const TraceMeta meta = remap_meta_after_moving_average(res.meta, 5);

    AttackConfig warp, single;
    single.n_model = 1;
    const RankCurve c16 = rank_curve(head(ma, 60000), meta, int8_space(), warp, 250);
    const RankCurve c1 = rank_curve(ma, meta, int8_space(), single, 1000);
    if (!traces_to_rank0(c16)) n16_converged = false;
    n16s.push_back(double(convergence_or(c16, 60001)));
    // an unconverged single-register attack gets budget+1, a lower bound that
    // only makes the ratio harder to satisfy
    n1s.push_back(double(convergence_or(c1, budget + 1)));
    worst_run = std::max(worst_run, seconds_since(t0));
  }
  const double m16 = median(n16s), m1 = median(n1s);
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "sigma=2*std, jitter +/-2: median traces-to-rank-0 n16=%g n1=%g ratio %.3f "
                "(need <= 0.5); slowest run %.1fs (budget 120s)",
                m16, m1, m16 / m1, worst_run);
  report(3, n16_converged && m16 <= 0.5 * m1 && worst_run < 120.0, buf);
}

TEST_CASE("criterion 4: combining sites beats the best single-site attack") {
  std::vector<double> firsts, ho2s, ho3s;
  for (uint64_t seed = 611; seed <= 615; ++seed) {
    KernelScenario sc = imma_demo_scenario(seed);
    sc.sites[0].span = 3; // write-back smeared over three samples
    plant_alias_free(sc, seed);
    const PowerStats st = site_power_stats(sc, 0);
    sc.noise_sigma = 2.0 * st.stddev;
    sc.dc_level = 12.0 * st.stddev; // squared-sum needs the raw operating point

    const uint64_t budget = 30000;
    const auto res = synthesize(sc, budget);
    const int s0 = sc.sites[0].sample_index;
    const AttackConfig cfg;
    const RankCurve first = rank_curve(res.traces, res.meta, int8_space(), cfg, 100);
    HoConfig ho2, ho3;
    ho2.site_samples = {s0, s0 + 1};
    ho3.site_samples = {s0, s0 + 1, s0 + 2};
    const RankCurve r2 = ho_rank_curve(res.traces, res.meta, int8_space(), cfg, ho2, 100);
    const RankCurve r3 = ho_rank_curve(res.traces, res.meta, int8_space(), cfg, ho3, 100);
    firsts.push_back(double(convergence_or(first, budget + 1)));
    ho2s.push_back(double(convergence_or(r2, budget + 1)));
    ho3s.push_back(double(convergence_or(r3, budget + 1)));
  }
  const double m1 = median(firsts), m2 = median(ho2s), m3 = median(ho3s);
  char buf[200];
  std::snprintf(buf, sizeof buf,
                "median traces-to-rank-0: single-site %g, 2-site %g, 3-site %g "
                "(need 2-site < single, 3-site <= 2-site)",
                m1, m2, m3);
  report(4, m2 < m1 && m3 <= m2, buf);
}

TEST_CASE("criterion 5: bf16 known-prefix extraction with averaging") {
  KernelScenario sc = hmma_demo_scenario(621);
  sc.input_groups = 100; // 100 distinct inputs x 500 simulations each
  const PowerStats st = site_power_stats(sc, 0);
  sc.noise_sigma = 3.0 * st.stddev;
  const auto res = synthesize(sc, 50000);
  const auto [avg, ameta] = average_by_input(res.traces, res.meta);

  const CandidateSpace space = enumerate_bf16(1e-10, 1.0, true);
  HmmaPrefix prefix;
  prefix.weights = sc.hmma_weights;
  for (int i = 0; i < 8; ++i) prefix.known[size_t(i)] = (i != sc.target_index);
  AttackConfig cfg;
  cfg.hmma_prefix = prefix;

  const RankCurve curve = rank_curve(avg, ameta, space, cfg, 10);
  const bool final_zero = !curve.ranks.empty() && curve.ranks.back() == 0;

  // monotone after onset: a zero tail exists and ranks never rise before it
  bool monotone = false;
  for (size_t i = 0; i < curve.ranks.size(); ++i) {
    if (curve.ranks[i] != 0) continue;
    monotone = true;
    for (size_t j = i; j < curve.ranks.size(); ++j)
      if (curve.ranks[j] != 0) monotone = false;
    for (size_t j = 1; j <= i && monotone; ++j)
      if (curve.ranks[j] > curve.ranks[j - 1]) monotone = false;
    break;
  }
  std::string ranks_str;
  for (int r : curve.ranks) ranks_str += std::to_string(r) + " ";
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "7 of 8 weights revealed, %zu candidates, 100 averaged groups of 500: "
                "checkpoint ranks [ %s]",
                space.size(), ranks_str.c_str());
  report(5, final_zero && monotone, buf);
}

TEST_CASE("criterion 6: bf16 enumeration equals the 65536-pattern oracle") {
  bool equal = true;
  Rng rng(2024);
  for (int trial = 0; trial < 20; ++trial) {
    const double lo = rng.uniform(0.0, 1.5);
    const double hi = lo + rng.uniform(1e-6, 2.0);
    const bool neg = (trial % 2) == 0;
    const auto expect = oracles::brute_force_bf16(lo, hi, neg);
    const CandidateSpace sp = enumerate_bf16(lo, hi, neg);
    if (sp.size() != expect.size()) equal = false;
    for (size_t i = 0; equal && i < expect.size(); ++i)
      if (sp.values[i] != int64_t(expect[i])) equal = false;
  }
  const CandidateSpace paper_bounds = enumerate_bf16(1e-10, 1.0, true);
  const auto oracle_paper = oracles::brute_force_bf16(1e-10, 1.0, true);
  const bool paper_equal = paper_bounds.size() == oracle_paper.size();
  const CandidateSpace tighter = enumerate_bf16(1e-6, 1.0, true);

  char buf[320];
  std::snprintf(buf, sizeof buf,
                "20 random bounds exact; (1e-10,1) both signs -> %zu patterns vs the published "
                "5106 (documented discrepancy: the published count matches (1e-6,1) -> %zu)",
                paper_bounds.size(), tighter.size());
  report(6, equal && paper_equal, buf);
}

TEST_CASE("criterion 7: TVLA calibration") {
  KernelScenario sc = imma_demo_scenario(701);
  sc.trace_length = 1000;
  sc.sites[0].sample_index = 500;
  const PowerStats st = site_power_stats(sc, 0);
  sc.noise_sigma = 1.0 * st.stddev;

  // fixed vs random target weight
  KernelScenario rnd = sc;
  rnd.rng_seed = 702;
  rnd.randomize_target_weight = true;
  const auto ga = synthesize(sc, 10000);
  const auto gb = synthesize(rnd, 10000);
  const TvlaReport on = tvla(ga.traces, gb.traces);
  const bool leak_found = on.max_abs_t > 4.5 && on.argmax_sample == 500;

  // leakage off: identical populations, fresh noise, 20 seeded runs
  int clean_runs = 0;
  for (uint64_t run = 0; run < 20; ++run) {
    KernelScenario a = sc;
    a.rng_seed = 800 + 2 * run;
    KernelScenario b = sc;
    b.rng_seed = 801 + 2 * run;
    const auto na = synthesize(a, 10000);
    const auto nb = synthesize(b, 10000);
    if (tvla(na.traces, nb.traces).max_abs_t < 4.5) ++clean_runs;
  }
  char buf[240];
  std::snprintf(buf, sizeof buf,
                "fixed-vs-random weight max|t| = %.1f at the leak site (>4.5); null: %d/20 runs "
                "below 4.5 over 1000 samples (need >= 19)",
                on.max_abs_t, clean_runs);
  report(7, leak_found && clean_runs >= 19, buf);
}

TEST_CASE("criterion 8: far-field round trip") {
  const RfChannelConfig cfg = toy_rf();
  const size_t n = 1024;
  std::vector<double> envelope(n);
  for (size_t k = 0; k < n; ++k)
    envelope[k] = 1.0 + 0.5 * std::sin(2.0 * M_PI * 2e3 * double(k) / cfg.baseband_rate_hz);

  const auto recovered =
      envelope_magnitude(zero_if_downconvert(modulate(envelope, cfg), cfg));
  double err = 0.0, ref = 0.0;
  for (size_t k = 8; k + 4 < n; ++k) {
    const double rec = 2.0 * recovered[k] / cfg.amplitude_gain();
    err += (rec - envelope[k]) * (rec - envelope[k]);
    ref += envelope[k] * envelope[k];
  }
  const double rmse = std::sqrt(err / ref);

  // doubling the distance exactly halves every passband sample
  const auto near = modulate(envelope, toy_rf(0.5));
  const auto far = modulate(envelope, toy_rf(1.0));
  bool halves = near.size() == far.size();
  for (size_t i = 0; halves && i < near.size(); ++i)
    if (near[i] != 2.0 * far[i]) halves = false;

  // 6 dB of glass scales the amplitude by exactly 10^(-6/20)
  const auto clear = modulate(envelope, toy_rf(1.0, 0.0));
  const auto glass = modulate(envelope, toy_rf(1.0, 6.0));
  const double factor = std::pow(10.0, -6.0 / 20.0);
  double worst = 0.0;
  for (size_t i = 0; i < clear.size(); ++i)
    worst = std::max(worst, std::abs(glass[i] - factor * clear[i]) /
                                std::max(1.0, std::abs(factor * clear[i])));
  char buf[240];
  std::snprintf(buf, sizeof buf,
                "envelope RMSE %.2f%% (tol 5%%); distance doubling halves amplitude exactly: %s; "
                "glass 6 dB factor error %.2g (tol 1e-9)",
                100.0 * rmse, halves ? "yes" : "no", worst);
  report(8, rmse < 0.05 && halves && worst < 1e-9, buf);
}

TEST_CASE("criterion 9: near/far-field boundary") {
  const double r = field_boundary(0.025, 0.12);
  char buf[160];
  std::snprintf(buf, sizeof buf, "R(0.025 m, 0.12 m) = %.7f m (published approx 0.01042)", r);
  report(9, std::abs(r - 0.0104167) < 1e-5 && std::abs(r - 0.01042) < 1e-5, buf);
}

TEST_CASE("criterion 10: token counting through the far-field channel") {
  const RfChannelConfig cfg = toy_rf(0.25); // 25 cm equivalent gain
  bool counts_ok = true, first_longer = true;
  for (int k = 1; k <= 5; ++k) {
    std::vector<double> envelope(1400, 0.0);
    size_t pos = 50;
    for (int b = 0; b < k; ++b) {
      const size_t len = (b == 0) ? 180 : 120; // first forward pass runs 1.5x longer
      for (size_t i = 0; i < len; ++i) envelope[pos + i] = 1.0;
      pos += len + 60;
    }
    const auto mag = envelope_magnitude(zero_if_downconvert(modulate(envelope, cfg), cfg));
    const double plateau = cfg.amplitude_gain() / 2.0;
    const auto segs =
        count_forward_passes(std::span<const double>(mag), EnvelopeSegmentation{plateau / 2.0, 20});
    if (int(segs.size()) != k) counts_ok = false;
    for (size_t i = 1; i < segs.size(); ++i)
      if (segs[0].duration() <= segs[i].duration()) first_longer = false;
  }
  report(10, counts_ok && first_longer,
         "1..5 bursts counted exactly after the RF chain; first burst measurably longer");
}

TEST_CASE("criterion 11: quantization leakage") {
  Rng rng(1101);
  const QuantScheme scheme{8, 64, true};
  bool pinned_exact = true, bounded = true;
  for (int tensor = 0; tensor < 100; ++tensor) {
    std::vector<double> w(1024);
    for (auto& v : w) v = rng.uniform(-2.0, 2.0);
    const QuantLeakReport rep = leakage_report(w, scheme);
    for (const auto& b : rep.blocks) {
      size_t ext = b.offset;
      for (size_t i = b.offset; i < b.offset + b.count; ++i)
        if (std::abs(w[i]) > std::abs(w[ext])) ext = i;
      if (b.pinned_value != w[ext]) pinned_exact = false;
    }
    for (size_t offset = 0; offset < w.size(); offset += 64) {
      const auto block = std::span<const double>(w).subspan(offset, 64);
      const BlockQuant bq = derive_block(block, scheme);
      const double bound = 0.5 / bq.scale() * (1.0 + 1e-12);
      for (double v : block)
        if (std::abs(bq.dequantize(bq.quantize(v)) - v) > bound) bounded = false;
    }
  }
  report(11, pinned_exact && bounded,
         "100 random tensors, block 64, b=8: every pinned value equals the block extremum "
         "exactly; round-trip error <= 1/(2*q_s)");
}

TEST_CASE("criterion 12: shuffling strictly raises the trace requirement") {
  std::vector<double> offs, ons;
  bool off_converged = true;
  for (uint64_t seed = 631; seed <= 635; ++seed) {
    KernelScenario sc = imma_demo_scenario(seed);
    sc.sites.clear();
    for (int j = 0; j < 8; ++j) sc.sites.push_back(WarpSite{0, 8 + 6 * j, j, 16, 1});
    plant_alias_free(sc, seed);
    const PowerStats st = site_power_stats(sc, 0);
    sc.noise_sigma = 1.0 * st.stddev;

    const auto off = synthesize(sc, 30000);
    const auto on = synthesize(apply_shuffle(sc), 120000);
    const AttackConfig cfg;
    const RankCurve coff = rank_curve(off.traces, off.meta, int8_space(), cfg, 100);
    const RankCurve con = rank_curve(on.traces, on.meta, int8_space(), cfg, 500);
    if (!traces_to_rank0(coff)) off_converged = false;
    offs.push_back(double(convergence_or(coff, 30001)));
    // unconverged shuffle runs enter as the budget, a lower bound on the truth
    ons.push_back(double(convergence_or(con, 120001)));
  }
  const double moff = median(offs), mon = median(ons);
  char buf[200];
  std::snprintf(buf, sizeof buf,
                "median traces-to-rank-0: countermeasure off %g, shuffle on %g (need strictly "
                "greater)",
                moff, mon);
  report(12, off_converged && mon > moff, buf);
}
