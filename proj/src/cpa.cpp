#include "wsca/cpa.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

namespace wsca {

namespace {

struct Accums {
  size_t n_cand = 0, n_samp = 0;
  uint64_t n = 0;
  std::vector<double> sx, sxx; // per candidate
  std::vector<double> sxy;     // candidate x sample
  std::vector<double> sy, syy; // per sample

  Accums(size_t c, size_t s) : n_cand(c), n_samp(s) {
    sx.assign(c, 0.0);
    sxx.assign(c, 0.0);
    sxy.assign(c * s, 0.0);
    sy.assign(s, 0.0);
    syy.assign(s, 0.0);
  }
};

void resolve_window(const AttackConfig& cfg, size_t n_samples, int& lo, int& hi) {
  lo = std::max(0, cfg.window_lo);
  hi = cfg.window_hi < 0 ? int(n_samples) : std::min(cfg.window_hi, int(n_samples));
  require(lo < hi, Err::BadArgument, "empty peak-search window");
}

// Accumulate candidates [c0, c1) over traces [t0, t1). The per-sample sums are
// updated only when requested so threaded chunks do not double-count them.
void accumulate_chunk(const TraceSet& ts, const Predictor& pred, size_t c0, size_t c1,
                      uint64_t t0, uint64_t t1, bool with_samples, Accums& acc) {
  const size_t S = size_t(ts.n_samples);
  std::vector<double> preds(c1 - c0);
  for (uint64_t t = t0; t < t1; ++t) {
    pred.predict(t, c0, c1, preds.data());
    auto row = ts.row(t);
    for (size_t c = c0; c < c1; ++c) {
      const double p = preds[c - c0];
      acc.sx[c] += p;
      acc.sxx[c] += p * p;
      double* out = acc.sxy.data() + c * S;
      for (size_t s = 0; s < S; ++s) out[s] += p * double(row[s]);
    }
    if (with_samples) {
      for (size_t s = 0; s < S; ++s) {
        const double y = double(row[s]);
        acc.sy[s] += y;
        acc.syy[s] += y * y;
      }
    }
  }
  if (with_samples) acc.n += t1 - t0;
}

void accumulate(const TraceSet& ts, const Predictor& pred, uint64_t t0, uint64_t t1,
                Accums& acc, int threads) {
  const size_t C = acc.n_cand;
  if (threads <= 1 || C < 2) {
    accumulate_chunk(ts, pred, 0, C, t0, t1, true, acc);
    return;
  }
  const size_t n_chunks = std::min(size_t(threads), C);
  std::vector<std::thread> pool;
  for (size_t k = 0; k < n_chunks; ++k) {
    const size_t c0 = C * k / n_chunks;
    const size_t c1 = C * (k + 1) / n_chunks;
    pool.emplace_back([&, c0, c1, k] {
      accumulate_chunk(ts, pred, c0, c1, t0, t1, /*with_samples=*/k == 0, acc);
    });
  }
  for (auto& th : pool) th.join();
}

// Sample variance guard: float traces accumulate rounding error, so a
// relative epsilon separates "constant" from real variance.
bool sample_degenerate(double var_sum, double sum, uint64_t n) {
  const double mean = sum / double(n);
  return var_sum <= 1e-10 * double(n) * mean * mean + 1e-30;
}

CpaResult finalize(const Accums& acc, const AttackConfig& cfg, ptrdiff_t truth_index) {
  CpaResult res;
  res.n_candidates = acc.n_cand;
  res.n_samples = acc.n_samp;
  res.n_traces_used = acc.n;
  res.truth_index = truth_index;
  resolve_window(cfg, acc.n_samp, res.window_lo, res.window_hi);

  const double n = double(acc.n);
  const double nan = std::nan("");
  res.rho.assign(acc.n_cand * acc.n_samp, nan);
  res.candidate_excluded.assign(acc.n_cand, 0);
  res.sample_excluded.assign(acc.n_samp, 0);
  res.peak_abs.assign(acc.n_cand, nan);
  res.peak_rho.assign(acc.n_cand, nan);
  res.peak_sample.assign(acc.n_cand, -1);

  std::vector<double> vy(acc.n_samp);
  for (size_t s = 0; s < acc.n_samp; ++s) {
    vy[s] = acc.syy[s] - acc.sy[s] * acc.sy[s] / n;
    if (sample_degenerate(vy[s], acc.sy[s], acc.n)) res.sample_excluded[s] = 1;
  }
  for (size_t c = 0; c < acc.n_cand; ++c) {
    // Predictions are integer-valued sums, exact in binary64: vx <= 0 really
    // does mean a constant prediction.
    const double vx = acc.sxx[c] - acc.sx[c] * acc.sx[c] / n;
    if (vx <= 0.0) {
      res.candidate_excluded[c] = 1;
      continue;
    }
    const double* sxy = acc.sxy.data() + c * acc.n_samp;
    double best = -1.0;
    for (size_t s = 0; s < acc.n_samp; ++s) {
      if (res.sample_excluded[s]) continue;
      const double cov = sxy[s] - acc.sx[c] * acc.sy[s] / n;
      const double r = cov / std::sqrt(vx * vy[s]);
      res.rho[c * acc.n_samp + s] = r;
      if (int(s) >= res.window_lo && int(s) < res.window_hi && std::abs(r) > best) {
        best = std::abs(r);
        res.peak_abs[c] = best;
        res.peak_rho[c] = r;
        res.peak_sample[c] = int64_t(s);
      }
    }
  }
  return res;
}

int rank_from_peaks(const std::vector<double>& peak_abs,
                    const std::vector<uint8_t>& excluded, ptrdiff_t truth_index) {
  require(truth_index >= 0 && size_t(truth_index) < peak_abs.size(), Err::TruthNotInSpace,
          "ground-truth candidate is not in the enumerated space");
  if (excluded[size_t(truth_index)] || std::isnan(peak_abs[size_t(truth_index)])) {
    // A degenerate truth scores below every candidate that produced a peak.
    int finite = 0;
    for (size_t c = 0; c < peak_abs.size(); ++c)
      if (!std::isnan(peak_abs[c])) ++finite;
    return finite;
  }
  const double t = peak_abs[size_t(truth_index)];
  int rank = 0;
  for (size_t c = 0; c < peak_abs.size(); ++c) {
    if (ptrdiff_t(c) == truth_index || std::isnan(peak_abs[c])) continue;
    if (peak_abs[c] > t) ++rank;
  }
  return rank;
}

} // namespace

CpaResult cpa(const TraceSet& ts, const TraceMeta& meta, const CandidateSpace& space,
              const AttackConfig& cfg, int threads) {
  ts.validate();
  require(ts.n_traces >= 2, Err::BadArgument, "correlation needs at least two traces");
  const Predictor pred(meta, space, cfg);
  Accums acc(space.size(), size_t(ts.n_samples));
  accumulate(ts, pred, 0, ts.n_traces, acc, threads);
  return finalize(acc, cfg, pred.truth_index());
}

int key_rank(const CpaResult& result, ptrdiff_t truth_index) {
  return rank_from_peaks(result.peak_abs, result.candidate_excluded, truth_index);
}

int key_rank(const CpaResult& result) { return key_rank(result, result.truth_index); }

RankCurve rank_curve(const TraceSet& ts, const TraceMeta& meta, const CandidateSpace& space,
                     const AttackConfig& cfg, uint64_t step, Evolution* evolution) {
  ts.validate();
  require(step >= 1, Err::BadArgument, "step must be >= 1");
  const Predictor pred(meta, space, cfg);
  require(pred.truth_index() >= 0, Err::TruthNotInSpace,
          "rank curves need the planted weight inside the candidate space");

  Accums acc(space.size(), size_t(ts.n_samples));
  RankCurve curve;
  for (uint64_t t = 0; t < ts.n_traces; ++t) {
    accumulate_chunk(ts, pred, 0, space.size(), t, t + 1, true, acc);
    const bool checkpoint = ((t + 1) % step == 0) || (t + 1 == ts.n_traces);
    if (!checkpoint || acc.n < 2) continue;
    CpaResult snap = finalize(acc, cfg, pred.truth_index());
    curve.n_traces.push_back(t + 1);
    curve.ranks.push_back(key_rank(snap));
    if (evolution) {
      evolution->n_traces.push_back(t + 1);
      std::vector<float> peaks(space.size());
      for (size_t c = 0; c < space.size(); ++c) peaks[c] = float(snap.peak_abs[c]);
      evolution->peak_abs.push_back(std::move(peaks));
    }
  }
  return curve;
}

std::optional<uint64_t> traces_to_rank0(const RankCurve& curve) {
  if (curve.ranks.empty() || curve.ranks.back() != 0) return std::nullopt;
  size_t i = curve.ranks.size();
  while (i > 0 && curve.ranks[i - 1] == 0) --i;
  return curve.n_traces[i]; // first checkpoint of the trailing all-zero run
}

S2Sweep cpa_fixed_s2_sweep(const TraceSet& ts, const TraceMeta& meta,
                           const CandidateSpace& space, const AttackConfig& cfg,
                           std::span<const float> s2_hypotheses, int threads) {
  require(!s2_hypotheses.empty(), Err::BadArgument, "need at least one s2 hypothesis");
  require(s2_hypotheses.size() <= kMaxS2Hypotheses, Err::BadArgument,
          "s2 hypothesis set exceeds the build cap");
  S2Sweep sweep;
  sweep.peak_per_hypothesis.assign(s2_hypotheses.size(), std::nan(""));
  double best = -1.0;
  for (size_t h = 0; h < s2_hypotheses.size(); ++h) {
    AttackConfig hcfg = cfg;
    hcfg.fixed_s2 = s2_hypotheses[h];
    const CpaResult res = cpa(ts, meta, space, hcfg, threads);
    double h_best = -1.0;
    size_t h_cand = 0;
    for (size_t c = 0; c < res.peak_abs.size(); ++c) {
      if (std::isnan(res.peak_abs[c])) continue;
      if (res.peak_abs[c] > h_best) {
        h_best = res.peak_abs[c];
        h_cand = c;
      }
    }
    if (h_best >= 0.0) sweep.peak_per_hypothesis[h] = h_best;
    if (h_best > best) {
      best = h_best;
      sweep.best_hypothesis = h;
      sweep.best_s2 = s2_hypotheses[h];
      sweep.best_candidate = h_cand;
      sweep.best_peak = h_best;
    }
  }
  return sweep;
}

} // namespace wsca
