#include "wsca/higher_order.hpp"

#include <algorithm>
#include <cmath>

namespace wsca {

double combine_predictions(std::span<const double> site_predictions, Combine combine) {
  require(site_predictions.size() >= 2, Err::FewerThanTwoSites,
          "combining needs at least two sites");
  if (combine == Combine::Sum) {
    double sum = 0.0;
    for (double p : site_predictions) sum += p;
    return sum;
  }
  double prod = 1.0;
  for (double p : site_predictions) prod *= p;
  return prod;
}

double preprocess_samples(std::span<const double> site_values, Preprocess preprocess,
                          std::span<const double> site_means) {
  require(site_values.size() >= 2, Err::FewerThanTwoSites,
          "pre-processing needs at least two samples");
  if (preprocess == Preprocess::SquaredSum) {
    double sum = 0.0;
    for (double v : site_values) sum += v;
    return sum * sum;
  }
  require(site_means.size() == site_values.size(), Err::DimMismatch,
          "centered product needs one mean per site");
  double prod = 1.0;
  for (size_t i = 0; i < site_values.size(); ++i) prod *= site_values[i] - site_means[i];
  return prod;
}

namespace {

// Each configured sample must fall inside a recorded site's emission span;
// that site supplies the prediction inputs for the sample.
std::vector<size_t> map_samples_to_sites(const TraceMeta& meta, const TraceSet& ts,
                                         const std::vector<int>& samples) {
  require(samples.size() >= 2, Err::FewerThanTwoSites, "need at least two site samples");
  std::vector<size_t> site_of;
  for (int s : samples) {
    require(s >= 0 && uint64_t(s) < ts.n_samples, Err::SiteOutOfRange,
            "combined sample outside the trace");
    bool found = false;
    for (size_t k = 0; k < meta.sites.size(); ++k) {
      const auto& site = meta.sites[k];
      if (s >= site.sample_index && s < site.sample_index + site.span) {
        site_of.push_back(k);
        found = true;
        break;
      }
    }
    require(found, Err::SiteOutOfRange,
            "sample " + std::to_string(s) + " is not covered by any recorded site");
  }
  // Combining only makes sense for leakage of the same weight.
  for (size_t i = 1; i < site_of.size(); ++i)
    require(meta.sites[site_of[i]].weight_column == meta.sites[site_of[0]].weight_column,
            Err::BadArgument, "combined sites leak different weight columns");
  return site_of;
}

struct HoAccums {
  uint64_t n = 0;
  std::vector<double> sx, sxx, sxy; // per candidate
  double sy = 0.0, syy = 0.0;
};

CpaResult ho_finalize(const HoAccums& acc, size_t n_cand, ptrdiff_t truth_index) {
  CpaResult res;
  res.n_candidates = n_cand;
  res.n_samples = 1;
  res.n_traces_used = acc.n;
  res.truth_index = truth_index;
  res.window_lo = 0;
  res.window_hi = 1;
  const double nan = std::nan("");
  res.rho.assign(n_cand, nan);
  res.candidate_excluded.assign(n_cand, 0);
  res.sample_excluded.assign(1, 0);
  res.peak_abs.assign(n_cand, nan);
  res.peak_rho.assign(n_cand, nan);
  res.peak_sample.assign(n_cand, -1);

  const double n = double(acc.n);
  const double vy = acc.syy - acc.sy * acc.sy / n;
  const double ymean = acc.sy / n;
  if (vy <= 1e-10 * n * ymean * ymean + 1e-30) {
    res.sample_excluded[0] = 1;
    for (size_t c = 0; c < n_cand; ++c) res.candidate_excluded[c] = 1;
    return res;
  }
  for (size_t c = 0; c < n_cand; ++c) {
    const double vx = acc.sxx[c] - acc.sx[c] * acc.sx[c] / n;
    if (vx <= 0.0) {
      res.candidate_excluded[c] = 1;
      continue;
    }
    const double cov = acc.sxy[c] - acc.sx[c] * acc.sy / n;
    const double r = cov / std::sqrt(vx * vy);
    res.rho[c] = r;
    res.peak_abs[c] = std::abs(r);
    res.peak_rho[c] = r;
    res.peak_sample[c] = 0;
  }
  return res;
}

struct HoDriver {
  std::vector<Predictor> predictors; // one per combined sample
  std::vector<size_t> site_of;
  std::vector<double> means; // per combined sample, CenteredProduct only
  HoConfig ho;

  HoDriver(const TraceSet& ts, const TraceMeta& meta, const CandidateSpace& space,
           const AttackConfig& cfg, const HoConfig& ho_cfg)
      : ho(ho_cfg) {
    site_of = map_samples_to_sites(meta, ts, ho.site_samples);
    for (size_t k : site_of) {
      AttackConfig site_cfg = cfg;
      site_cfg.site = int(k);
      predictors.emplace_back(meta, space, site_cfg);
    }
    if (ho.preprocess == Preprocess::CenteredProduct) {
      means.assign(ho.site_samples.size(), 0.0);
      for (uint64_t t = 0; t < ts.n_traces; ++t)
        for (size_t i = 0; i < ho.site_samples.size(); ++i)
          means[i] += double(ts.at(t, uint64_t(ho.site_samples[i])));
      for (auto& m : means) m /= double(ts.n_traces);
    }
  }

  void accumulate_trace(const TraceSet& ts, uint64_t t, size_t n_cand,
                        std::vector<double>& preds_scratch, HoAccums& acc) const {
    const size_t n_sites = predictors.size();
    for (size_t i = 0; i < n_sites; ++i)
      predictors[i].predict(t, 0, n_cand, preds_scratch.data() + i * n_cand);

    std::vector<double> values(n_sites);
    for (size_t i = 0; i < n_sites; ++i)
      values[i] = double(ts.at(t, uint64_t(ho.site_samples[i])));
    const double tc = preprocess_samples(values, ho.preprocess, means);

    acc.sy += tc;
    acc.syy += tc * tc;
    for (size_t c = 0; c < n_cand; ++c) {
      double combined;
      if (ho.combine == Combine::Sum) {
        combined = 0.0;
        for (size_t i = 0; i < n_sites; ++i) combined += preds_scratch[i * n_cand + c];
      } else {
        combined = 1.0;
        for (size_t i = 0; i < n_sites; ++i) combined *= preds_scratch[i * n_cand + c];
      }
      acc.sx[c] += combined;
      acc.sxx[c] += combined * combined;
      acc.sxy[c] += combined * tc;
    }
    acc.n++;
  }
};

} // namespace

CpaResult ho_cpa(const TraceSet& ts, const TraceMeta& meta, const CandidateSpace& space,
                 const AttackConfig& cfg, const HoConfig& ho) {
  ts.validate();
  require(ts.n_traces >= 2, Err::BadArgument, "correlation needs at least two traces");
  const HoDriver driver(ts, meta, space, cfg, ho);
  const size_t C = space.size();
  HoAccums acc;
  acc.sx.assign(C, 0.0);
  acc.sxx.assign(C, 0.0);
  acc.sxy.assign(C, 0.0);
  std::vector<double> scratch(driver.predictors.size() * C);
  for (uint64_t t = 0; t < ts.n_traces; ++t)
    driver.accumulate_trace(ts, t, C, scratch, acc);
  return ho_finalize(acc, C, driver.predictors.front().truth_index());
}

RankCurve ho_rank_curve(const TraceSet& ts, const TraceMeta& meta, const CandidateSpace& space,
                        const AttackConfig& cfg, const HoConfig& ho, uint64_t step) {
  ts.validate();
  require(step >= 1, Err::BadArgument, "step must be >= 1");
  const HoDriver driver(ts, meta, space, cfg, ho);
  const size_t C = space.size();
  const ptrdiff_t truth = driver.predictors.front().truth_index();
  require(truth >= 0, Err::TruthNotInSpace,
          "rank curves need the planted weight inside the candidate space");

  HoAccums acc;
  acc.sx.assign(C, 0.0);
  acc.sxx.assign(C, 0.0);
  acc.sxy.assign(C, 0.0);
  std::vector<double> scratch(driver.predictors.size() * C);
  RankCurve curve;
  for (uint64_t t = 0; t < ts.n_traces; ++t) {
    driver.accumulate_trace(ts, t, C, scratch, acc);
    const bool checkpoint = ((t + 1) % step == 0) || (t + 1 == ts.n_traces);
    if (!checkpoint || acc.n < 2) continue;
    CpaResult snap = ho_finalize(acc, C, truth);
    curve.n_traces.push_back(t + 1);
    curve.ranks.push_back(key_rank(snap));
  }
  return curve;
}

} // namespace wsca
