#include "wsca/assess.hpp"

#include <algorithm>
#include <cmath>

#include "wsca/errors.hpp"

namespace wsca {

namespace {

struct GroupStats {
  // Per-sample sums over the group plus the sums of per-trace means, which is
  // what a mean-filled shifted sample degenerates to at the edges.
  std::vector<double> sum, sumsq;
  double mean_sum = 0.0, mean_sumsq = 0.0;
  uint64_t n = 0;

  static GroupStats build(const TraceSet& ts) {
    GroupStats st;
    st.n = ts.n_traces;
    st.sum.assign(size_t(ts.n_samples), 0.0);
    st.sumsq.assign(size_t(ts.n_samples), 0.0);
    for (uint64_t t = 0; t < ts.n_traces; ++t) {
      auto row = ts.row(t);
      double m = 0.0;
      for (uint64_t s = 0; s < ts.n_samples; ++s) {
        const double v = double(row[size_t(s)]);
        st.sum[size_t(s)] += v;
        st.sumsq[size_t(s)] += v * v;
        m += v;
      }
      m /= double(ts.n_samples);
      st.mean_sum += m;
      st.mean_sumsq += m * m;
    }
    return st;
  }

  void at(int64_t s, int64_t n_samples, double& sum_out, double& sumsq_out) const {
    if (s >= 0 && s < n_samples) {
      sum_out = sum[size_t(s)];
      sumsq_out = sumsq[size_t(s)];
    } else {
      sum_out = mean_sum;
      sumsq_out = mean_sumsq;
    }
  }
};

bool welch_t(double sum_a, double sumsq_a, uint64_t na, double sum_b, double sumsq_b,
             uint64_t nb, double& t_out) {
  const double ma = sum_a / double(na);
  const double mb = sum_b / double(nb);
  const double va = std::max(0.0, (sumsq_a - sum_a * ma) / double(na - 1));
  const double vb = std::max(0.0, (sumsq_b - sum_b * mb) / double(nb - 1));
  const double denom_sq = va / double(na) + vb / double(nb);
  const double scale = (ma * ma + mb * mb) * 1e-12 + 1e-300;
  if (denom_sq <= scale) {
    t_out = 0.0;
    return false; // both groups constant: t undefined
  }
  t_out = (ma - mb) / std::sqrt(denom_sq);
  return true;
}

} // namespace

TvlaReport tvla(const TraceSet& group_a, const TraceSet& group_b, int align_range,
                double threshold) {
  group_a.validate();
  group_b.validate();
  require(group_a.n_samples == group_b.n_samples, Err::DimMismatch,
          "groups must share the sample count");
  require(group_a.n_traces >= 2 && group_b.n_traces >= 2, Err::BadArgument,
          "each group needs at least two traces");
  require(align_range >= 0, Err::BadArgument, "align_range must be >= 0");

  const int64_t m = int64_t(group_a.n_samples);
  const GroupStats sa = GroupStats::build(group_a);
  const GroupStats sb = GroupStats::build(group_b);

  TvlaReport rep;
  rep.threshold = threshold;
  rep.t.assign(size_t(m), 0.0);
  rep.best_shift.assign(size_t(m), 0);
  rep.degenerate.assign(size_t(m), 0);

  for (int64_t s = 0; s < m; ++s) {
    double best_t = 0.0;
    int best_shift = 0;
    bool any_defined = false;
    for (int shift = -align_range; shift <= align_range; ++shift) {
      // Group B shifted by `shift` contributes its sample s-shift here.
      double sum_b, sumsq_b;
      sb.at(s - shift, m, sum_b, sumsq_b);
      double t = 0.0;
      if (!welch_t(sa.sum[size_t(s)], sa.sumsq[size_t(s)], sa.n, sum_b, sumsq_b, sb.n, t))
        continue;
      any_defined = true;
      if (std::abs(t) > std::abs(best_t) || (shift == 0 && std::abs(t) == std::abs(best_t))) {
        best_t = t;
        best_shift = shift;
      }
    }
    if (!any_defined) {
      rep.degenerate[size_t(s)] = 1;
      rep.t[size_t(s)] = std::nan("");
      continue;
    }
    rep.t[size_t(s)] = best_t;
    rep.best_shift[size_t(s)] = best_shift;
    if (std::abs(best_t) > threshold) rep.exceed_indices.push_back(size_t(s));
    if (std::abs(best_t) > rep.max_abs_t) {
      rep.max_abs_t = std::abs(best_t);
      rep.argmax_sample = size_t(s);
    }
  }
  return rep;
}

namespace {

template <typename T>
std::vector<Segment> segment_envelope(std::span<const T> envelope,
                                      const EnvelopeSegmentation& cfg) {
  require(cfg.min_gap >= 1, Err::BadArgument, "min_gap must be >= 1");
  std::vector<Segment> segs;
  bool inside = false;
  size_t start = 0;
  for (size_t i = 0; i <= envelope.size(); ++i) {
    const bool above = i < envelope.size() && double(envelope[i]) > cfg.threshold;
    if (above && !inside) {
      inside = true;
      start = i;
    } else if (!above && inside) {
      inside = false;
      segs.push_back(Segment{start, i});
    }
  }
  // Merge runs whose separating gap is shorter than min_gap.
  std::vector<Segment> merged;
  for (const auto& seg : segs) {
    if (!merged.empty() && seg.start - merged.back().end < size_t(cfg.min_gap))
      merged.back().end = seg.end;
    else
      merged.push_back(seg);
  }
  return merged;
}

} // namespace

std::vector<Segment> count_forward_passes(std::span<const double> envelope,
                                          const EnvelopeSegmentation& cfg) {
  return segment_envelope(envelope, cfg);
}

std::vector<Segment> count_forward_passes(std::span<const float> envelope,
                                          const EnvelopeSegmentation& cfg) {
  return segment_envelope(envelope, cfg);
}

BatchLatencyTable batch_latency(
    const std::vector<std::pair<double, std::vector<double>>>& labeled_envelopes,
    const EnvelopeSegmentation& cfg) {
  require(labeled_envelopes.size() >= 2, Err::BadArgument,
          "need at least two batch sizes to compare");
  BatchLatencyTable table;
  for (const auto& [batch, env] : labeled_envelopes) {
    const auto segs = count_forward_passes(std::span<const double>(env), cfg);
    double active = 0.0;
    for (const auto& s : segs) active += double(s.duration());
    table.rows.push_back(BatchLatencyRow{batch, active, segs.size()});
  }
  std::sort(table.rows.begin(), table.rows.end(),
            [](const auto& a, const auto& b) { return a.batch < b.batch; });
  table.monotone_nondecreasing = true;
  for (size_t i = 1; i < table.rows.size(); ++i)
    if (table.rows[i].active_duration < table.rows[i - 1].active_duration)
      table.monotone_nondecreasing = false;
  return table;
}

} // namespace wsca
