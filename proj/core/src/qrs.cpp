#include "painsig/qrs.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <deque>

#include "painsig/errors.hpp"
#include "painsig/la.hpp"

namespace painsig {

namespace {

// Expands prod (z - r_i) into monomial coefficients, highest power first.
std::vector<std::complex<double>> poly_from_roots(
    const std::vector<std::complex<double>>& roots) {
  std::vector<std::complex<double>> c{1.0};
  for (const std::complex<double>& r : roots) {
    std::vector<std::complex<double>> next(c.size() + 1, 0.0);
    for (std::size_t i = 0; i < c.size(); ++i) {
      next[i] += c[i];
      next[i + 1] -= c[i] * r;
    }
    c = std::move(next);
  }
  return c;
}

}  // namespace

IirFilter design_bandpass(double low_hz, double high_hz, double fs, int order) {
  if (!(fs > 0.0) || !(low_hz > 0.0) || !(high_hz > low_hz) ||
      !(high_hz < fs / 2.0) || order < 1)
    raise(Errc::InvalidParameter, "band-pass design needs 0 < low < high < fs/2");

  // Butterworth analog low-pass prototype poles on the unit circle.
  std::vector<std::complex<double>> proto;
  for (int k = 0; k < order; ++k) {
    double theta = M_PI * (2.0 * k + order + 1.0) / (2.0 * order);
    proto.emplace_back(std::cos(theta), std::sin(theta));
  }

  // Prewarped band edges for the bilinear transform.
  const double w1 = 2.0 * fs * std::tan(M_PI * low_hz / fs);
  const double w2 = 2.0 * fs * std::tan(M_PI * high_hz / fs);
  const double bw = w2 - w1;
  const double w0 = std::sqrt(w1 * w2);

  // Low-pass -> band-pass: each prototype pole splits into two.
  std::vector<std::complex<double>> poles;
  for (const std::complex<double>& p : proto) {
    std::complex<double> t = 0.5 * bw * p;
    std::complex<double> d = std::sqrt(t * t - w0 * w0);
    poles.push_back(t + d);
    poles.push_back(t - d);
  }
  // Band-pass gain bw^order, `order` zeros at s = 0.
  std::complex<double> gain = std::pow(bw, order);

  // Bilinear transform: s -> 2 fs (z-1)/(z+1).
  const double fs2 = 2.0 * fs;
  std::vector<std::complex<double>> zpoles;
  for (const std::complex<double>& s : poles) {
    zpoles.push_back((fs2 + s) / (fs2 - s));
    gain /= (fs2 - s);
  }
  gain *= std::pow(fs2, order);  // from the `order` analog zeros at s = 0
  // Digital zeros: `order` at z=+1 (images of s=0) plus `order` at z=-1
  // (the analog degree deficit mapped to Nyquist).
  std::vector<std::complex<double>> zzeros(order, std::complex<double>(1.0, 0.0));
  zzeros.insert(zzeros.end(), order, std::complex<double>(-1.0, 0.0));

  std::vector<std::complex<double>> bpoly = poly_from_roots(zzeros);
  std::vector<std::complex<double>> apoly = poly_from_roots(zpoles);

  IirFilter f;
  f.b.resize(bpoly.size());
  f.a.resize(apoly.size());
  for (std::size_t i = 0; i < bpoly.size(); ++i) f.b[i] = (gain * bpoly[i]).real();
  for (std::size_t i = 0; i < apoly.size(); ++i) f.a[i] = apoly[i].real();
  double a0 = f.a[0];
  for (double& v : f.b) v /= a0;
  for (double& v : f.a) v /= a0;
  return f;
}

namespace {

// Steady-state delay-line values for a unit-step input (direct form II
// transposed), so filtering a constant yields the constant times H(1) from
// the very first sample.
std::vector<double> steady_state(const IirFilter& f) {
  const std::size_t n = std::max(f.a.size(), f.b.size());
  std::vector<double> a(f.a);
  std::vector<double> b(f.b);
  a.resize(n, 0.0);
  b.resize(n, 0.0);

  // Solve (I - C^T) zi = b[1:] - a[1:] b[0], with C the companion matrix of
  // a: C[0][k] = -a[k+1], C[k][k-1] = 1, so C^T[i][j] = C[j][i].
  const std::size_t m = n - 1;
  Matrix lhs(m, m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      double ct = (j == 0 ? -a[i + 1] : (j == i + 1 ? 1.0 : 0.0));
      lhs(i, j) = (i == j ? 1.0 : 0.0) - ct;
    }
  std::vector<double> rhs(m);
  for (std::size_t i = 0; i < m; ++i) rhs[i] = b[i + 1] - a[i + 1] * b[0];
  return solve(std::move(lhs), std::move(rhs));
}

std::vector<double> lfilter(const IirFilter& f, std::span<const double> x,
                            const std::vector<double>& zi_template, double scale) {
  const std::size_t order = std::max(f.a.size(), f.b.size());
  std::vector<double> a(f.a), b(f.b);
  a.resize(order, 0.0);
  b.resize(order, 0.0);
  std::vector<double> z(order - 1, 0.0);
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = zi_template[i] * scale;

  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    double xi = x[i];
    double yi = b[0] * xi + z[0];
    for (std::size_t k = 0; k + 1 < z.size(); ++k)
      z[k] = b[k + 1] * xi + z[k + 1] - a[k + 1] * yi;
    z[z.size() - 1] = b[order - 1] * xi - a[order - 1] * yi;
    y[i] = yi;
  }
  return y;
}

}  // namespace

std::vector<double> filtfilt(const IirFilter& f, std::span<const double> x) {
  if (x.empty()) return {};
  const std::size_t order = std::max(f.a.size(), f.b.size());
  std::size_t pad = order;
  if (pad >= x.size()) pad = x.size() - 1;

  // Mirror `pad` samples (excluding the end point itself) at each edge.
  std::vector<double> ext;
  ext.reserve(x.size() + 2 * pad);
  for (std::size_t i = pad; i >= 1; --i) ext.push_back(x[i]);
  ext.insert(ext.end(), x.begin(), x.end());
  for (std::size_t i = 2; i <= pad + 1; ++i) ext.push_back(x[x.size() - i]);

  const std::vector<double> zi = steady_state(f);

  std::vector<double> fwd = lfilter(f, ext, zi, ext.front());
  std::reverse(fwd.begin(), fwd.end());
  std::vector<double> bwd = lfilter(f, fwd, zi, fwd.front());
  std::reverse(bwd.begin(), bwd.end());

  return {bwd.begin() + static_cast<std::ptrdiff_t>(pad),
          bwd.begin() + static_cast<std::ptrdiff_t>(pad + x.size())};
}

namespace {

constexpr double kBandLowHz = 5.0;
constexpr double kBandHighHz = 15.0;
constexpr double kIntegrationS = 0.150;
constexpr double kRefractoryS = 0.200;
constexpr double kTwaveWindowS = 0.360;
constexpr double kRefineS = 0.075;
constexpr double kSearchBackFactor = 1.66;

std::size_t round_window(double seconds, double fs) {
  long long w = std::llround(seconds * fs);
  return w < 1 ? 1 : static_cast<std::size_t>(w);
}

struct StageSignals {
  std::vector<double> bandpassed;
  std::vector<double> derivative;
  std::vector<double> squared;
  std::vector<double> integrated;
};

StageSignals run_stages(std::span<const double> samples, double fs) {
  StageSignals s;
  IirFilter bp = design_bandpass(kBandLowHz, kBandHighHz, fs);
  s.bandpassed = filtfilt(bp, samples);

  const std::size_t n = samples.size();
  const double scale = fs / 8.0;
  s.derivative.resize(n);
  auto at = [&](long long i) {
    if (i < 0) i = 0;
    if (i >= static_cast<long long>(n)) i = static_cast<long long>(n) - 1;
    return s.bandpassed[static_cast<std::size_t>(i)];
  };
  for (std::size_t i = 0; i < n; ++i) {
    long long j = static_cast<long long>(i);
    s.derivative[i] =
        scale * (-at(j - 2) - 2.0 * at(j - 1) + 2.0 * at(j + 1) + at(j + 2));
  }

  s.squared.resize(n);
  for (std::size_t i = 0; i < n; ++i) s.squared[i] = s.derivative[i] * s.derivative[i];

  const std::size_t w = round_window(kIntegrationS, fs);
  std::vector<long double> prefix(n + 1, 0.0L);
  for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + s.squared[i];
  s.integrated.resize(n);
  const long long half = static_cast<long long>((w - 1) / 2);
  for (std::size_t i = 0; i < n; ++i) {
    // Window [i - half, i - half + w - 1], clamped to the signal; the mean
    // divides by the clamped count so edges are not artificially damped.
    long long lo = static_cast<long long>(i) - half;
    long long hi = lo + static_cast<long long>(w) - 1;
    if (lo < 0) lo = 0;
    if (hi >= static_cast<long long>(n)) hi = static_cast<long long>(n) - 1;
    long double sum = prefix[hi + 1] - prefix[lo];
    double mean = static_cast<double>(sum / static_cast<long double>(hi - lo + 1));
    s.integrated[i] = mean < 0.0 ? 0.0 : mean;
  }
  return s;
}

}  // namespace

PreprocessedStages preprocess(const EcgSegment& segment) {
  if (!(segment.fs > 0.0)) raise(Errc::NonPositiveFs, "segment fs");
  const std::size_t w = round_window(kIntegrationS, segment.fs);
  if (segment.samples.size() < w)
    raise(Errc::SegmentTooShort,
          "need at least " + std::to_string(w) + " samples for integration");
  StageSignals s = run_stages(segment.samples, segment.fs);
  return {std::move(s.bandpassed), std::move(s.derivative), std::move(s.squared),
          std::move(s.integrated), segment.fs};
}

namespace detail {

std::vector<std::size_t> detect_peaks_span(std::span<const double> samples,
                                           double fs) {
  const std::size_t n = samples.size();
  const std::size_t integration_w = round_window(kIntegrationS, fs);
  if (n < integration_w + 4) return {};

  StageSignals s = run_stages(samples, fs);
  const std::vector<double>& integ = s.integrated;
  const std::vector<double>& bp = s.bandpassed;
  const std::vector<double>& deriv = s.derivative;

  const std::size_t refractory = round_window(kRefractoryS, fs);
  const std::size_t twave_w = round_window(kTwaveWindowS, fs);
  const std::size_t refine_w = round_window(kRefineS, fs);

  // Candidate peaks: local maxima of the integrated stage.
  struct Candidate {
    std::size_t idx;
    double height;
  };
  std::vector<Candidate> cands;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    if (integ[i] > integ[i - 1] && integ[i] >= integ[i + 1] && integ[i] > 0.0)
      cands.push_back({i, integ[i]});
  }
  if (cands.empty()) return {};

  // Threshold cold start from the first two seconds (or what exists).
  std::size_t init_len = std::min<std::size_t>(n, round_window(2.0, fs));
  double spk = 0.0;
  double npk = 0.0;
  for (std::size_t i = 0; i < init_len; ++i) {
    spk = std::max(spk, integ[i]);
    npk += integ[i];
  }
  npk /= static_cast<double>(init_len);

  auto threshold1 = [&] { return npk + 0.25 * (spk - npk); };

  // Max absolute band-passed slope near an index; the T-wave discriminator.
  auto slope_at = [&](std::size_t idx) {
    std::size_t lo = idx >= refine_w ? idx - refine_w : 0;
    std::size_t hi = std::min(n - 1, idx + refine_w);
    double m = 0.0;
    for (std::size_t i = lo; i <= hi; ++i) m = std::max(m, std::abs(deriv[i]));
    return m;
  };

  std::vector<std::size_t> accepted;  // integrated-domain indices
  double last_slope = 0.0;
  std::deque<double> rr_history;
  auto rr_average = [&] {
    double sum = 0.0;
    for (double rr : rr_history) sum += rr;
    return rr_history.empty() ? 0.0 : sum / static_cast<double>(rr_history.size());
  };
  auto record_rr = [&](double rr) {
    rr_history.push_back(rr);
    if (rr_history.size() > 8) rr_history.pop_front();
  };

  auto is_twave = [&](std::size_t idx, double slope) {
    if (accepted.empty()) return false;
    std::size_t prev = accepted.back();
    if (idx - prev >= twave_w) return false;
    return slope < 0.5 * last_slope;
  };

  auto accept = [&](std::size_t idx, double height, bool searchback) {
    if (searchback) {
      spk = 0.25 * height + 0.75 * spk;
    } else {
      spk = 0.125 * height + 0.875 * spk;
    }
    if (!accepted.empty()) record_rr(static_cast<double>(idx - accepted.back()));
    accepted.push_back(idx);
    last_slope = slope_at(idx);
  };

  for (std::size_t ci = 0; ci < cands.size(); ++ci) {
    const Candidate& cand = cands[ci];

    // Retrospective search when the gap since the last peak is too long.
    if (!accepted.empty() && !rr_history.empty()) {
      double gap = static_cast<double>(cand.idx - accepted.back());
      if (gap > kSearchBackFactor * rr_average()) {
        double low_threshold = 0.5 * threshold1();
        std::size_t best = 0;
        double best_h = 0.0;
        bool found = false;
        for (std::size_t cj = 0; cj < ci; ++cj) {
          std::size_t idx = cands[cj].idx;
          if (idx <= accepted.back() + refractory) continue;
          if (idx + refractory > cand.idx) continue;
          double h = cands[cj].height;
          if (h > low_threshold && h > best_h && !is_twave(idx, slope_at(idx))) {
            best = idx;
            best_h = h;
            found = true;
          }
        }
        if (found) accept(best, best_h, /*searchback=*/true);
      }
    }

    if (!accepted.empty() && cand.idx <= accepted.back() + refractory) continue;

    if (cand.height > threshold1()) {
      double slope = slope_at(cand.idx);
      if (is_twave(cand.idx, slope)) {
        npk = 0.125 * cand.height + 0.875 * npk;
        continue;
      }
      accept(cand.idx, cand.height, /*searchback=*/false);
    } else {
      npk = 0.125 * cand.height + 0.875 * npk;
    }
  }
  if (accepted.empty()) return {};

  // Refine each detection to the band-passed local maximum within +/- 75 ms,
  // ties to the earliest sample.
  std::vector<std::size_t> refined;
  refined.reserve(accepted.size());
  for (std::size_t idx : accepted) {
    std::size_t lo = idx >= refine_w ? idx - refine_w : 0;
    std::size_t hi = std::min(n - 1, idx + refine_w);
    std::size_t best = lo;
    for (std::size_t i = lo + 1; i <= hi; ++i)
      if (bp[i] > bp[best]) best = i;
    refined.push_back(best);
  }

  // Refinement can merge neighbors; keep strictly increasing indices with the
  // refractory gap, preferring the taller band-passed sample.
  std::sort(refined.begin(), refined.end());
  std::vector<std::size_t> out;
  for (std::size_t idx : refined) {
    if (!out.empty() && idx < out.back() + refractory) {
      if (bp[idx] > bp[out.back()]) out.back() = idx;
      continue;
    }
    out.push_back(idx);
  }
  return out;
}

}  // namespace detail

RPeakList detect_r_peaks(const EcgSegment& segment) {
  if (!(segment.fs > 0.0)) raise(Errc::NonPositiveFs, "segment fs");
  if (segment.duration_s() < 2.0)
    raise(Errc::SegmentTooShort, "detection needs at least 2 s of signal");
  std::vector<std::size_t> peaks =
      detail::detect_peaks_span(segment.samples, segment.fs);
  if (peaks.empty()) raise(Errc::NoQrsFound, "segment " + segment.segment_id);
  return {std::move(peaks), segment.fs};
}

IbiSeries peaks_to_ibis(const RPeakList& peaks) {
  if (peaks.indices.size() < 2)
    raise(Errc::InsufficientPeaks, "need at least 2 peaks, got " +
                                       std::to_string(peaks.indices.size()));
  IbiSeries ibis(peaks.indices.size() - 1);
  for (std::size_t i = 0; i + 1 < peaks.indices.size(); ++i)
    ibis[i] = static_cast<double>(peaks.indices[i + 1] - peaks.indices[i]);
  return ibis;
}

}  // namespace painsig
