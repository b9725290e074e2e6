#include "painsig/features.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

#include "painsig/errors.hpp"

namespace painsig {

IbiFeatures compute_ibi_features(const IbiSeries& ibis, double fs) {
  const std::size_t n = ibis.size();
  if (n < 2)
    raise(Errc::InsufficientIbis,
          "need at least 2 intervals, got " + std::to_string(n));
  if (!(fs > 0.0)) raise(Errc::NonPositiveFs, "fs must be > 0");

  IbiFeatures f;
  double sum = 0.0;
  for (double v : ibis) sum += v;
  f.mu = sum / static_cast<double>(n);

  double ssd = 0.0;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    double d = ibis[i + 1] - ibis[i];
    ssd += d * d;
  }
  f.rmssd = std::sqrt(ssd / static_cast<double>(n - 1));

  double var = 0.0;
  for (double v : ibis) {
    double d = v - f.mu;
    var += d * d;
  }
  f.sdnn = std::sqrt(var / static_cast<double>(n - 1));

  // Least squares of IBI against interval index with an intercept, via the
  // normal equations A^T A x = A^T b with A = [index, 1]. Only the slope is
  // reported.
  double sx = 0.0, sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double xi = static_cast<double>(i);
    sx += xi;
    sxx += xi * xi;
    sxy += xi * ibis[i];
  }
  double nn = static_cast<double>(n);
  double det = sxx * nn - sx * sx;
  f.slope = (sxy * nn - sx * sum) / det;

  f.sr = f.rmssd < 1e-12 ? 0.0 : f.sdnn / f.rmssd;
  f.hr = 60.0 * fs / f.mu;
  return f;
}

const char* to_string(AugmentMode mode) noexcept {
  switch (mode) {
    case AugmentMode::None: return "none";
    case AugmentMode::G: return "g";
    case AugmentMode::A: return "a";
    case AugmentMode::GA: return "ga";
  }
  return "none";
}

AugmentMode augment_mode_from_string(const std::string& text) {
  if (text == "none") return AugmentMode::None;
  if (text == "g") return AugmentMode::G;
  if (text == "a") return AugmentMode::A;
  if (text == "ga") return AugmentMode::GA;
  raise(Errc::InvalidConfig, "unknown augment mode '" + text + "'");
}

double gender_code(Gender g) noexcept { return g == Gender::Male ? 0.0 : 1.0; }

std::vector<double> AugmentedFeatures::as_vector() const {
  std::array<double, 6> b = base.as_array();
  std::vector<double> v(b.begin(), b.end());
  v.insert(v.end(), extras.begin(), extras.end());
  return v;
}

AugmentedFeatures augment_features(const IbiFeatures& base, const SubjectMeta& meta,
                                   AugmentMode mode) {
  AugmentedFeatures out;
  out.base = base;
  switch (mode) {
    case AugmentMode::None:
      break;
    case AugmentMode::G:
      out.extras = {gender_code(meta.gender)};
      break;
    case AugmentMode::A:
      out.extras = {static_cast<double>(meta.age)};
      break;
    case AugmentMode::GA:
      out.extras = {gender_code(meta.gender), static_cast<double>(meta.age)};
      break;
  }
  return out;
}

HeartRateSeries heart_rate_series(const EcgSegment& segment) {
  if (!(segment.fs > 0.0)) raise(Errc::NonPositiveFs, "segment fs");
  const double fs = segment.fs;
  const double duration = segment.duration_s();
  if (duration < 2.0)
    raise(Errc::SegmentTooShort, "heart-rate series needs at least 2 s");

  const std::size_t n_windows = static_cast<std::size_t>(std::floor(duration));
  const std::size_t n = segment.samples.size();
  const long long context = std::llround(0.5 * fs);

  std::vector<double> values(n_windows, 0.0);
  std::vector<bool> computable(n_windows, false);

  for (std::size_t wi = 0; wi < n_windows; ++wi) {
    long long w_begin = std::llround(static_cast<double>(wi) * fs);
    long long w_end = std::llround(static_cast<double>(wi + 1) * fs);  // exclusive
    long long s_begin = std::max<long long>(0, w_begin - context);
    long long s_end = std::min<long long>(static_cast<long long>(n), w_end + context);

    std::span<const double> slice(segment.samples.data() + s_begin,
                                  static_cast<std::size_t>(s_end - s_begin));
    std::vector<std::size_t> peaks = detail::detect_peaks_span(slice, fs);

    // Keep peaks that land inside the window proper (not the context).
    std::vector<double> in_window;
    for (std::size_t p : peaks) {
      long long global = s_begin + static_cast<long long>(p);
      if (global >= w_begin && global < w_end)
        in_window.push_back(static_cast<double>(global));
    }
    if (in_window.size() >= 2) {
      double sum = 0.0;
      for (std::size_t i = 0; i + 1 < in_window.size(); ++i)
        sum += in_window[i + 1] - in_window[i];
      double mu = sum / static_cast<double>(in_window.size() - 1);
      values[wi] = 60.0 * fs / mu;
      computable[wi] = true;
    }
  }

  bool any = false;
  for (bool c : computable) any = any || c;
  if (!any)
    raise(Errc::NoComputableWindow,
          "no 1 s window contains two peaks in segment " + segment.segment_id);

  // Fill the gaps: mean of the nearest computable neighbors on each side,
  // single-sided copy at the edges.
  for (std::size_t wi = 0; wi < n_windows; ++wi) {
    if (computable[wi]) continue;
    double before = 0.0, after = 0.0;
    bool has_before = false, has_after = false;
    for (std::size_t j = wi; j-- > 0;) {
      if (computable[j]) {
        before = values[j];
        has_before = true;
        break;
      }
    }
    for (std::size_t j = wi + 1; j < n_windows; ++j) {
      if (computable[j]) {
        after = values[j];
        has_after = true;
        break;
      }
    }
    if (has_before && has_after) {
      values[wi] = 0.5 * (before + after);
    } else if (has_before) {
      values[wi] = before;
    } else {
      values[wi] = after;
    }
  }
  return {std::move(values)};
}

void write_features_csv(std::ostream& out, const std::vector<FeatureRow>& rows,
                        AugmentMode mode) {
  out << "segment_id,mu,rmssd,sdnn,slope,sr,hr";
  if (mode == AugmentMode::G || mode == AugmentMode::GA) out << ",gender";
  if (mode == AugmentMode::A || mode == AugmentMode::GA) out << ",age";
  out << ",label\n";
  std::ostringstream line;
  line.precision(17);
  for (const FeatureRow& row : rows) {
    line.str("");
    line << row.segment_id;
    for (double v : row.features.as_vector()) line << ',' << v;
    line << ',' << to_string(row.label) << '\n';
    out << line.str();
  }
}

}  // namespace painsig
