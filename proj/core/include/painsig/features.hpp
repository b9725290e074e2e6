#pragma once

#include <array>
#include <iosfwd>
#include <string>
#include <vector>

#include "painsig/dataio.hpp"
#include "painsig/qrs.hpp"

namespace painsig {

// The six inter-beat-interval features. Intervals are kept in SAMPLE units
// (not seconds): hr = 60 * fs / mu only balances dimensionally that way.
struct IbiFeatures {
  double mu = 0.0;     // mean IBI, samples
  double rmssd = 0.0;  // root mean square of successive differences, samples
  double sdnn = 0.0;   // standard deviation of IBIs (n-1 denominator), samples
  double slope = 0.0;  // least-squares slope of IBI vs interval index
  double sr = 0.0;     // sdnn / rmssd, 0 when rmssd < 1e-12
  double hr = 0.0;     // 60 * fs / mu, beats per minute

  std::array<double, 6> as_array() const { return {mu, rmssd, sdnn, slope, sr, hr}; }
};

// mu = mean; rmssd = sqrt(mean of n-1 successive squared differences);
// sdnn = sqrt((1/(n-1)) * sum((IBI_i - mu)^2)); slope from the normal
// equations A^T A x = A^T b with design A = [index, 1] (intercept fitted,
// slope reported); sr = sdnn/rmssd with the 0-at-zero-rmssd convention;
// hr = 60 * fs / mu. Raises InsufficientIbis for fewer than 2 intervals.
IbiFeatures compute_ibi_features(const IbiSeries& ibis, double fs);

enum class AugmentMode { None, G, A, GA };

const char* to_string(AugmentMode mode) noexcept;
AugmentMode augment_mode_from_string(const std::string& text);

// gender code: Male = 0, Female = 1
double gender_code(Gender g) noexcept;

struct AugmentedFeatures {
  IbiFeatures base;
  std::vector<double> extras;  // (gender), (age), or (gender, age)

  std::vector<double> as_vector() const;
};

// None -> 6 values; G -> +gender code; A -> +age; GA -> +both (gender, age).
AugmentedFeatures augment_features(const IbiFeatures& base, const SubjectMeta& meta,
                                   AugmentMode mode);

// Per-second heart-rate values, length floor(duration_s).
struct HeartRateSeries {
  std::vector<double> values;  // bpm
};

// Splits the segment into non-overlapping 1 s windows, detects peaks on each
// window widened by 0.5 s of context per side, and computes HR = 60 * fs / mu
// from the intervals between in-window peaks. Windows with fewer than two
// peaks receive the arithmetic mean of the nearest computable neighbors
// before and after (single-sided copy at the edges). Raises SegmentTooShort
// (duration < 2 s) or NoComputableWindow.
HeartRateSeries heart_rate_series(const EcgSegment& segment);

// One exported feature row; CSV schema:
//   segment_id,mu,rmssd,sdnn,slope,sr,hr[,gender,age],label
struct FeatureRow {
  std::string segment_id;
  AugmentedFeatures features;
  PainLabel label = PainLabel::NP;
};

void write_features_csv(std::ostream& out, const std::vector<FeatureRow>& rows,
                        AugmentMode mode);

}  // namespace painsig
