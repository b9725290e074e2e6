#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "painsig/dataio.hpp"

namespace painsig {

// Recursive IIR filter in transfer-function form, a[0] normalized to 1.
struct IirFilter {
  std::vector<double> b;
  std::vector<double> a;
};

// 2nd-order Butterworth band-pass designed by the bilinear transform with
// frequency prewarping. Coefficients are exposed so callers can evaluate the
// frequency response themselves.
IirFilter design_bandpass(double low_hz, double high_hz, double fs, int order = 2);

// Zero-phase forward-backward filtering. Edges are handled by reflecting one
// filter length of samples at each end and starting both passes from the
// filter's steady state, so constant inputs come out (numerically) constant.
std::vector<double> filtfilt(const IirFilter& f, std::span<const double> x);

// The four preprocessing stages, in order, each the same length as the input.
struct PreprocessedStages {
  std::vector<double> bandpassed;
  std::vector<double> derivative;
  std::vector<double> squared;
  std::vector<double> integrated;
  double fs = 0.0;
};

// Band-pass (5-15 Hz, zero phase) -> five-point derivative scaled by fs ->
// pointwise squaring -> centered moving average over round(0.150 * fs)
// samples. Raises SegmentTooShort when len(samples) < round(0.150 * fs).
PreprocessedStages preprocess(const EcgSegment& segment);

struct RPeakList {
  std::vector<std::size_t> indices;  // strictly increasing
  double fs = 0.0;
};

// Adaptive-threshold R peak detection over the integrated stage.
//   - signal/noise peak trackers updated with factors 0.125/0.875,
//     THRESHOLD = NPK + 0.25 * (SPK - NPK)
//   - 200 ms refractory between accepted peaks
//   - search-back at gaps > 1.66 x running RR average using 0.5 * THRESHOLD
//   - candidates within 360 ms of the previous peak whose max absolute
//     band-passed slope is < 0.5 x the previous peak's are dropped as T waves
//   - each accepted detection lands on the band-passed local maximum within
//     +/- 75 ms (ties to the earliest sample)
// Raises SegmentTooShort (duration < 2 s) or NoQrsFound.
RPeakList detect_r_peaks(const EcgSegment& segment);

using IbiSeries = std::vector<double>;  // inter-beat intervals, sample units

// IBI_i = indices[i+1] - indices[i]. Raises InsufficientPeaks for < 2 peaks.
IbiSeries peaks_to_ibis(const RPeakList& peaks);

namespace detail {
// Detection core over raw samples with a configurable threshold-initialization
// window; returns an empty list instead of raising when nothing is found.
// heart_rate_series uses this on short slices where the public precondition
// (>= 2 s) cannot hold.
std::vector<std::size_t> detect_peaks_span(std::span<const double> samples,
                                           double fs);
}  // namespace detail

}  // namespace painsig
