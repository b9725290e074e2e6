#include <doctest.h>

#include <cmath>
#include <complex>
#include <functional>
#include <vector>

#include "painsig/dataio.hpp"
#include "painsig/detail/rng.hpp"
#include "painsig/errors.hpp"
#include "painsig/qrs.hpp"

using namespace painsig;

namespace {

constexpr double kPi = 3.14159265358979323846;

// Squared magnitude of the filter's frequency response at f, evaluated
// directly from the published transfer-function definition.
double gain2(const IirFilter& f, double freq_hz, double fs) {
  std::complex<double> z = std::exp(std::complex<double>(0.0, -2.0 * kPi * freq_hz / fs));
  std::complex<double> num = 0.0, den = 0.0, zk = 1.0;
  for (std::size_t k = 0; k < std::max(f.b.size(), f.a.size()); ++k) {
    if (k < f.b.size()) num += f.b[k] * zk;
    if (k < f.a.size()) den += f.a[k] * zk;
    zk *= z;
  }
  return std::norm(num / den);
}

EcgSegment segment_of(std::vector<double> samples, double fs) {
  EcgSegment seg;
  seg.segment_id = "t";
  seg.subject = {"t", Gender::Male, 30};
  seg.fs = fs;
  seg.samples = std::move(samples);
  return seg;
}

Errc code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return Errc::IoFailure;
}

// Matching at +/- tol samples between detected and reference peak lists;
// greedy in order, each reference used once.
struct MatchStats {
  std::size_t matched = 0, detected = 0, truth = 0;
};
MatchStats match_peaks(const std::vector<std::size_t>& detected,
                       const std::vector<std::size_t>& truth, long long tol) {
  MatchStats m;
  m.detected = detected.size();
  m.truth = truth.size();
  std::size_t j = 0;
  for (std::size_t d : detected) {
    while (j < truth.size() &&
           static_cast<long long>(truth[j]) < static_cast<long long>(d) - tol)
      ++j;
    if (j < truth.size() &&
        std::llabs(static_cast<long long>(truth[j]) - static_cast<long long>(d)) <= tol) {
      ++m.matched;
      ++j;
    }
  }
  return m;
}

}  // namespace

TEST_CASE("bandpass design matches the reference coefficients") {
  IirFilter f = design_bandpass(5.0, 15.0, 512.0, 2);
  REQUIRE(f.b.size() == 5);
  REQUIRE(f.a.size() == 5);
  // frozen from an independent run of the standard design procedure
  const double b_ref[5] = {0.003460684761378251, 0.0, -0.006921369522756502, 0.0,
                           0.003460684761378251};
  const double a_ref[5] = {1.0, -3.805214529160545, 5.453022062691062,
                           -3.4883663403144958, 0.8406758500795084};
  for (int i = 0; i < 5; ++i) {
    CHECK(f.b[i] == doctest::Approx(b_ref[i]).epsilon(1e-10));
    CHECK(f.a[i] == doctest::Approx(a_ref[i]).epsilon(1e-10));
  }
}

TEST_CASE("bandpass response passes 10 Hz and rejects 0.5 and 50 Hz") {
  IirFilter f = design_bandpass(5.0, 15.0, 512.0, 2);
  CHECK(gain2(f, 10.0, 512.0) == doctest::Approx(0.9961815038438058).epsilon(1e-9));
  CHECK(gain2(f, 50.0, 512.0) == doctest::Approx(0.0016014827448012268).epsilon(1e-9));
  CHECK(gain2(f, 0.5, 512.0) < 1e-4);
  // response inside the 5-15 Hz corners stays above the half-power line
  for (double hz : {6.0, 8.0, 10.0, 12.0, 14.0}) CHECK(gain2(f, hz, 512.0) > 0.5);
  for (double hz : {8.0, 10.0, 12.0}) CHECK(gain2(f, hz, 512.0) > 0.9);
}

TEST_CASE("bandpass design scales with the sampling rate") {
  // same normalized corners -> same digital filter
  IirFilter a = design_bandpass(5.0, 15.0, 512.0, 2);
  IirFilter b = design_bandpass(2.5, 7.5, 256.0, 2);
  for (int i = 0; i < 5; ++i) {
    CHECK(a.b[i] == doctest::Approx(b.b[i]).epsilon(1e-12));
    CHECK(a.a[i] == doctest::Approx(b.a[i]).epsilon(1e-12));
  }
}

TEST_CASE("filtfilt removes the mean of a constant signal") {
  IirFilter f = design_bandpass(5.0, 15.0, 512.0, 2);
  std::vector<double> x(600, 2.5);
  std::vector<double> y = filtfilt(f, x);
  REQUIRE(y.size() == x.size());
  for (double v : y) CHECK(std::abs(v) < 1e-9);
}

TEST_CASE("filtfilt has zero phase at a passband frequency") {
  IirFilter f = design_bandpass(5.0, 15.0, 512.0, 2);
  const double fs = 512.0, hz = 10.0;
  std::vector<double> x(4096);
  for (std::size_t i = 0; i < x.size(); ++i)
    x[i] = std::sin(2.0 * kPi * hz * static_cast<double>(i) / fs);
  std::vector<double> y = filtfilt(f, x);
  // forward-backward filtering squares the magnitude and cancels the phase:
  // away from the edges y ~= gain2 * x
  double g2 = gain2(f, hz, fs);
  for (std::size_t i = 512; i + 512 < x.size(); ++i)
    CHECK(y[i] == doctest::Approx(g2 * x[i]).epsilon(0.01));
}

TEST_CASE("preprocess stages follow their definitions") {
  SynthEcg s = synth_ecg(70.0, 10.0, 256.0, 0.01, 5);
  PreprocessedStages st = preprocess(s.segment);
  const std::size_t n = s.segment.samples.size();
  REQUIRE(st.bandpassed.size() == n);
  REQUIRE(st.derivative.size() == n);
  REQUIRE(st.squared.size() == n);
  REQUIRE(st.integrated.size() == n);
  const double fs = 256.0;

  // derivative: (fs/8)(-x[i-2] - 2x[i-1] + 2x[i+1] + x[i+2]), edges clamped
  auto at = [&](long long i) {
    if (i < 0) i = 0;
    if (i >= static_cast<long long>(n)) i = static_cast<long long>(n) - 1;
    return st.bandpassed[static_cast<std::size_t>(i)];
  };
  for (std::size_t i = 0; i < n; ++i) {
    long long ii = static_cast<long long>(i);
    double expect = (fs / 8.0) *
                    (-at(ii - 2) - 2.0 * at(ii - 1) + 2.0 * at(ii + 1) + at(ii + 2));
    CHECK(st.derivative[i] == doctest::Approx(expect).epsilon(1e-12));
  }

  // squaring is pointwise
  for (std::size_t i = 0; i < n; ++i)
    CHECK(st.squared[i] == doctest::Approx(st.derivative[i] * st.derivative[i]).epsilon(1e-12));

  // integration: centered moving average over round(0.150 fs) samples with
  // window clamping at the edges; even windows put the extra sample on the
  // right: [i - (w-1)/2, i + w/2]
  const long long w = std::llround(0.150 * fs);
  const long long half = (w - 1) / 2;
  for (std::size_t i = 0; i < n; i += 7) {
    long long lo = static_cast<long long>(i) - half;
    long long hi = lo + w - 1;
    if (lo < 0) lo = 0;
    if (hi >= static_cast<long long>(n)) hi = static_cast<long long>(n) - 1;
    double sum = 0.0;
    for (long long j = lo; j <= hi; ++j) sum += st.squared[static_cast<std::size_t>(j)];
    double expect = sum / static_cast<double>(hi - lo + 1);
    CHECK(st.integrated[i] == doctest::Approx(expect).epsilon(1e-9));
  }
  for (double v : st.integrated) CHECK(v >= 0.0);
}

TEST_CASE("preprocess rejects too-short input") {
  CHECK(code_of([] {
          auto seg = segment_of(std::vector<double>(10, 0.0), 256.0);
          preprocess(seg);
        }) == Errc::SegmentTooShort);
}

TEST_CASE("detector finds every clean beat at multiple rates") {
  for (double bpm : {50.0, 60.0, 75.0, 100.0, 120.0, 150.0}) {
    SynthEcg s = synth_ecg(bpm, 30.0, 256.0, 0.0, 0);
    RPeakList peaks = detect_r_peaks(s.segment);
    long long tol = std::llround(0.05 * 256.0);
    MatchStats m = match_peaks(peaks.indices, s.true_peaks, tol);
    INFO("bpm ", bpm);
    CHECK(m.detected == s.true_peaks.size());  // no T-wave doubles, no misses
    CHECK(m.matched == m.truth);
  }
}

TEST_CASE("noise-free detections land within one sample of the apex") {
  SynthEcg s = synth_ecg(80.0, 20.0, 512.0, 0.0, 0);
  RPeakList peaks = detect_r_peaks(s.segment);
  REQUIRE(peaks.indices.size() == s.true_peaks.size());
  for (std::size_t i = 0; i < peaks.indices.size(); ++i) {
    long long d = static_cast<long long>(peaks.indices[i]) -
                  static_cast<long long>(s.true_peaks[i]);
    CHECK(std::llabs(d) <= 1);
  }
}

TEST_CASE("detection survives moderate noise") {
  detail::Rng rng(11);
  for (int trial = 0; trial < 5; ++trial) {
    double bpm = 55.0 + 20.0 * trial;
    SynthEcg s = synth_ecg(bpm, 30.0, 256.0, 0.05, static_cast<std::uint32_t>(trial));
    RPeakList peaks = detect_r_peaks(s.segment);
    MatchStats m = match_peaks(peaks.indices, s.true_peaks, std::llround(0.05 * 256.0));
    double sens = static_cast<double>(m.matched) / static_cast<double>(m.truth);
    double ppv = static_cast<double>(m.matched) / static_cast<double>(m.detected);
    INFO("bpm ", bpm);
    CHECK(sens >= 0.99);
    CHECK(ppv >= 0.99);
  }
}

TEST_CASE("detected peaks are strictly increasing and respect the refractory gap") {
  SynthEcg s = synth_ecg(150.0, 30.0, 256.0, 0.03, 9);
  RPeakList peaks = detect_r_peaks(s.segment);
  const long long refractory = std::llround(0.200 * 256.0);
  for (std::size_t i = 1; i < peaks.indices.size(); ++i) {
    CHECK(peaks.indices[i] > peaks.indices[i - 1]);
    // refinement can move peaks, but never closer than the refractory window
    // minus the +/-75 ms refinement slack
    CHECK(static_cast<long long>(peaks.indices[i] - peaks.indices[i - 1]) >
          refractory - 2 * std::llround(0.075 * 256.0) - 1);
  }
}

TEST_CASE("detector errors are typed") {
  CHECK(code_of([] {
          auto seg = segment_of(std::vector<double>(256, 0.0), 256.0);  // 1 s
          detect_r_peaks(seg);
        }) == Errc::SegmentTooShort);
  CHECK(code_of([] {
          auto seg = segment_of(std::vector<double>(1024, 0.0), 256.0);  // flat
          detect_r_peaks(seg);
        }) == Errc::NoQrsFound);
}

TEST_CASE("detection is a pure function of the segment") {
  SynthEcg s = synth_ecg(90.0, 15.0, 256.0, 0.04, 21);
  RPeakList a = detect_r_peaks(s.segment);
  RPeakList b = detect_r_peaks(s.segment);
  CHECK(a.indices == b.indices);
  CHECK(a.fs == 256.0);
}

TEST_CASE("peaks_to_ibis differences and errors") {
  RPeakList peaks;
  peaks.fs = 256.0;
  peaks.indices = {10, 25, 45};
  IbiSeries ibis = peaks_to_ibis(peaks);
  CHECK(ibis == IbiSeries{15.0, 20.0});

  peaks.indices = {10};
  CHECK(code_of([&] { peaks_to_ibis(peaks); }) == Errc::InsufficientPeaks);
}

TEST_CASE("amplitude scaling does not move detections") {
  SynthEcg s = synth_ecg(65.0, 20.0, 256.0, 0.0, 0);
  RPeakList base = detect_r_peaks(s.segment);
  EcgSegment scaled = s.segment;
  for (double& v : scaled.samples) v *= 8.0;  // power of two: exact arithmetic
  RPeakList big = detect_r_peaks(scaled);
  CHECK(base.indices == big.indices);
}
