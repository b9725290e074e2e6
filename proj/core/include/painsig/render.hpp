#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace painsig {

// Radix-2 iterative FFT. Inputs whose length is not a power of two are
// zero-padded to the next power of two; the effective length is the size of
// the returned vector.
std::vector<std::complex<double>> fft(std::span<const double> x);
std::vector<std::complex<double>> fft(std::vector<std::complex<double>> x);
// Inverse transform; returns the first original_len real parts.
std::vector<double> ifft_real(const std::vector<std::complex<double>>& spectrum,
                              std::size_t original_len);

struct Stft {
  std::size_t window_len = 0;
  std::size_t hop = 0;
  std::size_t fft_len = 0;     // effective (padded) FFT length
  std::size_t n_frames = 0;
  std::size_t n_bins = 0;      // frequencies 0..fs/2 -> fft_len/2 + 1 bins
  double fs = 0.0;
  // Row-major frames x bins.
  std::vector<std::complex<double>> cells;

  std::complex<double>& at(std::size_t frame, std::size_t bin) {
    return cells[frame * n_bins + bin];
  }
  std::complex<double> at(std::size_t frame, std::size_t bin) const {
    return cells[frame * n_bins + bin];
  }
};

// Hann-windowed frames, frame count floor((N - window_len)/hop) + 1.
// Raises SignalTooShort (N < window_len) or InvalidParameter.
Stft stft(std::span<const double> x, double fs, std::size_t window_len = 64,
          std::size_t hop = 16);

enum class ImageKind { Waveform, SpecAngle, SpecPhase, SpecPsd };

const char* to_string(ImageKind kind) noexcept;
ImageKind image_kind_from_string(const std::string& text);

inline constexpr int kImageSize = 224;

struct SignalImage {
  ImageKind kind = ImageKind::Waveform;
  int width = kImageSize;
  int height = kImageSize;
  std::vector<std::uint8_t> rgb;  // row-major, 3 bytes per pixel, top row first
};

// Pre-colormap spectrogram matrix for one image kind (frames x bins):
//   SpecAngle -> atan2 phase in [-pi, pi]
//   SpecPhase -> phase unwrapped along time within each frequency bin
//   SpecPsd   -> 10*log10(|X|^2 / (fs * sum(window^2)) + 1e-12), clipped to
//                [-120, 0] dB
struct SpectroField {
  std::size_t n_frames = 0;
  std::size_t n_bins = 0;
  std::vector<double> values;  // row-major frames x bins

  double at(std::size_t frame, std::size_t bin) const {
    return values[frame * n_bins + bin];
  }
};

SpectroField spectro_field(const Stft& transform, ImageKind kind);

// 224 x 224 RGB rendering; pure function of its arguments, byte-identical
// across runs and thread counts. Waveform: min-max normalized polyline in the
// vertical [5%, 95%] band, black on white, flat signals on the midline.
// Spectrograms: time left-to-right, low frequency at the bottom, values
// quantized through the embedded 256-entry colormap, nearest-neighbor scaled.
// Raises SignalTooShort.
SignalImage render(std::span<const double> x, double fs, ImageKind kind,
                   std::size_t window_len = 64, std::size_t hop = 16);

// Embedded 256-entry RGB colormap (dark blue -> green -> yellow ramp).
const std::array<std::array<std::uint8_t, 3>, 256>& colormap256();

// Minimal self-contained PNG encoder (8-bit RGB, no alpha): stored-block
// zlib stream, so identical pixels give identical bytes on any platform.
std::vector<std::uint8_t> encode_png(const SignalImage& image);
void write_png(const std::filesystem::path& path, const SignalImage& image);
// P6 fallback.
void write_ppm(const std::filesystem::path& path, const SignalImage& image);

}  // namespace painsig
