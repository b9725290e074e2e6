#include "painsig/render.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "painsig/errors.hpp"

namespace painsig {

namespace {

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

// In-place iterative radix-2 Cooley-Tukey; inverse applies conjugation and
// 1/N scaling. Length must be a power of two.
void fft_pow2(std::vector<std::complex<double>>& a, bool inverse) {
  const std::size_t n = a.size();
  // Bit-reversal permutation.
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    double angle = 2.0 * M_PI / static_cast<double>(len) * (inverse ? 1.0 : -1.0);
    std::complex<double> wlen(std::cos(angle), std::sin(angle));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        std::complex<double> u = a[i + k];
        std::complex<double> v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
  if (inverse) {
    for (std::complex<double>& v : a) v /= static_cast<double>(n);
  }
}

}  // namespace

std::vector<std::complex<double>> fft(std::vector<std::complex<double>> x) {
  if (x.empty()) return x;
  x.resize(next_pow2(x.size()), {0.0, 0.0});
  fft_pow2(x, false);
  return x;
}

std::vector<std::complex<double>> fft(std::span<const double> x) {
  std::vector<std::complex<double>> c(x.begin(), x.end());
  return fft(std::move(c));
}

std::vector<double> ifft_real(const std::vector<std::complex<double>>& spectrum,
                              std::size_t original_len) {
  if (spectrum.empty()) return {};
  std::vector<std::complex<double>> a = spectrum;
  a.resize(next_pow2(a.size()), {0.0, 0.0});
  fft_pow2(a, true);
  std::size_t n = std::min(original_len, a.size());
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i].real();
  return out;
}

Stft stft(std::span<const double> x, double fs, std::size_t window_len,
          std::size_t hop) {
  if (window_len < 8) raise(Errc::InvalidParameter, "window_len must be >= 8");
  if (hop < 1) raise(Errc::InvalidParameter, "hop must be >= 1");
  if (!(fs > 0.0)) raise(Errc::InvalidParameter, "fs must be > 0");
  if (x.size() < window_len)
    raise(Errc::SignalTooShort, "signal of " + std::to_string(x.size()) +
                                    " samples < window of " +
                                    std::to_string(window_len));

  Stft out;
  out.window_len = window_len;
  out.hop = hop;
  out.fs = fs;
  out.fft_len = next_pow2(window_len);
  out.n_frames = (x.size() - window_len) / hop + 1;
  out.n_bins = out.fft_len / 2 + 1;  // frequencies 0..fs/2
  out.cells.resize(out.n_frames * out.n_bins);

  // Hann window, w[i] = 0.5 (1 - cos(2 pi i / (L - 1))).
  std::vector<double> window(window_len);
  for (std::size_t i = 0; i < window_len; ++i)
    window[i] = 0.5 * (1.0 - std::cos(2.0 * M_PI * static_cast<double>(i) /
                                      static_cast<double>(window_len - 1)));

  std::vector<std::complex<double>> frame(out.fft_len);
  for (std::size_t f = 0; f < out.n_frames; ++f) {
    std::fill(frame.begin(), frame.end(), std::complex<double>(0.0, 0.0));
    for (std::size_t i = 0; i < window_len; ++i)
      frame[i] = x[f * hop + i] * window[i];
    fft_pow2(frame, false);
    for (std::size_t b = 0; b < out.n_bins; ++b) out.at(f, b) = frame[b];
  }
  return out;
}

const char* to_string(ImageKind kind) noexcept {
  switch (kind) {
    case ImageKind::Waveform: return "waveform";
    case ImageKind::SpecAngle: return "spec-angle";
    case ImageKind::SpecPhase: return "spec-phase";
    case ImageKind::SpecPsd: return "spec-psd";
  }
  return "waveform";
}

ImageKind image_kind_from_string(const std::string& text) {
  if (text == "waveform") return ImageKind::Waveform;
  if (text == "spec-angle") return ImageKind::SpecAngle;
  if (text == "spec-phase") return ImageKind::SpecPhase;
  if (text == "spec-psd") return ImageKind::SpecPsd;
  raise(Errc::InvalidConfig, "unknown image kind '" + text + "'");
}

SpectroField spectro_field(const Stft& transform, ImageKind kind) {
  SpectroField field;
  field.n_frames = transform.n_frames;
  field.n_bins = transform.n_bins;
  field.values.resize(field.n_frames * field.n_bins);

  switch (kind) {
    case ImageKind::SpecAngle: {
      for (std::size_t f = 0; f < field.n_frames; ++f)
        for (std::size_t b = 0; b < field.n_bins; ++b) {
          std::complex<double> v = transform.at(f, b);
          field.values[f * field.n_bins + b] = std::atan2(v.imag(), v.real());
        }
      break;
    }
    case ImageKind::SpecPhase: {
      // Unwrap along the time axis within each frequency bin: add +/- 2 pi
      // whenever a successive difference exceeds pi.
      for (std::size_t b = 0; b < field.n_bins; ++b) {
        double offset = 0.0;
        double prev = 0.0;
        for (std::size_t f = 0; f < field.n_frames; ++f) {
          std::complex<double> v = transform.at(f, b);
          double raw = std::atan2(v.imag(), v.real());
          if (f > 0) {
            double d = raw - prev;
            while (d > M_PI) {
              offset -= 2.0 * M_PI;
              d -= 2.0 * M_PI;
            }
            while (d < -M_PI) {
              offset += 2.0 * M_PI;
              d += 2.0 * M_PI;
            }
          }
          prev = raw;
          field.values[f * field.n_bins + b] = raw + offset;
        }
      }
      break;
    }
    case ImageKind::SpecPsd: {
      double wsum2 = 0.0;
      for (std::size_t i = 0; i < transform.window_len; ++i) {
        double w = 0.5 * (1.0 - std::cos(2.0 * M_PI * static_cast<double>(i) /
                                         static_cast<double>(transform.window_len - 1)));
        wsum2 += w * w;
      }
      const double denom = transform.fs * wsum2;
      for (std::size_t f = 0; f < field.n_frames; ++f)
        for (std::size_t b = 0; b < field.n_bins; ++b) {
          double p = std::norm(transform.at(f, b)) / denom;
          double db = 10.0 * std::log10(p + 1e-12);
          field.values[f * field.n_bins + b] = std::clamp(db, -120.0, 0.0);
        }
      break;
    }
    case ImageKind::Waveform:
      raise(Errc::InvalidParameter, "waveform has no spectrogram field");
  }
  return field;
}

const std::array<std::array<std::uint8_t, 3>, 256>& colormap256() {
  static const std::array<std::array<std::uint8_t, 3>, 256> lut = {{
    {68, 1, 84}, {68, 2, 86}, {69, 4, 87}, {69, 5, 89}, {70, 7, 90}, {70, 8, 92}, {70, 10, 93}, {70, 11, 94},
    {71, 13, 96}, {71, 14, 97}, {71, 16, 99}, {71, 17, 100}, {71, 19, 101}, {72, 20, 103}, {72, 22, 104}, {72, 23, 105},
    {72, 24, 106}, {72, 26, 108}, {72, 27, 109}, {72, 28, 110}, {72, 29, 111}, {72, 31, 112}, {72, 32, 113}, {72, 33, 115},
    {72, 35, 116}, {72, 36, 117}, {72, 37, 118}, {72, 38, 119}, {72, 40, 120}, {72, 41, 121}, {71, 42, 122}, {71, 44, 122},
    {71, 45, 123}, {71, 46, 124}, {71, 47, 125}, {70, 48, 126}, {70, 50, 126}, {70, 51, 127}, {70, 52, 128}, {69, 53, 129},
    {69, 55, 129}, {69, 56, 130}, {68, 57, 131}, {68, 58, 131}, {68, 59, 132}, {67, 61, 132}, {67, 62, 133}, {66, 63, 133},
    {66, 64, 134}, {66, 65, 134}, {65, 66, 135}, {65, 68, 135}, {64, 69, 136}, {64, 70, 136}, {63, 71, 136}, {63, 72, 137},
    {62, 73, 137}, {62, 74, 137}, {62, 76, 138}, {61, 77, 138}, {61, 78, 138}, {60, 79, 138}, {60, 80, 139}, {59, 81, 139},
    {59, 82, 139}, {58, 83, 139}, {58, 84, 140}, {57, 85, 140}, {57, 86, 140}, {56, 88, 140}, {56, 89, 140}, {55, 90, 140},
    {55, 91, 141}, {54, 92, 141}, {54, 93, 141}, {53, 94, 141}, {53, 95, 141}, {52, 96, 141}, {52, 97, 141}, {51, 98, 141},
    {51, 99, 141}, {50, 100, 142}, {50, 101, 142}, {49, 102, 142}, {49, 103, 142}, {49, 104, 142}, {48, 105, 142}, {48, 106, 142},
    {47, 107, 142}, {47, 108, 142}, {46, 109, 142}, {46, 110, 142}, {46, 111, 142}, {45, 112, 142}, {45, 113, 142}, {44, 113, 142},
    {44, 114, 142}, {44, 115, 142}, {43, 116, 142}, {43, 117, 142}, {42, 118, 142}, {42, 119, 142}, {42, 120, 142}, {41, 121, 142},
    {41, 122, 142}, {41, 123, 142}, {40, 124, 142}, {40, 125, 142}, {39, 126, 142}, {39, 127, 142}, {39, 128, 142}, {38, 129, 142},
    {38, 130, 142}, {38, 130, 142}, {37, 131, 142}, {37, 132, 142}, {37, 133, 142}, {36, 134, 142}, {36, 135, 142}, {35, 136, 142},
    {35, 137, 142}, {35, 138, 141}, {34, 139, 141}, {34, 140, 141}, {34, 141, 141}, {33, 142, 141}, {33, 143, 141}, {33, 144, 141},
    {33, 145, 140}, {32, 146, 140}, {32, 146, 140}, {32, 147, 140}, {31, 148, 140}, {31, 149, 139}, {31, 150, 139}, {31, 151, 139},
    {31, 152, 139}, {31, 153, 138}, {31, 154, 138}, {30, 155, 138}, {30, 156, 137}, {30, 157, 137}, {31, 158, 137}, {31, 159, 136},
    {31, 160, 136}, {31, 161, 136}, {31, 161, 135}, {31, 162, 135}, {32, 163, 134}, {32, 164, 134}, {33, 165, 133}, {33, 166, 133},
    {34, 167, 133}, {34, 168, 132}, {35, 169, 131}, {36, 170, 131}, {37, 171, 130}, {37, 172, 130}, {38, 173, 129}, {39, 173, 129},
    {40, 174, 128}, {41, 175, 127}, {42, 176, 127}, {44, 177, 126}, {45, 178, 125}, {46, 179, 124}, {47, 180, 124}, {49, 181, 123},
    {50, 182, 122}, {52, 182, 121}, {53, 183, 121}, {55, 184, 120}, {56, 185, 119}, {58, 186, 118}, {59, 187, 117}, {61, 188, 116},
    {63, 188, 115}, {64, 189, 114}, {66, 190, 113}, {68, 191, 112}, {70, 192, 111}, {72, 193, 110}, {74, 193, 109}, {76, 194, 108},
    {78, 195, 107}, {80, 196, 106}, {82, 197, 105}, {84, 197, 104}, {86, 198, 103}, {88, 199, 101}, {90, 200, 100}, {92, 200, 99},
    {94, 201, 98}, {96, 202, 96}, {99, 203, 95}, {101, 203, 94}, {103, 204, 92}, {105, 205, 91}, {108, 205, 90}, {110, 206, 88},
    {112, 207, 87}, {115, 208, 86}, {117, 208, 84}, {119, 209, 83}, {122, 209, 81}, {124, 210, 80}, {127, 211, 78}, {129, 211, 77},
    {132, 212, 75}, {134, 213, 73}, {137, 213, 72}, {139, 214, 70}, {142, 214, 69}, {144, 215, 67}, {147, 215, 65}, {149, 216, 64},
    {152, 216, 62}, {155, 217, 60}, {157, 217, 59}, {160, 218, 57}, {162, 218, 55}, {165, 219, 54}, {168, 219, 52}, {170, 220, 50},
    {173, 220, 48}, {176, 221, 47}, {178, 221, 45}, {181, 222, 43}, {184, 222, 41}, {186, 222, 40}, {189, 223, 38}, {192, 223, 37},
    {194, 223, 35}, {197, 224, 33}, {200, 224, 32}, {202, 225, 31}, {205, 225, 29}, {208, 225, 28}, {210, 226, 27}, {213, 226, 26},
    {216, 226, 25}, {218, 227, 25}, {221, 227, 24}, {223, 227, 24}, {226, 228, 24}, {229, 228, 25}, {231, 228, 25}, {234, 229, 26},
    {236, 229, 27}, {239, 229, 28}, {241, 229, 29}, {244, 230, 30}, {246, 230, 32}, {248, 230, 33}, {251, 231, 35}, {253, 231, 37},
  }};
  return lut;
}

namespace {

void set_pixel(SignalImage& img, int x, int y, std::uint8_t r, std::uint8_t g,
               std::uint8_t b) {
  if (x < 0 || y < 0 || x >= img.width || y >= img.height) return;
  std::size_t i = (static_cast<std::size_t>(y) * img.width + x) * 3;
  img.rgb[i] = r;
  img.rgb[i + 1] = g;
  img.rgb[i + 2] = b;
}

// Bresenham segment, 1 px black.
void draw_line(SignalImage& img, int x0, int y0, int x1, int y1) {
  int dx = std::abs(x1 - x0);
  int dy = -std::abs(y1 - y0);
  int sx = x0 < x1 ? 1 : -1;
  int sy = y0 < y1 ? 1 : -1;
  int err = dx + dy;
  for (;;) {
    set_pixel(img, x0, y0, 0, 0, 0);
    if (x0 == x1 && y0 == y1) break;
    int e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      x0 += sx;
    }
    if (e2 <= dx) {
      err += dx;
      y0 += sy;
    }
  }
}

SignalImage render_waveform(std::span<const double> x) {
  SignalImage img;
  img.kind = ImageKind::Waveform;
  img.rgb.assign(static_cast<std::size_t>(img.width) * img.height * 3, 255);

  double lo = x[0], hi = x[0];
  for (double v : x) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  const double range = hi - lo;

  // Linear resample to one value per column, then map the amplitude into the
  // vertical [5%, 95%] band (max at the top); flat signals sit on the midline.
  std::vector<int> ys(img.width);
  for (int c = 0; c < img.width; ++c) {
    double pos = (static_cast<double>(c) + 0.5) * static_cast<double>(x.size()) /
                     static_cast<double>(img.width) -
                 0.5;
    pos = std::clamp(pos, 0.0, static_cast<double>(x.size() - 1));
    std::size_t i0 = static_cast<std::size_t>(pos);
    std::size_t i1 = std::min(i0 + 1, x.size() - 1);
    double frac = pos - static_cast<double>(i0);
    double v = x[i0] * (1.0 - frac) + x[i1] * frac;
    double t = range > 0.0 ? (v - lo) / range : 0.5;
    double y = (0.05 + 0.9 * (1.0 - t)) * static_cast<double>(img.height - 1);
    ys[c] = static_cast<int>(std::lround(y));
  }
  for (int c = 0; c + 1 < img.width; ++c)
    draw_line(img, c, ys[c], c + 1, ys[c + 1]);
  return img;
}

SignalImage render_spectro(const SpectroField& field, ImageKind kind) {
  SignalImage img;
  img.kind = kind;
  img.rgb.assign(static_cast<std::size_t>(img.width) * img.height * 3, 0);

  double vmin, vmax;
  if (kind == ImageKind::SpecAngle) {
    vmin = -M_PI;
    vmax = M_PI;
  } else if (kind == ImageKind::SpecPsd) {
    vmin = -120.0;
    vmax = 0.0;
  } else {
    vmin = field.values[0];
    vmax = field.values[0];
    for (double v : field.values) {
      vmin = std::min(vmin, v);
      vmax = std::max(vmax, v);
    }
  }
  const double range = vmax - vmin;
  const auto& lut = colormap256();

  for (int py = 0; py < img.height; ++py) {
    // Low frequency at the bottom row.
    std::size_t bin = static_cast<std::size_t>(
        (static_cast<double>(img.height - 1 - py) + 0.5) *
        static_cast<double>(field.n_bins) / static_cast<double>(img.height));
    if (bin >= field.n_bins) bin = field.n_bins - 1;
    for (int px = 0; px < img.width; ++px) {
      std::size_t frame = static_cast<std::size_t>(
          (static_cast<double>(px) + 0.5) * static_cast<double>(field.n_frames) /
          static_cast<double>(img.width));
      if (frame >= field.n_frames) frame = field.n_frames - 1;
      double v = field.at(frame, bin);
      int idx = 127;
      if (range > 0.0) {
        idx = static_cast<int>((v - vmin) / range * 256.0);
        idx = std::clamp(idx, 0, 255);
      }
      set_pixel(img, px, py, lut[idx][0], lut[idx][1], lut[idx][2]);
    }
  }
  return img;
}

}  // namespace

SignalImage render(std::span<const double> x, double fs, ImageKind kind,
                   std::size_t window_len, std::size_t hop) {
  if (kind == ImageKind::Waveform) {
    if (x.size() < 2)
      raise(Errc::SignalTooShort, "waveform needs at least 2 samples");
    return render_waveform(x);
  }
  Stft transform = stft(x, fs, window_len, hop);
  return render_spectro(spectro_field(transform, kind), kind);
}

// --- PNG / PPM encoding -----------------------------------------------------

namespace {

std::uint32_t crc32_of(std::span<const std::uint8_t> data, std::uint32_t seed) {
  static const auto table = [] {
    std::array<std::uint32_t, 256> t{};
    for (std::uint32_t n = 0; n < 256; ++n) {
      std::uint32_t c = n;
      for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xedb88320u ^ (c >> 1) : c >> 1;
      t[n] = c;
    }
    return t;
  }();
  std::uint32_t c = seed;
  for (std::uint8_t b : data) c = table[(c ^ b) & 0xffu] ^ (c >> 8);
  return c;
}

std::uint32_t adler32_of(std::span<const std::uint8_t> data) {
  std::uint32_t a = 1, b = 0;
  for (std::uint8_t byte : data) {
    a = (a + byte) % 65521u;
    b = (b + a) % 65521u;
  }
  return (b << 16) | a;
}

void push_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

void push_chunk(std::vector<std::uint8_t>& out, const char type[4],
                std::span<const std::uint8_t> data) {
  push_be32(out, static_cast<std::uint32_t>(data.size()));
  std::vector<std::uint8_t> body(type, type + 4);
  body.insert(body.end(), data.begin(), data.end());
  out.insert(out.end(), body.begin(), body.end());
  push_be32(out, crc32_of(body, 0xffffffffu) ^ 0xffffffffu);
}

}  // namespace

std::vector<std::uint8_t> encode_png(const SignalImage& image) {
  // Raw scanlines: filter byte 0 + RGB per row.
  std::vector<std::uint8_t> raw;
  raw.reserve(static_cast<std::size_t>(image.height) * (image.width * 3 + 1));
  for (int y = 0; y < image.height; ++y) {
    raw.push_back(0);
    const std::uint8_t* row = image.rgb.data() +
                              static_cast<std::size_t>(y) * image.width * 3;
    raw.insert(raw.end(), row, row + image.width * 3);
  }

  // zlib stream with stored (uncompressed) deflate blocks: identical pixels
  // give identical bytes with no codec in the loop.
  std::vector<std::uint8_t> z;
  z.push_back(0x78);
  z.push_back(0x01);
  std::size_t off = 0;
  while (off < raw.size()) {
    std::size_t len = std::min<std::size_t>(65535, raw.size() - off);
    bool final = off + len == raw.size();
    z.push_back(final ? 1 : 0);
    z.push_back(static_cast<std::uint8_t>(len & 0xff));
    z.push_back(static_cast<std::uint8_t>(len >> 8));
    z.push_back(static_cast<std::uint8_t>(~len & 0xff));
    z.push_back(static_cast<std::uint8_t>((~len >> 8) & 0xff));
    z.insert(z.end(), raw.begin() + off, raw.begin() + off + len);
    off += len;
  }
  push_be32(z, adler32_of(raw));

  std::vector<std::uint8_t> png{0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  std::vector<std::uint8_t> ihdr;
  push_be32(ihdr, static_cast<std::uint32_t>(image.width));
  push_be32(ihdr, static_cast<std::uint32_t>(image.height));
  ihdr.push_back(8);  // bit depth
  ihdr.push_back(2);  // color type: truecolor
  ihdr.push_back(0);  // compression
  ihdr.push_back(0);  // filter method
  ihdr.push_back(0);  // no interlace
  push_chunk(png, "IHDR", ihdr);
  push_chunk(png, "IDAT", z);
  push_chunk(png, "IEND", {});
  return png;
}

void write_png(const std::filesystem::path& path, const SignalImage& image) {
  std::vector<std::uint8_t> bytes = encode_png(image);
  std::ofstream out(path, std::ios::binary);
  if (!out) raise(Errc::IoFailure, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) raise(Errc::IoFailure, "write failed for " + path.string());
}

void write_ppm(const std::filesystem::path& path, const SignalImage& image) {
  std::ofstream out(path, std::ios::binary);
  if (!out) raise(Errc::IoFailure, "cannot write " + path.string());
  out << "P6\n" << image.width << ' ' << image.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.rgb.data()),
            static_cast<std::streamsize>(image.rgb.size()));
  if (!out) raise(Errc::IoFailure, "write failed for " + path.string());
}

}  // namespace painsig
