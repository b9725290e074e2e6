#include "painsig/dataio.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include "painsig/detail/rng.hpp"
#include "painsig/errors.hpp"

namespace painsig {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(trim(field));
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

[[noreturn]] void bad_row(std::size_t line_no, const std::string& why) {
  raise(Errc::MalformedRow, "manifest line " + std::to_string(line_no) + ": " + why);
}

double parse_double(const std::string& text, std::size_t line_no, const char* what) {
  try {
    std::size_t used = 0;
    double v = std::stod(text, &used);
    if (used != text.size()) bad_row(line_no, std::string("trailing characters in ") + what);
    return v;
  } catch (const Error&) {
    throw;
  } catch (const std::exception&) {
    bad_row(line_no, std::string("cannot parse ") + what + " '" + text + "'");
  }
}

int parse_int(const std::string& text, std::size_t line_no, const char* what) {
  try {
    std::size_t used = 0;
    int v = std::stoi(text, &used);
    if (used != text.size()) bad_row(line_no, std::string("trailing characters in ") + what);
    return v;
  } catch (const Error&) {
    throw;
  } catch (const std::exception&) {
    bad_row(line_no, std::string("cannot parse ") + what + " '" + text + "'");
  }
}

std::vector<double> read_text_signal(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) raise(Errc::MissingFile, "signal file " + path.string());
  std::vector<double> samples;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string t = trim(line);
    if (t.empty()) continue;
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(t, &used);
    } catch (const std::exception&) {
      raise(Errc::MalformedRow,
            "signal " + path.string() + " line " + std::to_string(line_no) +
                ": cannot parse sample '" + t + "'");
    }
    if (used != t.size())
      raise(Errc::MalformedRow, "signal " + path.string() + " line " +
                                    std::to_string(line_no) + ": trailing characters");
    samples.push_back(v);
  }
  return samples;
}

std::vector<double> read_f32le_signal(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(Errc::MissingFile, "signal file " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (bytes.size() % 4 != 0)
    raise(Errc::MalformedRow,
          "signal " + path.string() + ": byte count not a multiple of 4");
  std::vector<double> samples(bytes.size() / 4);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    std::uint32_t u = static_cast<std::uint32_t>(bytes[4 * i]) |
                      (static_cast<std::uint32_t>(bytes[4 * i + 1]) << 8) |
                      (static_cast<std::uint32_t>(bytes[4 * i + 2]) << 16) |
                      (static_cast<std::uint32_t>(bytes[4 * i + 3]) << 24);
    float f = 0.0f;
    std::memcpy(&f, &u, sizeof f);
    samples[i] = static_cast<double>(f);
  }
  return samples;
}

void write_text_signal(const std::filesystem::path& path,
                       const std::vector<double>& samples) {
  std::ofstream out(path);
  if (!out) raise(Errc::IoFailure, "cannot write " + path.string());
  out.precision(17);
  for (double v : samples) out << v << '\n';
  if (!out) raise(Errc::IoFailure, "write failed for " + path.string());
}

void write_f32le_signal(const std::filesystem::path& path,
                        const std::vector<double>& samples) {
  std::ofstream out(path, std::ios::binary);
  if (!out) raise(Errc::IoFailure, "cannot write " + path.string());
  for (double v : samples) {
    float f = static_cast<float>(v);
    std::uint32_t u = 0;
    std::memcpy(&u, &f, sizeof f);
    char bytes[4] = {static_cast<char>(u & 0xff), static_cast<char>((u >> 8) & 0xff),
                     static_cast<char>((u >> 16) & 0xff),
                     static_cast<char>((u >> 24) & 0xff)};
    out.write(bytes, 4);
  }
  if (!out) raise(Errc::IoFailure, "write failed for " + path.string());
}

}  // namespace

const char* to_string(Gender g) noexcept {
  return g == Gender::Male ? "M" : "F";
}

const char* to_string(PainLabel label) noexcept {
  switch (label) {
    case PainLabel::NP: return "NP";
    case PainLabel::P1: return "P1";
    case PainLabel::P2: return "P2";
    case PainLabel::P3: return "P3";
    case PainLabel::P4: return "P4";
  }
  return "NP";
}

Gender gender_from_string(const std::string& text) {
  if (text == "M") return Gender::Male;
  if (text == "F") return Gender::Female;
  raise(Errc::MalformedRow, "gender must be M or F, got '" + text + "'");
}

PainLabel pain_label_from_string(const std::string& text) {
  for (int i = 0; i < kPainClassCount; ++i) {
    PainLabel label = static_cast<PainLabel>(i);
    if (text == to_string(label)) return label;
  }
  raise(Errc::MalformedRow, "label must be one of NP,P1..P4, got '" + text + "'");
}

Dataset load_dataset(const std::filesystem::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) raise(Errc::MissingFile, "manifest " + manifest_path.string());
  const std::filesystem::path base = manifest_path.parent_path();

  std::string line;
  if (!std::getline(in, line)) raise(Errc::MalformedRow, "manifest line 1: empty file");
  static const char* kHeader = "segment_id,subject_id,gender,age,label,fs,format,path";
  if (trim(line) != kHeader)
    bad_row(1, std::string("header must be exactly '") + kHeader + "'");

  Dataset data;
  std::set<std::string> seen_segments;
  std::map<std::string, SubjectMeta> subjects;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    std::vector<std::string> f = split_csv(line);
    if (f.size() != 8)
      bad_row(line_no, "expected 8 fields, got " + std::to_string(f.size()));

    EcgSegment seg;
    seg.segment_id = f[0];
    if (seg.segment_id.empty()) bad_row(line_no, "empty segment_id");
    if (!seen_segments.insert(seg.segment_id).second)
      raise(Errc::DuplicateSegmentId,
            "manifest line " + std::to_string(line_no) + ": '" + seg.segment_id + "'");

    seg.subject.subject_id = f[1];
    if (seg.subject.subject_id.empty()) bad_row(line_no, "empty subject_id");
    try {
      seg.subject.gender = gender_from_string(f[2]);
    } catch (const Error& e) {
      bad_row(line_no, e.what());
    }
    seg.subject.age = parse_int(f[3], line_no, "age");
    if (seg.subject.age < 0) bad_row(line_no, "age must be >= 0");
    try {
      seg.label = pain_label_from_string(f[4]);
    } catch (const Error& e) {
      bad_row(line_no, e.what());
    }
    seg.fs = parse_double(f[5], line_no, "fs");
    if (!(seg.fs > 0.0))
      raise(Errc::NonPositiveFs, "manifest line " + std::to_string(line_no) +
                                     ": fs = " + f[5]);

    auto [it, inserted] = subjects.try_emplace(seg.subject.subject_id, seg.subject);
    if (!inserted && (it->second.gender != seg.subject.gender ||
                      it->second.age != seg.subject.age))
      raise(Errc::InconsistentSubject,
            "manifest line " + std::to_string(line_no) + ": subject '" +
                seg.subject.subject_id + "' has conflicting gender/age");

    const std::string& format = f[6];
    std::filesystem::path signal_path = base / f[7];
    if (format == "text") {
      seg.samples = read_text_signal(signal_path);
    } else if (format == "f32le") {
      seg.samples = read_f32le_signal(signal_path);
    } else {
      bad_row(line_no, "format must be text or f32le, got '" + format + "'");
    }
    if (seg.samples.empty())
      bad_row(line_no, "signal file " + signal_path.string() + " holds no samples");
    data.push_back(std::move(seg));
  }
  return data;
}

void save_dataset(const Dataset& data, const std::filesystem::path& manifest_path,
                  SignalFormat format) {
  const std::filesystem::path base = manifest_path.parent_path();
  if (!base.empty()) std::filesystem::create_directories(base);

  std::ofstream out(manifest_path);
  if (!out) raise(Errc::IoFailure, "cannot write " + manifest_path.string());
  out << "segment_id,subject_id,gender,age,label,fs,format,path\n";
  out.precision(17);
  for (const EcgSegment& seg : data) {
    std::string ext = format == SignalFormat::Text ? ".txt" : ".f32";
    std::string name = seg.segment_id + ext;
    out << seg.segment_id << ',' << seg.subject.subject_id << ','
        << to_string(seg.subject.gender) << ',' << seg.subject.age << ','
        << to_string(seg.label) << ',' << seg.fs << ','
        << (format == SignalFormat::Text ? "text" : "f32le") << ',' << name << '\n';
    if (format == SignalFormat::Text) {
      write_text_signal(base / name, seg.samples);
    } else {
      write_f32le_signal(base / name, seg.samples);
    }
  }
  if (!out) raise(Errc::IoFailure, "write failed for " + manifest_path.string());
}

namespace {

// Stereotyped PQRST beat: fixed Gaussians, amplitudes in millivolt, offsets
// and widths in seconds relative to the R apex.
struct Wave {
  double amp;
  double center;
  double sigma;
};
constexpr Wave kTemplate[] = {
    {0.10, -0.170, 0.022},  // P
    {-0.15, -0.025, 0.010},  // Q
    {1.00, 0.000, 0.012},    // R
    {-0.25, 0.025, 0.010},   // S
    {0.30, 0.200, 0.045},    // T
};

}  // namespace

SynthEcg synth_ecg(double bpm, double duration_s, double fs, double noise_std,
                   std::uint32_t seed) {
  if (!(bpm >= 30.0 && bpm <= 220.0))
    raise(Errc::InvalidBpm, "bpm must be in [30, 220], got " + std::to_string(bpm));
  if (!(fs >= 128.0))
    raise(Errc::InvalidFs, "fs must be >= 128 Hz, got " + std::to_string(fs));
  if (!(duration_s > 0.0))
    raise(Errc::InvalidDuration, "duration must be > 0 s");
  if (!(noise_std >= 0.0))
    raise(Errc::InvalidNoise, "noise_std must be >= 0");

  const std::size_t n = static_cast<std::size_t>(std::llround(duration_s * fs));
  if (n == 0) raise(Errc::InvalidDuration, "duration rounds to zero samples");

  const double spacing = 60.0 * fs / bpm;  // samples per beat
  SynthEcg out;
  out.segment.segment_id = "synth";
  out.segment.subject.subject_id = "synth";
  out.segment.fs = fs;
  out.segment.samples.assign(n, 0.0);

  for (std::size_t k = 0;; ++k) {
    long long apex = std::llround(spacing * (static_cast<double>(k) + 0.5));
    if (apex >= static_cast<long long>(n)) break;
    out.true_peaks.push_back(static_cast<std::size_t>(apex));
    for (const Wave& w : kTemplate) {
      // Material support of the Gaussian: +/- 5 sigma around its center.
      double c = static_cast<double>(apex) + w.center * fs;
      double s = w.sigma * fs;
      long long lo = std::llround(c - 5.0 * s);
      long long hi = std::llround(c + 5.0 * s);
      if (lo < 0) lo = 0;
      if (hi >= static_cast<long long>(n)) hi = static_cast<long long>(n) - 1;
      for (long long i = lo; i <= hi; ++i) {
        double d = (static_cast<double>(i) - c) / s;
        out.segment.samples[static_cast<std::size_t>(i)] += w.amp * std::exp(-0.5 * d * d);
      }
    }
  }

  if (noise_std > 0.0) {
    detail::Rng rng(seed);
    for (double& v : out.segment.samples) v += noise_std * rng.gaussian();
  }
  return out;
}

const char* to_string(Scheme scheme) noexcept {
  switch (scheme) {
    case Scheme::Basic: return "basic";
    case Scheme::Gender: return "gender";
    case Scheme::Age: return "age";
    case Scheme::GenderAge: return "gender_age";
  }
  return "basic";
}

Scheme scheme_from_string(const std::string& text) {
  if (text == "basic") return Scheme::Basic;
  if (text == "gender") return Scheme::Gender;
  if (text == "age") return Scheme::Age;
  if (text == "gender_age") return Scheme::GenderAge;
  raise(Errc::InvalidConfig, "unknown scheme '" + text + "'");
}

int age_band(int age) {
  if (age >= 20 && age <= 35) return 0;
  if (age >= 36 && age <= 50) return 1;
  if (age >= 51 && age <= 65) return 2;
  raise(Errc::AgeOutOfSchemeRange, "age " + std::to_string(age) +
                                       " outside [20, 65]");
}

const char* age_band_name(int band) noexcept {
  switch (band) {
    case 0: return "20-35";
    case 1: return "36-50";
    case 2: return "51-65";
  }
  return "?";
}

std::map<std::string, SubjectMeta> collect_subjects(const Dataset& data) {
  std::map<std::string, SubjectMeta> subjects;
  for (const EcgSegment& seg : data) {
    auto [it, inserted] = subjects.try_emplace(seg.subject.subject_id, seg.subject);
    if (!inserted && (it->second.gender != seg.subject.gender ||
                      it->second.age != seg.subject.age))
      raise(Errc::InconsistentSubject,
            "subject '" + seg.subject.subject_id + "' has conflicting gender/age");
  }
  return subjects;
}

std::vector<SchemeGroup> build_scheme_partitions(const Dataset& data, Scheme scheme) {
  std::map<std::string, SubjectMeta> subjects = collect_subjects(data);

  std::vector<SchemeGroup> groups;
  auto add_group = [&](const std::string& key) {
    groups.push_back({scheme, key, {}});
  };
  switch (scheme) {
    case Scheme::Basic:
      add_group("All");
      break;
    case Scheme::Gender:
      add_group("Males");
      add_group("Females");
      break;
    case Scheme::Age:
      for (int b = 0; b < 3; ++b) add_group(age_band_name(b));
      break;
    case Scheme::GenderAge:
      for (int b = 0; b < 3; ++b) {
        add_group(std::string("Males ") + age_band_name(b));
        add_group(std::string("Females ") + age_band_name(b));
      }
      break;
  }

  for (const auto& [id, meta] : subjects) {
    std::size_t gi = 0;
    switch (scheme) {
      case Scheme::Basic:
        gi = 0;
        break;
      case Scheme::Gender:
        gi = meta.gender == Gender::Male ? 0 : 1;
        break;
      case Scheme::Age: {
        int band;
        try {
          band = age_band(meta.age);
        } catch (const Error&) {
          raise(Errc::AgeOutOfSchemeRange,
                "subject '" + id + "': age " + std::to_string(meta.age) +
                    " outside [20, 65]");
        }
        gi = static_cast<std::size_t>(band);
        break;
      }
      case Scheme::GenderAge: {
        int band;
        try {
          band = age_band(meta.age);
        } catch (const Error&) {
          raise(Errc::AgeOutOfSchemeRange,
                "subject '" + id + "': age " + std::to_string(meta.age) +
                    " outside [20, 65]");
        }
        gi = static_cast<std::size_t>(2 * band) +
             (meta.gender == Gender::Male ? 0 : 1);
        break;
      }
    }
    groups[gi].subjects.push_back(id);
  }
  // std::map iteration already yields sorted ids; keep the guarantee explicit.
  for (SchemeGroup& g : groups) std::sort(g.subjects.begin(), g.subjects.end());
  return groups;
}

}  // namespace painsig
