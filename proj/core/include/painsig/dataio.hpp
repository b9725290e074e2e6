#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace painsig {

enum class Gender { Male, Female };

// Pain stimulus classes, ordered by intensity: no pain, then four increasing
// calibrated levels. The numeric values define the class ids used everywhere.
enum class PainLabel : int { NP = 0, P1 = 1, P2 = 2, P3 = 3, P4 = 4 };

inline constexpr int kPainClassCount = 5;

const char* to_string(Gender g) noexcept;
const char* to_string(PainLabel label) noexcept;
Gender gender_from_string(const std::string& text);
PainLabel pain_label_from_string(const std::string& text);

struct SubjectMeta {
  std::string subject_id;
  Gender gender = Gender::Male;
  int age = 0;
};

// One ECG recording: amplitude in millivolt at a fixed sampling rate.
struct EcgSegment {
  std::string segment_id;
  SubjectMeta subject;
  PainLabel label = PainLabel::NP;
  double fs = 0.0;
  std::vector<double> samples;

  double duration_s() const {
    return fs > 0.0 ? static_cast<double>(samples.size()) / fs : 0.0;
  }
};

using Dataset = std::vector<EcgSegment>;

enum class SignalFormat { Text, F32le };

// Loads a dataset from a manifest CSV with header
//   segment_id,subject_id,gender,age,label,fs,format,path
// Signal paths are resolved relative to the manifest's directory. Raises
// MissingFile, MalformedRow (with the 1-based line number in the message),
// DuplicateSegmentId, or InconsistentSubject.
Dataset load_dataset(const std::filesystem::path& manifest_path);

// Writes manifest + one signal file per segment under the manifest's
// directory. A load of the written manifest reproduces the dataset exactly
// for F32le signals that originated from F32le sources.
void save_dataset(const Dataset& data, const std::filesystem::path& manifest_path,
                  SignalFormat format);

// A synthetic ECG along with the ground-truth R apex positions.
struct SynthEcg {
  EcgSegment segment;
  std::vector<std::size_t> true_peaks;  // sample indices of template apexes
};

// Renders a periodic PQRST template at the requested rate and adds white
// Gaussian noise. Beat k's apex lands at round((k + 0.5) * fs * 60 / bpm).
// The same arguments and seed always produce bit-identical samples.
// Raises InvalidBpm, InvalidFs, InvalidDuration, or InvalidNoise.
SynthEcg synth_ecg(double bpm, double duration_s, double fs, double noise_std,
                   std::uint32_t seed);

enum class Scheme { Basic, Gender, Age, GenderAge };

const char* to_string(Scheme scheme) noexcept;
Scheme scheme_from_string(const std::string& text);

// One demographic group: the subject ids that fall into it. Groups are kept
// even when empty so the group list depends only on the scheme.
struct SchemeGroup {
  Scheme scheme = Scheme::Basic;
  std::string group_key;
  std::vector<std::string> subjects;  // sorted, unique
};

// Age bands used by the Age and GenderAge schemes.
// Returns 0 for 20-35, 1 for 36-50, 2 for 51-65; raises AgeOutOfSchemeRange.
int age_band(int age);
const char* age_band_name(int band) noexcept;

// Splits the dataset's subjects into the scheme's groups:
//   Basic     -> 1 group  ("All")
//   Gender    -> 2 groups ("Males", "Females")
//   Age       -> 3 groups (age bands)
//   GenderAge -> 6 groups (Males 20-35, Females 20-35, ..., Females 51-65)
std::vector<SchemeGroup> build_scheme_partitions(const Dataset& data, Scheme scheme);

// Subject metadata keyed by subject id; raises InconsistentSubject if the
// same id appears with differing gender or age.
std::map<std::string, SubjectMeta> collect_subjects(const Dataset& data);

}  // namespace painsig
