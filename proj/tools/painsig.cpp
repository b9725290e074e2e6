// painsig: batch front end for the ECG pain-assessment pipeline.
//
// Exit codes: 0 success, 1 usage/config/IO error, 2 per-segment analysis
// failures (partial output written), 3 evaluation finished but skipped groups.

#include <algorithm>
#include <cctype>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "painsig/dataio.hpp"
#include "painsig/detail/parallel.hpp"
#include "painsig/errors.hpp"
#include "painsig/eval.hpp"
#include "painsig/features.hpp"
#include "painsig/qrs.hpp"
#include "painsig/render.hpp"
#include "painsig/run_config.hpp"

namespace fs = std::filesystem;
using namespace painsig;

namespace {

// All output files are written to a temp file in the destination directory
// and renamed into place, so a failing run never leaves truncated outputs.
template <typename WriteFn>
void atomic_write(const fs::path& path, WriteFn&& write_fn, bool binary = false) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, binary ? std::ios::binary : std::ios::out);
    if (!out) raise(Errc::IoFailure, "cannot open " + tmp.string() + " for writing");
    write_fn(out);
    out.flush();
    if (!out) {
      out.close();
      fs::remove(tmp);
      raise(Errc::IoFailure, "write failed for " + tmp.string());
    }
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp);
    raise(Errc::IoFailure, "cannot rename " + tmp.string() + " to " + path.string());
  }
}

std::vector<std::size_t> order_by_segment_id(const Dataset& data) {
  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return data[a].segment_id < data[b].segment_id;
  });
  return order;
}

struct SegmentFailure {
  std::string segment_id;
  std::string message;
};

int report_failures(const char* verb, const std::vector<SegmentFailure>& failures) {
  if (failures.empty()) return 0;
  for (const SegmentFailure& f : failures)
    std::cerr << verb << " failed for " << f.segment_id << ": " << f.message << "\n";
  return 2;
}

int cmd_detect(const std::string& input, const std::string& out) {
  Dataset data = load_dataset(input);
  std::vector<std::size_t> order = order_by_segment_id(data);

  std::vector<std::vector<std::size_t>> peaks(data.size());
  std::vector<std::string> errors(data.size());
  detail::parallel_for(data.size(), [&](std::size_t slot) {
    const EcgSegment& segment = data[order[slot]];
    try {
      peaks[slot] = detect_r_peaks(segment).indices;
    } catch (const Error& e) {
      errors[slot] = e.what();
    }
  });

  std::vector<SegmentFailure> failures;
  atomic_write(out, [&](std::ostream& os) {
    os << "segment_id,peak_index\n";
    for (std::size_t slot = 0; slot < data.size(); ++slot) {
      const std::string& id = data[order[slot]].segment_id;
      if (!errors[slot].empty()) {
        failures.push_back({id, errors[slot]});
        continue;
      }
      for (std::size_t p : peaks[slot]) os << id << ',' << p << '\n';
    }
  });
  return report_failures("detect", failures);
}

int cmd_features(const std::string& input, AugmentMode mode, const std::string& out) {
  Dataset data = load_dataset(input);
  std::vector<std::size_t> order = order_by_segment_id(data);

  std::vector<FeatureRow> rows(data.size());
  std::vector<char> ok(data.size(), 0);
  std::vector<std::string> errors(data.size());
  detail::parallel_for(data.size(), [&](std::size_t slot) {
    const EcgSegment& segment = data[order[slot]];
    try {
      IbiSeries ibis = peaks_to_ibis(detect_r_peaks(segment));
      IbiFeatures base = compute_ibi_features(ibis, segment.fs);
      rows[slot] = {segment.segment_id,
                    augment_features(base, segment.subject, mode), segment.label};
      ok[slot] = 1;
    } catch (const Error& e) {
      errors[slot] = e.what();
    }
  });

  std::vector<SegmentFailure> failures;
  std::vector<FeatureRow> written;
  written.reserve(data.size());
  for (std::size_t slot = 0; slot < data.size(); ++slot) {
    if (ok[slot]) {
      written.push_back(std::move(rows[slot]));
    } else {
      failures.push_back({data[order[slot]].segment_id, errors[slot]});
    }
  }
  atomic_write(out, [&](std::ostream& os) { write_features_csv(os, written, mode); });
  return report_failures("features", failures);
}

int cmd_eval(const std::string& config_path, const std::string& dataset_tag) {
  RunConfig config = load_run_config(config_path);
  fs::path manifest(config.manifest);
  if (manifest.is_relative())
    manifest = fs::path(config_path).parent_path() / manifest;

  Dataset data = load_dataset(manifest);
  RunResult result = run_experiment(data, config.scheme, config.task,
                                    config.model, config.eval);
  std::vector<RunResult> runs{result};

  fs::path out_dir(config.out_dir);
  atomic_write(out_dir / "results.csv",
               [&](std::ostream& os) { write_results_csv(os, runs); });
  std::string table = "dataset: " + dataset_tag + "\n" + format_results_table(runs);
  atomic_write(out_dir / "table.txt", [&](std::ostream& os) { os << table; });
  std::cout << table;

  for (const GroupResult& group : result.groups) {
    if (!group.evaluated) {
      std::cerr << "group " << group.group_key << " skipped: " << group.annotation
                << "\n";
    }
  }
  bool any_skipped = std::any_of(result.groups.begin(), result.groups.end(),
                                 [](const GroupResult& g) { return !g.evaluated; });
  return any_skipped ? 3 : 0;
}

std::vector<double> read_signal_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) raise(Errc::MissingFile, "cannot open " + path);
  std::vector<double> x;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    try {
      std::size_t used = 0;
      double v = std::stod(line, &used);
      while (used < line.size() && std::isspace(static_cast<unsigned char>(line[used])))
        ++used;
      if (used != line.size()) throw std::invalid_argument(line);
      x.push_back(v);
    } catch (const std::exception&) {
      raise(Errc::MalformedRow,
            path + " line " + std::to_string(line_no) + ": not a number: " + line);
    }
  }
  return x;
}

int cmd_render(const std::string& input, double sample_rate, const std::string& kind,
               const std::string& out, std::size_t window_len, std::size_t hop) {
  ImageKind image_kind = image_kind_from_string(kind);
  std::vector<double> x = read_signal_file(input);
  SignalImage image = render(x, sample_rate, image_kind, window_len, hop);

  fs::path out_path(out);
  if (out_path.extension() == ".ppm") {
    atomic_write(out_path, [&](std::ostream& os) {
      os << "P6\n" << image.width << ' ' << image.height << "\n255\n";
      os.write(reinterpret_cast<const char*>(image.rgb.data()),
               static_cast<std::streamsize>(image.rgb.size()));
    }, /*binary=*/true);
  } else if (out_path.extension() == ".png") {
    std::vector<std::uint8_t> bytes = encode_png(image);
    atomic_write(out_path, [&](std::ostream& os) {
      os.write(reinterpret_cast<const char*>(bytes.data()),
               static_cast<std::streamsize>(bytes.size()));
    }, /*binary=*/true);
  } else {
    raise(Errc::InvalidConfig, "output must end in .png or .ppm: " + out);
  }
  return 0;
}

int cmd_synth(double bpm, double duration_s, double sample_rate, double noise_std,
              std::uint32_t seed, const std::string& prefix,
              const std::string& subject, const std::string& gender_text, int age,
              const std::string& label_text) {
  Gender gender = gender_from_string(gender_text);
  PainLabel label = pain_label_from_string(label_text);
  SynthEcg synth = synth_ecg(bpm, duration_s, sample_rate, noise_std, seed);

  fs::path base(prefix);
  std::string segment_id = base.filename().string();
  if (segment_id.empty())
    raise(Errc::InvalidConfig, "--out prefix must name a file, got " + prefix);

  fs::path signal_path = base;
  signal_path += ".f32";
  atomic_write(signal_path, [&](std::ostream& os) {
    for (double v : synth.segment.samples) {
      float f = static_cast<float>(v);
      std::uint32_t bits;
      std::memcpy(&bits, &f, sizeof bits);
      char le[4] = {static_cast<char>(bits & 0xff),
                    static_cast<char>((bits >> 8) & 0xff),
                    static_cast<char>((bits >> 16) & 0xff),
                    static_cast<char>((bits >> 24) & 0xff)};
      os.write(le, 4);
    }
  }, /*binary=*/true);

  fs::path peaks_path = base;
  peaks_path += ".peaks.csv";
  atomic_write(peaks_path, [&](std::ostream& os) {
    os << "segment_id,peak_index\n";
    for (std::size_t p : synth.true_peaks) os << segment_id << ',' << p << '\n';
  });

  fs::path manifest_path = base;
  manifest_path += ".manifest.csv";
  atomic_write(manifest_path, [&](std::ostream& os) {
    std::ostringstream fs_text;
    fs_text.precision(17);
    fs_text << sample_rate;
    os << "segment_id,subject_id,gender,age,label,fs,format,path\n";
    os << segment_id << ',' << subject << ',' << to_string(gender) << ',' << age
       << ',' << to_string(label) << ',' << fs_text.str() << ",f32le,"
       << segment_id << ".f32\n";
  });
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ECG pain-assessment toolkit: QRS detection, IBI features, "
               "LOSO evaluation, and signal imaging"};
  app.require_subcommand(1);

  // detect
  std::string detect_input, detect_out;
  CLI::App* detect = app.add_subcommand("detect", "Detect R peaks for every manifest segment");
  detect->add_option("--input", detect_input, "Dataset manifest CSV")->required();
  detect->add_option("--out", detect_out, "Output CSV (segment_id,peak_index)")->required();

  // features
  std::string features_input, features_out, features_augment = "none";
  CLI::App* features = app.add_subcommand("features", "Compute IBI features for every manifest segment");
  features->add_option("--input", features_input, "Dataset manifest CSV")->required();
  features->add_option("--augment", features_augment, "Demographic augmentation: none|g|a|ga")
      ->check(CLI::IsMember({"none", "g", "a", "ga"}));
  features->add_option("--out", features_out, "Output feature CSV")->required();

  // eval
  std::string eval_config, eval_dataset = "synthetic";
  CLI::App* eval = app.add_subcommand("eval", "Run a LOSO evaluation from a JSON config");
  eval->add_option("--config", eval_config, "Run configuration JSON")->required();
  eval->add_option("--dataset", eval_dataset,
                   "Provenance tag recorded in the table header (e.g. biovid)");

  // render
  std::string render_input, render_kind, render_out;
  double render_fs = 0.0;
  std::size_t render_window = 64, render_hop = 16;
  CLI::App* render_cmd = app.add_subcommand("render", "Render a signal to a 224x224 image");
  render_cmd->add_option("--input", render_input, "Signal file, one sample per line")->required();
  render_cmd->add_option("--fs", render_fs, "Sampling rate in Hz")->required();
  render_cmd->add_option("--kind", render_kind, "waveform|spec-angle|spec-phase|spec-psd")
      ->required()
      ->check(CLI::IsMember({"waveform", "spec-angle", "spec-phase", "spec-psd"}));
  render_cmd->add_option("--out", render_out, "Output image (.png or .ppm)")->required();
  render_cmd->add_option("--window", render_window, "STFT window length in samples");
  render_cmd->add_option("--hop", render_hop, "STFT hop in samples");

  // synth
  double synth_bpm = 0.0, synth_duration = 0.0, synth_fs = 512.0, synth_noise = 0.0;
  std::uint32_t synth_seed = 0;
  std::string synth_out, synth_subject = "synth", synth_gender = "M", synth_label = "NP";
  int synth_age = 30;
  CLI::App* synth = app.add_subcommand("synth", "Generate a synthetic ECG with ground-truth peaks");
  synth->add_option("--bpm", synth_bpm, "Heart rate, beats per minute")->required();
  synth->add_option("--duration", synth_duration, "Duration in seconds")->required();
  synth->add_option("--fs", synth_fs, "Sampling rate in Hz");
  synth->add_option("--noise", synth_noise, "White-noise standard deviation (mV)");
  synth->add_option("--seed", synth_seed, "Noise RNG seed");
  synth->add_option("--out", synth_out, "Output path prefix")->required();
  synth->add_option("--subject", synth_subject, "subject_id for the manifest row");
  synth->add_option("--gender", synth_gender, "M or F")->check(CLI::IsMember({"M", "F"}));
  synth->add_option("--age", synth_age, "Age in years");
  synth->add_option("--label", synth_label, "Pain label")
      ->check(CLI::IsMember({"NP", "P1", "P2", "P3", "P4"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*detect) return cmd_detect(detect_input, detect_out);
    if (*features)
      return cmd_features(features_input, augment_mode_from_string(features_augment),
                          features_out);
    if (*eval) return cmd_eval(eval_config, eval_dataset);
    if (*render_cmd)
      return cmd_render(render_input, render_fs, render_kind, render_out,
                        render_window, render_hop);
    if (*synth)
      return cmd_synth(synth_bpm, synth_duration, synth_fs, synth_noise, synth_seed,
                       synth_out, synth_subject, synth_gender, synth_age, synth_label);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
