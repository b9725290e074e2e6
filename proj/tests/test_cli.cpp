#include <doctest.h>

#include <sys/wait.h>

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "painsig/dataio.hpp"
#include "painsig/run_config.hpp"

using namespace painsig;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const char* name) {
  fs::path dir = fs::temp_directory_path() / "painsig_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

struct CliRun {
  int exit_code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::vector<std::uint8_t> slurp_bytes(const fs::path& path) {
  std::string text = slurp(path);
  return {text.begin(), text.end()};
}

CliRun cli(const std::string& args) {
  static int invocation = 0;
  fs::path dir = fs::temp_directory_path() / "painsig_tests" / "cli_io";
  fs::create_directories(dir);
  fs::path out_path = dir / ("out" + std::to_string(invocation));
  fs::path err_path = dir / ("err" + std::to_string(invocation));
  ++invocation;

  std::string cmd = std::string("\"") + PAINSIG_CLI_PATH + "\" " + args + " >\"" +
                    out_path.string() + "\" 2>\"" + err_path.string() + "\"";
  int status = std::system(cmd.c_str());
  CliRun r;
  if (status != -1 && WIFEXITED(status)) r.exit_code = WEXITSTATUS(status);
  r.out = slurp(out_path);
  r.err = slurp(err_path);
  return r;
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

// separable two-rate fixture, saved as a real on-disk dataset
void save_fixture(const fs::path& manifest, int n_subjects, bool mixed_gender) {
  Dataset data;
  std::uint32_t seed = 400;
  for (int i = 0; i < n_subjects; ++i) {
    SubjectMeta meta;
    meta.subject_id = "s" + std::to_string(10 + i);
    meta.gender = mixed_gender && i % 2 == 1 ? Gender::Female : Gender::Male;
    meta.age = 30 + 10 * (i % 3);
    for (PainLabel label : {PainLabel::NP, PainLabel::P4}) {
      for (int r = 0; r < 2; ++r) {
        double bpm = (label == PainLabel::NP ? 60.0 : 95.0) + i + 0.5 * r;
        SynthEcg synth = synth_ecg(bpm, 12.0, 256.0, 0.02, seed++);
        EcgSegment seg = synth.segment;
        seg.segment_id = meta.subject_id + "_" + to_string(label) + "_" +
                         std::to_string(r);
        seg.subject = meta;
        seg.label = label;
        data.push_back(std::move(seg));
      }
    }
  }
  save_dataset(data, manifest, SignalFormat::F32le);
}

}  // namespace

TEST_CASE("help succeeds everywhere; a bare call is a usage error") {
  CHECK(cli("--help").exit_code == 0);
  for (const char* sub : {"detect", "features", "eval", "render", "synth"})
    CHECK(cli(std::string(sub) + " --help").exit_code == 0);
  CHECK(cli("").exit_code == 1);
  CHECK(cli("frobnicate").exit_code == 1);
  CHECK(cli("detect").exit_code == 1);  // missing required options
}

TEST_CASE("synth writes signal, truth, and manifest; detection finds the beats") {
  fs::path dir = fresh_dir("cli_pipeline");
  CliRun synth = cli("synth --bpm 72 --duration 12 --fs 256 --noise 0.02 --seed 5"
                     " --out \"" + (dir / "beat").string() +
                     "\" --subject s01 --gender F --age 42 --label P3");
  REQUIRE(synth.exit_code == 0);

  CHECK(fs::file_size(dir / "beat.f32") == 12 * 256 * 4);
  CHECK(slurp(dir / "beat.manifest.csv") ==
        "segment_id,subject_id,gender,age,label,fs,format,path\n"
        "beat,s01,F,42,P3,256,f32le,beat.f32\n");

  std::vector<std::string> truth = lines_of(slurp(dir / "beat.peaks.csv"));
  REQUIRE(truth.size() == 15);  // header + 14 beats at 72 bpm in 12 s
  CHECK(truth[0] == "segment_id,peak_index");
  CHECK(truth[1].rfind("beat,", 0) == 0);

  CliRun detect = cli("detect --input \"" + (dir / "beat.manifest.csv").string() +
                      "\" --out \"" + (dir / "peaks.csv").string() + "\"");
  REQUIRE(detect.exit_code == 0);
  std::vector<std::string> found = lines_of(slurp(dir / "peaks.csv"));
  REQUIRE(found.size() >= 13);
  CHECK(found[0] == "segment_id,peak_index");
  long long prev = -1;
  for (std::size_t i = 1; i < found.size(); ++i) {
    REQUIRE(found[i].rfind("beat,", 0) == 0);
    long long idx = std::stoll(found[i].substr(5));
    CHECK(idx > prev);
    CHECK(idx < 12 * 256);
    prev = idx;
  }

  CliRun features = cli("features --input \"" +
                        (dir / "beat.manifest.csv").string() + "\" --augment ga" +
                        " --out \"" + (dir / "features.csv").string() + "\"");
  REQUIRE(features.exit_code == 0);
  std::vector<std::string> rows = lines_of(slurp(dir / "features.csv"));
  REQUIRE(rows.size() == 2);
  CHECK(rows[0] == "segment_id,mu,rmssd,sdnn,slope,sr,hr,gender,age,label");
  CHECK(rows[1].rfind("beat,", 0) == 0);
  CHECK(rows[1].find(",1,42,P3") != std::string::npos);  // F -> 1, then age
}

TEST_CASE("an empty manifest yields empty outputs, successfully") {
  fs::path dir = fresh_dir("cli_empty");
  write_file(dir / "m.csv", "segment_id,subject_id,gender,age,label,fs,format,path\n");

  CliRun detect = cli("detect --input \"" + (dir / "m.csv").string() +
                      "\" --out \"" + (dir / "p.csv").string() + "\"");
  CHECK(detect.exit_code == 0);
  CHECK(slurp(dir / "p.csv") == "segment_id,peak_index\n");

  CliRun features = cli("features --input \"" + (dir / "m.csv").string() +
                        "\" --out \"" + (dir / "f.csv").string() + "\"");
  CHECK(features.exit_code == 0);
  CHECK(slurp(dir / "f.csv") == "segment_id,mu,rmssd,sdnn,slope,sr,hr,label\n");
}

TEST_CASE("a missing manifest fails without touching the output path") {
  fs::path dir = fresh_dir("cli_missing");
  CliRun r = cli("detect --input \"" + (dir / "absent.csv").string() +
                 "\" --out \"" + (dir / "p.csv").string() + "\"");
  CHECK(r.exit_code == 1);
  CHECK(r.err.find("error:") != std::string::npos);
  CHECK_FALSE(fs::exists(dir / "p.csv"));
  CHECK_FALSE(fs::exists(dir / "p.csv.tmp"));
}

TEST_CASE("unknown augment values are a usage error") {
  fs::path dir = fresh_dir("cli_badaugment");
  write_file(dir / "m.csv", "segment_id,subject_id,gender,age,label,fs,format,path\n");
  CliRun r = cli("features --input \"" + (dir / "m.csv").string() +
                 "\" --augment x --out \"" + (dir / "f.csv").string() + "\"");
  CHECK(r.exit_code == 1);
  CHECK_FALSE(fs::exists(dir / "f.csv"));
}

TEST_CASE("per-segment failures keep the good rows and exit 2") {
  fs::path dir = fresh_dir("cli_partial");
  CHECK(cli("synth --bpm 72 --duration 12 --fs 256 --noise 0.02 --seed 5 --out \"" +
            (dir / "beat").string() + "\" --subject s01 --gender F --age 42"
            " --label P3").exit_code == 0);
  CHECK(cli("synth --bpm 66 --duration 12 --fs 256 --noise 0.02 --seed 6 --out \"" +
            (dir / "alpha").string() + "\" --subject s02 --gender M --age 30"
            " --label NP").exit_code == 0);
  std::string flat(3072, '0');  // one zero per line
  std::string flat_lines;
  for (int i = 0; i < 3072; ++i) flat_lines += "0\n";
  write_file(dir / "flat.txt", flat_lines);
  write_file(dir / "m.csv",
             "segment_id,subject_id,gender,age,label,fs,format,path\n"
             "beat,s01,F,42,P3,256,f32le,beat.f32\n"
             "alpha,s02,M,30,NP,256,f32le,alpha.f32\n"
             "flat,s03,M,30,NP,256,text,flat.txt\n");

  CliRun detect = cli("detect --input \"" + (dir / "m.csv").string() +
                      "\" --out \"" + (dir / "p.csv").string() + "\"");
  CHECK(detect.exit_code == 2);
  CHECK(detect.err.find("detect failed for flat") != std::string::npos);
  std::vector<std::string> rows = lines_of(slurp(dir / "p.csv"));
  REQUIRE(rows.size() > 20);
  // rows come out ordered by segment id: all of alpha before all of beat
  CHECK(rows[1].rfind("alpha,", 0) == 0);
  CHECK(rows.back().rfind("beat,", 0) == 0);
  for (const std::string& row : rows) CHECK(row.rfind("flat,", 0) == std::string::npos);

  CliRun features = cli("features --input \"" + (dir / "m.csv").string() +
                        "\" --out \"" + (dir / "f.csv").string() + "\"");
  CHECK(features.exit_code == 2);
  CHECK(features.err.find("features failed for flat") != std::string::npos);
  std::vector<std::string> feat = lines_of(slurp(dir / "f.csv"));
  REQUIRE(feat.size() == 3);  // header + the two healthy segments
  CHECK(feat[1].rfind("alpha,", 0) == 0);
  CHECK(feat[2].rfind("beat,", 0) == 0);
}

TEST_CASE("rendering writes deterministic images and validates its inputs") {
  fs::path dir = fresh_dir("cli_render");
  std::string sine;
  for (int i = 0; i < 512; ++i)
    sine += std::to_string(std::sin(2.0 * M_PI * 32.0 * i / 256.0)) + "\n";
  write_file(dir / "sine.txt", sine);

  std::string base = "render --input \"" + (dir / "sine.txt").string() +
                     "\" --fs 256 --kind spec-psd --out \"";
  CHECK(cli(base + (dir / "a.png").string() + "\"").exit_code == 0);
  CHECK(cli(base + (dir / "b.png").string() + "\"").exit_code == 0);
  std::vector<std::uint8_t> a = slurp_bytes(dir / "a.png");
  CHECK(a.size() == 150830);
  CHECK(a == slurp_bytes(dir / "b.png"));
  CHECK(a[0] == 0x89);
  CHECK(a[1] == 'P');

  CHECK(cli("render --input \"" + (dir / "sine.txt").string() +
            "\" --fs 256 --kind waveform --out \"" + (dir / "w.ppm").string() +
            "\"").exit_code == 0);
  CHECK(slurp(dir / "w.ppm").rfind("P6\n224 224\n255\n", 0) == 0);

  // kind typo is caught by the option validator
  CHECK(cli("render --input \"" + (dir / "sine.txt").string() +
            "\" --fs 256 --kind psd --out \"" + (dir / "x.png").string() +
            "\"").exit_code == 1);

  // wrong extension
  CliRun ext = cli("render --input \"" + (dir / "sine.txt").string() +
                   "\" --fs 256 --kind waveform --out \"" +
                   (dir / "x.jpg").string() + "\"");
  CHECK(ext.exit_code == 1);
  CHECK(ext.err.find(".png or .ppm") != std::string::npos);

  // too short for the default window
  write_file(dir / "short.txt", "0.1\n0.2\n0.3\n");
  CliRun short_sig = cli("render --input \"" + (dir / "short.txt").string() +
                         "\" --fs 256 --kind spec-psd --out \"" +
                         (dir / "s.png").string() + "\"");
  CHECK(short_sig.exit_code == 1);
  CHECK_FALSE(fs::exists(dir / "s.png"));

  // non-numeric sample
  write_file(dir / "junk.txt", "0.1\nhello\n");
  CliRun junk = cli("render --input \"" + (dir / "junk.txt").string() +
                    "\" --fs 256 --kind waveform --out \"" +
                    (dir / "j.png").string() + "\"");
  CHECK(junk.exit_code == 1);
  CHECK(junk.err.find("not a number") != std::string::npos);
  CHECK(junk.err.find("line 2") != std::string::npos);
}

TEST_CASE("synthesis is reproducible from the seed and validates arguments") {
  fs::path dir = fresh_dir("cli_synth");
  std::string args = "synth --bpm 80 --duration 5 --fs 256 --noise 0.05 --out \"";
  CHECK(cli(args + (dir / "one").string() + "\" --seed 9").exit_code == 0);
  CHECK(cli(args + (dir / "two").string() + "\" --seed 9").exit_code == 0);
  CHECK(cli(args + (dir / "three").string() + "\" --seed 10").exit_code == 0);
  CHECK(slurp_bytes(dir / "one.f32") == slurp_bytes(dir / "two.f32"));
  CHECK(slurp_bytes(dir / "one.f32") != slurp_bytes(dir / "three.f32"));

  // same truth table up to the embedded segment id
  std::vector<std::string> one = lines_of(slurp(dir / "one.peaks.csv"));
  std::vector<std::string> two = lines_of(slurp(dir / "two.peaks.csv"));
  REQUIRE(one.size() == two.size());
  for (std::size_t i = 1; i < one.size(); ++i)
    CHECK(one[i].substr(one[i].find(',')) == two[i].substr(two[i].find(',')));

  CliRun bad_bpm = cli("synth --bpm 0 --duration 5 --out \"" +
                       (dir / "bad").string() + "\"");
  CHECK(bad_bpm.exit_code == 1);
  CHECK(bad_bpm.err.find("error:") != std::string::npos);

  CHECK(cli("synth --bpm 80 --duration 5 --gender X --out \"" +
            (dir / "bad2").string() + "\"").exit_code == 1);
}

TEST_CASE("evaluation runs from a config file and reports its table") {
  fs::path dir = fresh_dir("cli_eval");
  save_fixture(dir / "m.csv", 4, true);

  RunConfig cfg;
  cfg.manifest = "m.csv";
  cfg.task = TaskSpec::binary(PainLabel::P4);
  cfg.model = ModelKind::Lda;
  cfg.out_dir = (dir / "results").string();
  write_file(dir / "run.json", to_json(cfg));

  CliRun r = cli("eval --config \"" + (dir / "run.json").string() +
                 "\" --dataset biovid");
  REQUIRE(r.exit_code == 0);
  CHECK(r.out.find("Scheme: basic") != std::string::npos);
  CHECK(r.out.find("Model: LDA") != std::string::npos);

  std::string csv = slurp(dir / "results" / "results.csv");
  CHECK(csv.find("scheme,group,task,model,acc,prec,rec,f1,n_folds") == 0);
  CHECK(csv.find("basic,All,np_vs_p4,lda,1,1,1,1,4") != std::string::npos);

  std::string table = slurp(dir / "results" / "table.txt");
  CHECK(table.rfind("dataset: biovid\n", 0) == 0);
  CHECK(table.find("All") != std::string::npos);
}

TEST_CASE("evaluations with unsplittable groups exit 3 after writing results") {
  fs::path dir = fresh_dir("cli_eval_skip");
  save_fixture(dir / "m.csv", 3, false);  // all male

  RunConfig cfg;
  cfg.manifest = "m.csv";
  cfg.scheme = Scheme::Gender;
  cfg.task = TaskSpec::binary(PainLabel::P4);
  cfg.out_dir = (dir / "results").string();
  write_file(dir / "run.json", to_json(cfg));

  CliRun r = cli("eval --config \"" + (dir / "run.json").string() + "\"");
  CHECK(r.exit_code == 3);
  CHECK(r.err.find("group Females skipped") != std::string::npos);
  CHECK(slurp(dir / "results" / "table.txt").find("skipped:") != std::string::npos);
  CHECK(slurp(dir / "results" / "table.txt").find("dataset: synthetic") == 0);
}

TEST_CASE("evaluation rejects broken configs without writing outputs") {
  fs::path dir = fresh_dir("cli_eval_bad");
  write_file(dir / "broken.json", "{ \"manifest\": ");
  CliRun parse = cli("eval --config \"" + (dir / "broken.json").string() + "\"");
  CHECK(parse.exit_code == 1);
  CHECK(parse.err.find("not valid JSON") != std::string::npos);

  write_file(dir / "typo.json", R"({"manifest": "m.csv", "modle": "lda"})");
  CliRun typo = cli("eval --config \"" + (dir / "typo.json").string() + "\"");
  CHECK(typo.exit_code == 1);
  CHECK(typo.err.find("unknown key 'modle'") != std::string::npos);

  write_file(dir / "orphan.json", R"({"manifest": "never_written.csv"})");
  CliRun orphan = cli("eval --config \"" + (dir / "orphan.json").string() + "\"");
  CHECK(orphan.exit_code == 1);
  CHECK_FALSE(fs::exists(dir / "results"));
}
