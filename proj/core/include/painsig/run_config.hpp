#pragma once

#include <filesystem>
#include <string>

#include "painsig/eval.hpp"

namespace painsig {

// One evaluation run: scheme x task x model over a manifest. Serialized as
// versioned JSON; unknown keys are rejected so typos cannot silently change
// a run. to_json(from_json(text)) is lossless.
struct RunConfig {
  int schema_version = 1;
  std::uint32_t seed = 0;
  std::string manifest;  // path, relative to the config file's directory
  Scheme scheme = Scheme::Basic;
  TaskSpec task = TaskSpec::mc();
  ModelKind model = ModelKind::Lda;
  std::string out_dir = "results";
  EvalConfig eval;

  bool operator==(const RunConfig& other) const;
};

std::string to_json(const RunConfig& config);
// Raises InvalidConfig with the offending key or a parse diagnostic
// (line/column) in the message.
RunConfig run_config_from_json(const std::string& text);
RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace painsig
