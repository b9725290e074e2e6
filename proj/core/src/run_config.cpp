#include "painsig/run_config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "painsig/errors.hpp"

namespace painsig {

namespace {

using nlohmann::json;

std::string aux_to_string(const AuxTasks& aux) {
  std::string s;
  if (aux.gender) s += 'g';
  if (aux.age) s += 'a';
  return s;
}

AuxTasks aux_from_string(const std::string& text) {
  if (text.empty()) return {};
  if (text == "g") return {.gender = true, .age = false};
  if (text == "a") return {.gender = false, .age = true};
  if (text == "ga" || text == "ag") return {.gender = true, .age = true};
  raise(Errc::InvalidConfig, "unknown aux_tasks '" + text + "' (want \"\", \"g\", \"a\", or \"ga\")");
}

std::string lda_mode_to_string(LdaMode mode) {
  return mode == LdaMode::Pooled ? "pooled" : "per_class";
}

LdaMode lda_mode_from_string(const std::string& text) {
  if (text == "pooled") return LdaMode::Pooled;
  if (text == "per_class") return LdaMode::PerClass;
  raise(Errc::InvalidConfig, "unknown lda mode '" + text + "'");
}

// Typos must not silently fall back to defaults.
void reject_unknown_keys(const json& obj, const std::string& where,
                         const std::set<std::string>& known) {
  for (const auto& item : obj.items()) {
    if (!known.count(item.key()))
      raise(Errc::InvalidConfig, "unknown key '" + item.key() + "' in " + where);
  }
}

template <typename T>
void read_if(const json& obj, const char* key, T& into) {
  if (auto it = obj.find(key); it != obj.end()) into = it->get<T>();
}

}  // namespace

bool RunConfig::operator==(const RunConfig& other) const {
  return schema_version == other.schema_version && seed == other.seed &&
         manifest == other.manifest && scheme == other.scheme &&
         task.kind == other.task.kind && task.versus == other.task.versus &&
         model == other.model && out_dir == other.out_dir &&
         eval.augment == other.eval.augment &&
         eval.standardize == other.eval.standardize &&
         eval.aux.gender == other.eval.aux.gender &&
         eval.aux.age == other.eval.aux.age &&
         eval.lda_mode == other.eval.lda_mode && eval.svm.c == other.eval.svm.c &&
         eval.svm.tol == other.eval.svm.tol &&
         eval.svm.max_passes == other.eval.svm.max_passes &&
         eval.svm.sigma == other.eval.svm.sigma &&
         eval.nn.epochs == other.eval.nn.epochs &&
         eval.nn.warmup_epochs == other.eval.nn.warmup_epochs &&
         eval.nn.lr == other.eval.nn.lr &&
         eval.nn.weight_decay == other.eval.nn.weight_decay &&
         eval.nn.label_smooth == other.eval.nn.label_smooth &&
         eval.nn.ema == other.eval.nn.ema &&
         eval.nn.ema_decay == other.eval.nn.ema_decay &&
         eval.nn.batch_size == other.eval.nn.batch_size &&
         eval.nn.coeffs == other.eval.nn.coeffs &&
         eval.nn_encoder_widths == other.eval.nn_encoder_widths &&
         eval.nn_head_hidden == other.eval.nn_head_hidden;
}

std::string to_json(const RunConfig& config) {
  json doc;
  doc["schema_version"] = config.schema_version;
  doc["seed"] = config.seed;
  doc["manifest"] = config.manifest;
  doc["scheme"] = to_string(config.scheme);
  doc["task"] = to_string(config.task);
  doc["model"] = to_string(config.model);
  doc["out_dir"] = config.out_dir;
  doc["augment"] = to_string(config.eval.augment);
  doc["aux_tasks"] = aux_to_string(config.eval.aux);
  doc["standardize"] = config.eval.standardize;
  doc["lda"] = json{{"mode", lda_mode_to_string(config.eval.lda_mode)}};
  doc["svm"] = json{{"c", config.eval.svm.c},
                    {"tol", config.eval.svm.tol},
                    {"max_passes", config.eval.svm.max_passes},
                    {"sigma", config.eval.svm.sigma}};
  doc["nn"] = json{{"epochs", config.eval.nn.epochs},
                   {"warmup_epochs", config.eval.nn.warmup_epochs},
                   {"lr", config.eval.nn.lr},
                   {"weight_decay", config.eval.nn.weight_decay},
                   {"label_smooth", config.eval.nn.label_smooth},
                   {"ema", config.eval.nn.ema},
                   {"ema_decay", config.eval.nn.ema_decay},
                   {"batch_size", config.eval.nn.batch_size},
                   {"encoder_widths", config.eval.nn_encoder_widths},
                   {"head_hidden", config.eval.nn_head_hidden},
                   {"coeffs", config.eval.nn.coeffs}};
  return doc.dump(2) + "\n";
}

RunConfig run_config_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    raise(Errc::InvalidConfig, std::string("config is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) raise(Errc::InvalidConfig, "config root must be an object");

  reject_unknown_keys(doc, "config",
                      {"schema_version", "seed", "manifest", "scheme", "task",
                       "model", "out_dir", "augment", "aux_tasks", "standardize",
                       "lda", "svm", "nn"});

  RunConfig config;
  try {
    read_if(doc, "schema_version", config.schema_version);
    if (config.schema_version != 1)
      raise(Errc::InvalidConfig, "unsupported schema_version " +
                                     std::to_string(config.schema_version));
    read_if(doc, "seed", config.seed);
    if (!doc.contains("manifest"))
      raise(Errc::InvalidConfig, "config is missing required key 'manifest'");
    config.manifest = doc["manifest"].get<std::string>();
    if (doc.contains("scheme"))
      config.scheme = scheme_from_string(doc["scheme"].get<std::string>());
    if (doc.contains("task"))
      config.task = task_from_string(doc["task"].get<std::string>());
    if (doc.contains("model"))
      config.model = model_kind_from_string(doc["model"].get<std::string>());
    read_if(doc, "out_dir", config.out_dir);
    if (doc.contains("augment"))
      config.eval.augment =
          augment_mode_from_string(doc["augment"].get<std::string>());
    if (doc.contains("aux_tasks"))
      config.eval.aux = aux_from_string(doc["aux_tasks"].get<std::string>());
    read_if(doc, "standardize", config.eval.standardize);

    if (doc.contains("lda")) {
      const json& lda = doc["lda"];
      reject_unknown_keys(lda, "lda", {"mode"});
      if (lda.contains("mode"))
        config.eval.lda_mode = lda_mode_from_string(lda["mode"].get<std::string>());
    }
    if (doc.contains("svm")) {
      const json& svm = doc["svm"];
      reject_unknown_keys(svm, "svm", {"c", "tol", "max_passes", "sigma"});
      read_if(svm, "c", config.eval.svm.c);
      read_if(svm, "tol", config.eval.svm.tol);
      read_if(svm, "max_passes", config.eval.svm.max_passes);
      read_if(svm, "sigma", config.eval.svm.sigma);
    }
    if (doc.contains("nn")) {
      const json& nn = doc["nn"];
      reject_unknown_keys(nn, "nn",
                          {"epochs", "warmup_epochs", "lr", "weight_decay",
                           "label_smooth", "ema", "ema_decay", "batch_size",
                           "encoder_widths", "head_hidden", "coeffs"});
      read_if(nn, "epochs", config.eval.nn.epochs);
      read_if(nn, "warmup_epochs", config.eval.nn.warmup_epochs);
      read_if(nn, "lr", config.eval.nn.lr);
      read_if(nn, "weight_decay", config.eval.nn.weight_decay);
      read_if(nn, "label_smooth", config.eval.nn.label_smooth);
      read_if(nn, "ema", config.eval.nn.ema);
      read_if(nn, "ema_decay", config.eval.nn.ema_decay);
      read_if(nn, "batch_size", config.eval.nn.batch_size);
      read_if(nn, "encoder_widths", config.eval.nn_encoder_widths);
      read_if(nn, "head_hidden", config.eval.nn_head_hidden);
      read_if(nn, "coeffs", config.eval.nn.coeffs);
    }
  } catch (const json::exception& e) {
    raise(Errc::InvalidConfig, std::string("bad config value: ") + e.what());
  }

  config.eval.seed = config.seed;
  config.eval.nn.seed = config.seed;
  return config;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) raise(Errc::MissingFile, "cannot open config " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return run_config_from_json(buffer.str());
}

}  // namespace painsig
