#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "painsig/classic_ml.hpp"
#include "painsig/dataio.hpp"
#include "painsig/features.hpp"
#include "painsig/mtl_nn.hpp"

namespace painsig {

// Classification task: all five pain classes, or NP vs one level.
struct TaskSpec {
  enum class Kind { MC, BinaryVs };
  Kind kind = Kind::MC;
  PainLabel versus = PainLabel::P4;  // meaningful for BinaryVs only

  int n_classes() const { return kind == Kind::MC ? kPainClassCount : 2; }
  static TaskSpec mc() { return {Kind::MC, PainLabel::P4}; }
  static TaskSpec binary(PainLabel level) { return {Kind::BinaryVs, level}; }
};

std::string to_string(const TaskSpec& task);
TaskSpec task_from_string(const std::string& text);

// Square confusion matrix; rows = true class, columns = predicted class.
struct ConfusionMatrix {
  std::size_t n = 0;
  std::vector<std::int64_t> counts;

  explicit ConfusionMatrix(std::size_t classes = 0)
      : n(classes), counts(classes * classes, 0) {}
  std::int64_t& at(std::size_t t, std::size_t p) { return counts[t * n + p]; }
  std::int64_t at(std::size_t t, std::size_t p) const { return counts[t * n + p]; }
  std::int64_t total() const;
  void add(const ConfusionMatrix& other);
};

struct Metrics {
  double accuracy_micro = 0.0;
  double precision_macro = 0.0;
  double recall_macro = 0.0;
  double f1_macro = 0.0;
};

// accuracy = trace/total; per-class precision/recall with 0/0 defined as 0;
// macro = unweighted class mean; f1_macro = mean per-class harmonic mean.
// Raises EmptyConfusion when the total count is zero.
Metrics compute_metrics(const ConfusionMatrix& confusion);

struct Fold {
  std::string test_subject;
  std::vector<std::string> train_subjects;
};

// One fold per member subject that has data, ordered by subject_id.
// Raises GroupTooSmall when fewer than 2 members have data.
std::vector<Fold> loso_split(const SchemeGroup& group, const Dataset& data);

enum class ModelKind { Lda, SvmLinear, SvmRbf, StNn, MtNn };

const char* to_string(ModelKind kind) noexcept;
ModelKind model_kind_from_string(const std::string& text);
// Display name used in result tables, e.g. "SVM (RBF)".
std::string model_display_name(ModelKind kind, const struct EvalConfig& config);

// Auxiliary tasks trained alongside pain for the multi-task network.
struct AuxTasks {
  bool gender = false;
  bool age = false;
};

struct EvalConfig {
  std::uint32_t seed = 0;
  AugmentMode augment = AugmentMode::None;  // classic + single-task inputs
  bool standardize = true;
  AuxTasks aux;              // MtNn only
  LdaMode lda_mode = LdaMode::Pooled;
  SvmOptions svm;
  TrainConfig nn;
  std::vector<std::size_t> nn_encoder_widths{256, 512, 1024, 1024};
  std::size_t nn_head_hidden = 1024;
};

struct FoldResult {
  std::string test_subject;
  ConfusionMatrix confusion;
};

struct GroupResult {
  std::string group_key;
  bool evaluated = false;
  std::string annotation;  // reason when skipped or failed
  std::vector<FoldResult> folds;
  ConfusionMatrix pooled;
  Metrics pooled_metrics;
  Metrics fold_mean_metrics;  // unweighted mean of per-fold metrics
};

struct RunResult {
  Scheme scheme = Scheme::Basic;
  TaskSpec task;
  ModelKind model = ModelKind::Lda;
  std::string model_name;
  std::vector<GroupResult> groups;
};

// Full harness: per group, leave-one-subject-out; per fold, run the segment
// pipeline (detect -> IBI features -> augment), fit the model on training
// subjects only (scaler statistics included), test on the held-out subject.
// Groups that cannot be evaluated are annotated, not fatal. Deterministic
// for a fixed seed and any thread count.
RunResult run_experiment(const Dataset& data, Scheme scheme, const TaskSpec& task,
                         ModelKind model, const EvalConfig& config);

// Machine CSV: scheme,group,task,model,acc,prec,rec,f1,n_folds
void write_results_csv(std::ostream& out, const std::vector<RunResult>& runs);
// Aligned text table (groups as rows; pooled and fold-mean metrics).
std::string format_results_table(const std::vector<RunResult>& runs);

}  // namespace painsig
