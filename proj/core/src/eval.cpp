#include "painsig/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>

#include "painsig/detail/parallel.hpp"
#include "painsig/errors.hpp"

namespace painsig {

std::string to_string(const TaskSpec& task) {
  if (task.kind == TaskSpec::Kind::MC) return "mc";
  return "np_vs_p" + std::to_string(static_cast<int>(task.versus));
}

TaskSpec task_from_string(const std::string& text) {
  if (text == "mc") return TaskSpec::mc();
  for (int level = 1; level <= 4; ++level) {
    if (text == "np_vs_p" + std::to_string(level))
      return TaskSpec::binary(static_cast<PainLabel>(level));
  }
  raise(Errc::InvalidConfig, "unknown task '" + text + "'");
}

std::int64_t ConfusionMatrix::total() const {
  std::int64_t t = 0;
  for (std::int64_t v : counts) t += v;
  return t;
}

void ConfusionMatrix::add(const ConfusionMatrix& other) {
  if (n != other.n) raise(Errc::ShapeMismatch, "confusion sizes differ");
  for (std::size_t i = 0; i < counts.size(); ++i) counts[i] += other.counts[i];
}

Metrics compute_metrics(const ConfusionMatrix& confusion) {
  const std::size_t n = confusion.n;
  if (n == 0 || confusion.total() == 0)
    raise(Errc::EmptyConfusion, "confusion matrix holds no samples");

  Metrics m;
  std::int64_t trace = 0;
  for (std::size_t k = 0; k < n; ++k) trace += confusion.at(k, k);
  m.accuracy_micro =
      static_cast<double>(trace) / static_cast<double>(confusion.total());

  double prec_sum = 0.0, rec_sum = 0.0, f1_sum = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    std::int64_t col = 0, row = 0;
    for (std::size_t t = 0; t < n; ++t) {
      col += confusion.at(t, k);
      row += confusion.at(k, t);
    }
    std::int64_t tp = confusion.at(k, k);
    double prec = col == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(col);
    double rec = row == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(row);
    double f1 = prec + rec == 0.0 ? 0.0 : 2.0 * prec * rec / (prec + rec);
    prec_sum += prec;
    rec_sum += rec;
    f1_sum += f1;
  }
  m.precision_macro = prec_sum / static_cast<double>(n);
  m.recall_macro = rec_sum / static_cast<double>(n);
  m.f1_macro = f1_sum / static_cast<double>(n);
  return m;
}

std::vector<Fold> loso_split(const SchemeGroup& group, const Dataset& data) {
  std::set<std::string> with_data;
  for (const EcgSegment& seg : data) with_data.insert(seg.subject.subject_id);

  std::vector<std::string> members;
  for (const std::string& s : group.subjects)
    if (with_data.count(s)) members.push_back(s);
  std::sort(members.begin(), members.end());

  if (members.size() < 2)
    raise(Errc::GroupTooSmall, "group '" + group.group_key + "' has " +
                                   std::to_string(members.size()) +
                                   " subjects with data, needs >= 2");
  std::vector<Fold> folds;
  for (const std::string& test : members) {
    Fold f;
    f.test_subject = test;
    for (const std::string& s : members)
      if (s != test) f.train_subjects.push_back(s);
    folds.push_back(std::move(f));
  }
  return folds;
}

const char* to_string(ModelKind kind) noexcept {
  switch (kind) {
    case ModelKind::Lda: return "lda";
    case ModelKind::SvmLinear: return "svm_lin";
    case ModelKind::SvmRbf: return "svm_rbf";
    case ModelKind::StNn: return "st_nn";
    case ModelKind::MtNn: return "mt_nn";
  }
  return "lda";
}

ModelKind model_kind_from_string(const std::string& text) {
  if (text == "lda") return ModelKind::Lda;
  if (text == "svm_lin") return ModelKind::SvmLinear;
  if (text == "svm_rbf") return ModelKind::SvmRbf;
  if (text == "st_nn") return ModelKind::StNn;
  if (text == "mt_nn") return ModelKind::MtNn;
  raise(Errc::InvalidConfig, "unknown model '" + text + "'");
}

std::string model_display_name(ModelKind kind, const EvalConfig& config) {
  switch (kind) {
    case ModelKind::Lda: return "LDA";
    case ModelKind::SvmLinear: return "SVM (LN)";
    case ModelKind::SvmRbf: return "SVM (RBF)";
    case ModelKind::StNn: return "ST-NN";
    case ModelKind::MtNn: {
      std::string aux;
      if (config.aux.gender) aux += "G";
      if (config.aux.age) aux += "A";
      return aux.empty() ? "MT-NN" : "MT-NN T(" + aux + ")";
    }
  }
  return "?";
}

namespace {

struct SegmentFeatures {
  std::string segment_id;
  std::string subject_id;
  PainLabel label = PainLabel::NP;
  Gender gender = Gender::Male;
  int age = 0;
  std::vector<double> values;  // augmented feature vector
  bool ok = false;
  std::string error;
};

int task_class_of(const TaskSpec& task, PainLabel label) {
  if (task.kind == TaskSpec::Kind::MC) return static_cast<int>(label);
  return label == PainLabel::NP ? 0 : 1;
}

bool task_selects(const TaskSpec& task, PainLabel label) {
  if (task.kind == TaskSpec::Kind::MC) return true;
  return label == PainLabel::NP || label == task.versus;
}

// The per-segment pipeline: detection -> intervals -> six features ->
// demographic augmentation. Pure per segment, so it runs once up front.
std::vector<SegmentFeatures> pipeline_features(const Dataset& data,
                                               AugmentMode augment) {
  std::vector<SegmentFeatures> out(data.size());
  detail::parallel_for(data.size(), [&](std::size_t i) {
    const EcgSegment& seg = data[i];
    SegmentFeatures& sf = out[i];
    sf.segment_id = seg.segment_id;
    sf.subject_id = seg.subject.subject_id;
    sf.label = seg.label;
    sf.gender = seg.subject.gender;
    sf.age = seg.subject.age;
    try {
      RPeakList peaks = detect_r_peaks(seg);
      IbiSeries ibis = peaks_to_ibis(peaks);
      IbiFeatures f = compute_ibi_features(ibis, seg.fs);
      sf.values = augment_features(f, seg.subject, augment).as_vector();
      sf.ok = true;
    } catch (const Error& e) {
      sf.error = e.what();
    }
  });
  return out;
}

struct FoldPlan {
  Fold fold;
  std::uint32_t seed = 0;
};

ConfusionMatrix run_fold(const std::vector<const SegmentFeatures*>& segments,
                         const TaskSpec& task, ModelKind kind,
                         const EvalConfig& config, const FoldPlan& plan) {
  std::vector<const SegmentFeatures*> train, test;
  std::set<std::string> train_set(plan.fold.train_subjects.begin(),
                                  plan.fold.train_subjects.end());
  for (const SegmentFeatures* sf : segments) {
    if (sf->subject_id == plan.fold.test_subject) {
      test.push_back(sf);
    } else if (train_set.count(sf->subject_id)) {
      train.push_back(sf);
    }
  }
  const int n_classes = task.n_classes();
  ConfusionMatrix confusion(static_cast<std::size_t>(n_classes));
  if (train.empty() || test.empty()) return confusion;

  const std::size_t dim = train.front()->values.size();
  Matrix x(train.size(), dim);
  std::vector<int> y(train.size());
  for (std::size_t r = 0; r < train.size(); ++r) {
    std::copy(train[r]->values.begin(), train[r]->values.end(), x.row(r).begin());
    y[r] = task_class_of(task, train[r]->label);
  }

  // Scaler statistics come from the training split only.
  StandardScaler scaler;
  if (config.standardize) {
    scaler = StandardScaler::fit(x);
    x = scaler.transform_matrix(x);
  }
  auto test_vector = [&](const SegmentFeatures* sf) {
    return config.standardize ? scaler.transform(sf->values) : sf->values;
  };

  switch (kind) {
    case ModelKind::Lda: {
      LdaModel model = lda_fit(x, y, config.lda_mode);
      for (const SegmentFeatures* sf : test) {
        int pred = lda_predict(model, test_vector(sf)).class_id;
        confusion.at(task_class_of(task, sf->label), pred) += 1;
      }
      break;
    }
    case ModelKind::SvmLinear:
    case ModelKind::SvmRbf: {
      KernelType kernel =
          kind == ModelKind::SvmLinear ? KernelType::Linear : KernelType::Rbf;
      SvmModel model = svm_fit(x, y, kernel, config.svm);
      for (const SegmentFeatures* sf : test) {
        int pred = svm_predict(model, test_vector(sf));
        confusion.at(task_class_of(task, sf->label), pred) += 1;
      }
      break;
    }
    case ModelKind::StNn:
    case ModelKind::MtNn: {
      MlpSpec spec;
      spec.input_dim = dim;
      spec.encoder_widths = config.nn_encoder_widths;
      spec.heads[TaskId::Pain] = {config.nn_head_hidden,
                                  static_cast<std::size_t>(n_classes)};

      TrainingSet set;
      set.x = x;
      set.pain = y;
      std::map<int, int> age_to_class;
      if (kind == ModelKind::MtNn) {
        if (config.aux.gender) {
          spec.heads[TaskId::Gender] = {config.nn_head_hidden, 2};
          set.gender.resize(train.size());
          for (std::size_t r = 0; r < train.size(); ++r)
            set.gender[r] = train[r]->gender == Gender::Male ? 0 : 1;
        }
        if (config.aux.age) {
          std::set<int> ages;
          for (const SegmentFeatures* sf : train) ages.insert(sf->age);
          if (ages.size() < 2)
            raise(Errc::DegenerateClass,
                  "age task needs >= 2 distinct training ages, got " +
                      std::to_string(ages.size()));
          int next = 0;
          for (int a : ages) age_to_class[a] = next++;
          spec.heads[TaskId::Age] = {config.nn_head_hidden, ages.size()};
          set.age_class.resize(train.size());
          for (std::size_t r = 0; r < train.size(); ++r)
            set.age_class[r] = age_to_class.at(train[r]->age);
        }
      }
      TrainConfig tc = config.nn;
      tc.seed = plan.seed;
      TrainResult trained = painsig::train(spec, tc, set);
      for (const SegmentFeatures* sf : test) {
        std::vector<double> v = test_vector(sf);
        int pred = predict(trained.model, v, tc.ema).at(TaskId::Pain);
        confusion.at(task_class_of(task, sf->label), pred) += 1;
      }
      break;
    }
  }
  return confusion;
}

Metrics mean_fold_metrics(const std::vector<FoldResult>& folds) {
  Metrics mean;
  std::size_t counted = 0;
  for (const FoldResult& f : folds) {
    if (f.confusion.total() == 0) continue;
    Metrics m = compute_metrics(f.confusion);
    mean.accuracy_micro += m.accuracy_micro;
    mean.precision_macro += m.precision_macro;
    mean.recall_macro += m.recall_macro;
    mean.f1_macro += m.f1_macro;
    ++counted;
  }
  if (counted > 0) {
    double d = static_cast<double>(counted);
    mean.accuracy_micro /= d;
    mean.precision_macro /= d;
    mean.recall_macro /= d;
    mean.f1_macro /= d;
  }
  return mean;
}

}  // namespace

RunResult run_experiment(const Dataset& data, Scheme scheme, const TaskSpec& task,
                         ModelKind model, const EvalConfig& config) {
  if (model == ModelKind::MtNn && config.augment != AugmentMode::None)
    raise(Errc::InvalidConfig,
          "mt_nn uses demographics as training targets; augment must be none");

  RunResult result;
  result.scheme = scheme;
  result.task = task;
  result.model = model;
  result.model_name = model_display_name(model, config);

  std::vector<SegmentFeatures> features = pipeline_features(data, config.augment);

  // Task-eligible segments with usable features, by subject.
  std::vector<const SegmentFeatures*> eligible;
  std::set<std::string> subjects_with_data;
  std::size_t dropped = 0;
  for (const SegmentFeatures& sf : features) {
    if (!task_selects(task, sf.label)) continue;
    if (!sf.ok) {
      ++dropped;
      continue;
    }
    eligible.push_back(&sf);
    subjects_with_data.insert(sf.subject_id);
  }

  // Dataset restricted to eligible segments, to drive loso_split eligibility.
  Dataset stub;
  for (const SegmentFeatures* sf : eligible) {
    EcgSegment s;
    s.segment_id = sf->segment_id;
    s.subject.subject_id = sf->subject_id;
    s.fs = 1.0;
    s.samples = {0.0};
    stub.push_back(std::move(s));
  }

  std::vector<SchemeGroup> groups = build_scheme_partitions(data, scheme);
  for (const SchemeGroup& group : groups) {
    GroupResult gr;
    gr.group_key = group.group_key;
    gr.pooled = ConfusionMatrix(static_cast<std::size_t>(task.n_classes()));

    std::vector<Fold> folds;
    try {
      folds = loso_split(group, stub);
    } catch (const Error& e) {
      gr.annotation = e.what();
      result.groups.push_back(std::move(gr));
      continue;
    }

    std::vector<FoldPlan> plans(folds.size());
    for (std::size_t i = 0; i < folds.size(); ++i)
      plans[i] = {folds[i], config.seed + static_cast<std::uint32_t>(i)};

    std::vector<FoldResult> fold_results(folds.size());
    std::vector<std::string> fold_errors(folds.size());
    detail::parallel_for(folds.size(), [&](std::size_t i) {
      fold_results[i].test_subject = plans[i].fold.test_subject;
      try {
        fold_results[i].confusion =
            run_fold(eligible, task, model, config, plans[i]);
      } catch (const Error& e) {
        fold_errors[i] = e.what();
      } catch (const std::exception& e) {
        fold_errors[i] = e.what();
      }
    });

    std::string first_error;
    for (const std::string& e : fold_errors)
      if (!e.empty() && first_error.empty()) first_error = e;
    if (!first_error.empty()) {
      gr.annotation = first_error;
      result.groups.push_back(std::move(gr));
      continue;
    }

    gr.evaluated = true;
    gr.folds = std::move(fold_results);
    for (const FoldResult& f : gr.folds) gr.pooled.add(f.confusion);
    if (gr.pooled.total() > 0) gr.pooled_metrics = compute_metrics(gr.pooled);
    gr.fold_mean_metrics = mean_fold_metrics(gr.folds);
    if (dropped > 0)
      gr.annotation = std::to_string(dropped) + " segment(s) dropped by the "
                                                "feature pipeline";
    result.groups.push_back(std::move(gr));
  }
  return result;
}

void write_results_csv(std::ostream& out, const std::vector<RunResult>& runs) {
  out << "scheme,group,task,model,acc,prec,rec,f1,n_folds\n";
  std::ostringstream line;
  line.precision(17);
  for (const RunResult& run : runs) {
    for (const GroupResult& g : run.groups) {
      if (!g.evaluated) continue;
      line.str("");
      line << to_string(run.scheme) << ',' << g.group_key << ','
           << to_string(run.task) << ',' << to_string(run.model) << ','
           << g.pooled_metrics.accuracy_micro << ','
           << g.pooled_metrics.precision_macro << ','
           << g.pooled_metrics.recall_macro << ',' << g.pooled_metrics.f1_macro
           << ',' << g.folds.size() << '\n';
      out << line.str();
    }
  }
}

std::string format_results_table(const std::vector<RunResult>& runs) {
  std::ostringstream out;
  char buf[160];
  for (const RunResult& run : runs) {
    out << "Scheme: " << to_string(run.scheme) << "   Task: " << to_string(run.task)
        << "   Model: " << run.model_name << '\n';
    std::snprintf(buf, sizeof buf, "%-16s %7s %7s %7s %7s %6s  %s\n", "Group",
                  "Acc", "Prec", "Rec", "F1", "Folds", "Fold-mean Acc");
    out << buf;
    for (const GroupResult& g : run.groups) {
      if (!g.evaluated) {
        std::snprintf(buf, sizeof buf, "%-16s skipped: ", g.group_key.c_str());
        out << buf << g.annotation << '\n';
        continue;
      }
      std::snprintf(buf, sizeof buf, "%-16s %7.4f %7.4f %7.4f %7.4f %6zu  %7.4f\n",
                    g.group_key.c_str(), g.pooled_metrics.accuracy_micro,
                    g.pooled_metrics.precision_macro, g.pooled_metrics.recall_macro,
                    g.pooled_metrics.f1_macro, g.folds.size(),
                    g.fold_mean_metrics.accuracy_micro);
      out << buf;
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace painsig
