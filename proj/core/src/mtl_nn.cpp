#include "painsig/mtl_nn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "painsig/detail/rng.hpp"
#include "painsig/errors.hpp"

namespace painsig {

const char* to_string(TaskId task) noexcept {
  switch (task) {
    case TaskId::Pain: return "pain";
    case TaskId::Age: return "age";
    case TaskId::Gender: return "gender";
  }
  return "pain";
}

namespace {

AffineLayer init_layer(std::size_t n_out, std::size_t n_in, detail::Rng& rng) {
  AffineLayer layer;
  layer.w = Matrix(n_out, n_in);
  layer.b.assign(n_out, 0.0);
  // Uniform He-style init: limit = sqrt(6 / fan_in).
  double limit = std::sqrt(6.0 / static_cast<double>(n_in));
  for (double& v : layer.w.v) v = rng.uniform(-limit, limit);
  return layer;
}

void validate_spec(const MlpSpec& spec) {
  if (spec.input_dim == 0) raise(Errc::ShapeMismatch, "input_dim must be > 0");
  if (spec.encoder_widths.empty())
    raise(Errc::ShapeMismatch, "encoder needs at least one layer");
  if (!spec.heads.count(TaskId::Pain))
    raise(Errc::MissingTaskLabels, "spec must include the pain head");
  for (const auto& [task, head] : spec.heads) {
    if (head.n_out < 2)
      raise(Errc::ShapeMismatch, std::string("head ") + to_string(task) +
                                     " needs n_out >= 2");
    if (head.hidden == 0)
      raise(Errc::ShapeMismatch, std::string("head ") + to_string(task) +
                                     " needs hidden > 0");
  }
}

// Affine map of a batch: Y = X W^T + b (rows are samples).
Matrix affine(const Matrix& x, const AffineLayer& layer) {
  Matrix y = matmul_nt(x, layer.w);
  for (std::size_t r = 0; r < y.rows; ++r)
    for (std::size_t c = 0; c < y.cols; ++c) y(r, c) += layer.b[c];
  return y;
}

void relu_inplace(Matrix& m) {
  for (double& v : m.v)
    if (v < 0.0) v = 0.0;
}

}  // namespace

MtlModel init_model(const MlpSpec& spec, std::uint32_t seed) {
  validate_spec(spec);
  detail::Rng rng(seed);
  MtlModel m;
  m.spec = spec;
  std::size_t in = spec.input_dim;
  for (std::size_t width : spec.encoder_widths) {
    m.encoder.push_back(init_layer(width, in, rng));
    in = width;
  }
  for (const auto& [task, head] : spec.heads) {
    m.heads[task] = {init_layer(head.hidden, in, rng),
                     init_layer(head.n_out, head.hidden, rng)};
  }
  m.ema_encoder = m.encoder;
  m.ema_heads = m.heads;
  return m;
}

std::map<TaskId, Matrix> forward(const MtlModel& model, const Matrix& batch,
                                 bool use_ema) {
  if (batch.cols != model.spec.input_dim)
    raise(Errc::ShapeMismatch, "batch dim " + std::to_string(batch.cols) +
                                   " vs input dim " +
                                   std::to_string(model.spec.input_dim));
  const auto& encoder = use_ema ? model.ema_encoder : model.encoder;
  const auto& heads = use_ema ? model.ema_heads : model.heads;

  Matrix a = batch;
  for (const AffineLayer& layer : encoder) {
    a = affine(a, layer);
    relu_inplace(a);
  }
  std::map<TaskId, Matrix> out;
  for (const auto& [task, pair] : heads) {
    Matrix h = affine(a, pair[0]);  // heads are affine only, no nonlinearity
    out[task] = affine(h, pair[1]);
  }
  return out;
}

double smoothed_cross_entropy(std::span<const double> logits, int true_class,
                              double eps) {
  if (!(eps >= 0.0 && eps < 1.0))
    raise(Errc::InvalidEpsilon, "label smoothing must satisfy 0 <= eps < 1");
  const std::size_t n = logits.size();
  if (n < 2) raise(Errc::ShapeMismatch, "need at least 2 logits");
  if (true_class < 0 || static_cast<std::size_t>(true_class) >= n)
    raise(Errc::ShapeMismatch, "true class out of range");

  double mx = logits[0];
  for (double v : logits) mx = std::max(mx, v);
  double lse = 0.0;
  for (double v : logits) lse += std::exp(v - mx);
  lse = mx + std::log(lse);

  const double off = eps / static_cast<double>(n - 1);
  double loss = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    double p = static_cast<int>(k) == true_class ? 1.0 - eps : off;
    if (p != 0.0) loss -= p * (logits[k] - lse);
  }
  return loss;
}

double mtl_loss(const std::map<TaskId, double>& task_losses,
                const std::array<double, 3>& w, const std::array<double, 3>& c) {
  double total = 0.0;
  for (const auto& [task, loss] : task_losses) {
    std::size_t j = static_cast<std::size_t>(task);
    total += (std::exp(w[j]) * loss + w[j]) * c[j];
  }
  return total;
}

double mtl_loss_dw(double loss_j, double w_j, double c_j) {
  return c_j * (std::exp(w_j) * loss_j + 1.0);
}

namespace {

struct ForwardTrace {
  std::vector<Matrix> encoder_pre;    // pre-activations per encoder layer
  std::vector<Matrix> encoder_act;    // post-ReLU activations
  std::map<TaskId, Matrix> head_hidden;
  std::map<TaskId, Matrix> logits;
};

ForwardTrace traced_forward(const MtlModel& model, const Matrix& batch) {
  ForwardTrace t;
  const Matrix* a = &batch;
  for (const AffineLayer& layer : model.encoder) {
    t.encoder_pre.push_back(affine(*a, layer));
    Matrix act = t.encoder_pre.back();
    relu_inplace(act);
    t.encoder_act.push_back(std::move(act));
    a = &t.encoder_act.back();
  }
  for (const auto& [task, pair] : model.heads) {
    t.head_hidden[task] = affine(*a, pair[0]);
    t.logits[task] = affine(t.head_hidden[task], pair[1]);
  }
  return t;
}

const std::vector<int>* labels_for(TaskId task, const std::vector<int>& pain,
                                   const std::vector<int>& age,
                                   const std::vector<int>& gender) {
  switch (task) {
    case TaskId::Pain: return &pain;
    case TaskId::Age: return &age;
    case TaskId::Gender: return &gender;
  }
  return &pain;
}

}  // namespace

Gradients loss_and_gradients(const MtlModel& model, const Matrix& batch,
                             const std::vector<int>& pain,
                             const std::vector<int>& age_class,
                             const std::vector<int>& gender,
                             const TrainConfig& config) {
  const std::size_t bsz = batch.rows;
  if (bsz == 0) raise(Errc::ShapeMismatch, "empty batch");
  for (const auto& [task, head] : model.spec.heads) {
    const std::vector<int>* labels = labels_for(task, pain, age_class, gender);
    if (labels->size() != bsz)
      raise(Errc::MissingTaskLabels,
            std::string("task ") + to_string(task) + " expects " +
                std::to_string(bsz) + " labels, got " +
                std::to_string(labels->size()));
  }

  ForwardTrace trace = traced_forward(model, batch);
  const bool multi = model.spec.heads.size() > 1;

  Gradients g;
  g.encoder.resize(model.encoder.size());
  for (std::size_t l = 0; l < model.encoder.size(); ++l) {
    g.encoder[l].w = Matrix(model.encoder[l].w.rows, model.encoder[l].w.cols);
    g.encoder[l].b.assign(model.encoder[l].b.size(), 0.0);
  }

  const Matrix& top_act =
      model.encoder.empty() ? batch : trace.encoder_act.back();
  Matrix d_top(top_act.rows, top_act.cols);

  for (const auto& [task, pair] : model.heads) {
    const std::vector<int>& labels =
        *labels_for(task, pain, age_class, gender);
    const Matrix& logits = trace.logits.at(task);
    const std::size_t n_out = logits.cols;
    const double off = config.label_smooth / static_cast<double>(n_out - 1);

    // Mean smoothed cross entropy and d(loss)/d(logits) = (softmax - p)/B.
    double task_loss = 0.0;
    Matrix dlogits(logits.rows, logits.cols);
    for (std::size_t r = 0; r < logits.rows; ++r) {
      std::span<const double> row = logits.row(r);
      task_loss += smoothed_cross_entropy(row, labels[r], config.label_smooth);
      double mx = row[0];
      for (double v : row) mx = std::max(mx, v);
      double denom = 0.0;
      for (double v : row) denom += std::exp(v - mx);
      for (std::size_t k = 0; k < n_out; ++k) {
        double soft = std::exp(row[k] - mx) / denom;
        double p = static_cast<int>(k) == labels[r] ? 1.0 - config.label_smooth : off;
        dlogits(r, k) = (soft - p) / static_cast<double>(bsz);
      }
    }
    task_loss /= static_cast<double>(bsz);
    g.task_losses[task] = task_loss;

    std::size_t j = static_cast<std::size_t>(task);
    double scale = multi ? config.coeffs[j] * std::exp(model.loss_w[j]) : 1.0;
    if (multi) g.loss_w[j] = mtl_loss_dw(task_loss, model.loss_w[j], config.coeffs[j]);
    for (double& v : dlogits.v) v *= scale;

    // Head backward: logits = H W2^T + b2, H = A W1^T + b1.
    const Matrix& hidden = trace.head_hidden.at(task);
    std::array<AffineLayer, 2> hg;
    hg[1].w = matmul_tn(dlogits, hidden);
    hg[1].b.assign(n_out, 0.0);
    for (std::size_t r = 0; r < dlogits.rows; ++r)
      for (std::size_t c = 0; c < n_out; ++c) hg[1].b[c] += dlogits(r, c);

    Matrix dh = matmul(dlogits, pair[1].w);
    hg[0].w = matmul_tn(dh, top_act);
    hg[0].b.assign(hidden.cols, 0.0);
    for (std::size_t r = 0; r < dh.rows; ++r)
      for (std::size_t c = 0; c < dh.cols; ++c) hg[0].b[c] += dh(r, c);
    g.heads[task] = std::move(hg);

    Matrix da = matmul(dh, pair[0].w);
    for (std::size_t i = 0; i < d_top.v.size(); ++i) d_top.v[i] += da.v[i];
  }

  g.total = multi ? mtl_loss(g.task_losses, model.loss_w, config.coeffs)
                  : g.task_losses.at(TaskId::Pain);

  // Encoder backward through affine+ReLU layers.
  Matrix d = std::move(d_top);
  for (std::size_t l = model.encoder.size(); l-- > 0;) {
    const Matrix& pre = trace.encoder_pre[l];
    for (std::size_t i = 0; i < d.v.size(); ++i)
      if (pre.v[i] <= 0.0) d.v[i] = 0.0;
    const Matrix& below = l == 0 ? batch : trace.encoder_act[l - 1];
    g.encoder[l].w = matmul_tn(d, below);
    for (std::size_t r = 0; r < d.rows; ++r)
      for (std::size_t c = 0; c < d.cols; ++c) g.encoder[l].b[c] += d(r, c);
    if (l > 0) d = matmul(d, model.encoder[l].w);
  }
  return g;
}

double lr_at_epoch(const TrainConfig& config, int epoch) {
  if (config.warmup_epochs < 0 || config.warmup_epochs >= config.epochs)
    raise(Errc::InvalidParameter, "warmup_epochs must be in [0, epochs)");
  if (epoch < config.warmup_epochs)
    return config.lr * static_cast<double>(epoch) /
           static_cast<double>(config.warmup_epochs);
  double span = static_cast<double>(config.epochs - config.warmup_epochs);
  double t = static_cast<double>(epoch - config.warmup_epochs) / span;
  return config.lr * 0.5 * (1.0 + std::cos(M_PI * t));
}

namespace {

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
};

constexpr double kBeta1 = 0.9;
constexpr double kBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;

void adam_step(std::vector<double>& params, const std::vector<double>& grads,
               AdamState& state, double lr, double bias1, double bias2) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = kBeta1 * state.m[i] + (1.0 - kBeta1) * grads[i];
    state.v[i] = kBeta2 * state.v[i] + (1.0 - kBeta2) * grads[i] * grads[i];
    double mhat = state.m[i] / bias1;
    double vhat = state.v[i] / bias2;
    params[i] -= lr * mhat / (std::sqrt(vhat) + kAdamEps);
  }
}

void ema_update(std::vector<double>& shadow, const std::vector<double>& live,
                double decay) {
  for (std::size_t i = 0; i < shadow.size(); ++i)
    shadow[i] = decay * shadow[i] + (1.0 - decay) * live[i];
}

}  // namespace

TrainResult train(const MlpSpec& spec, const TrainConfig& config,
                  const TrainingSet& data) {
  validate_spec(spec);
  if (data.x.rows == 0) raise(Errc::ShapeMismatch, "empty training set");
  if (data.pain.size() != data.x.rows)
    raise(Errc::MissingTaskLabels, "every sample needs a pain label");
  if (spec.heads.count(TaskId::Age) && data.age_class.size() != data.x.rows)
    raise(Errc::MissingTaskLabels, "age task enabled but age labels missing");
  if (spec.heads.count(TaskId::Gender) && data.gender.size() != data.x.rows)
    raise(Errc::MissingTaskLabels, "gender task enabled but gender labels missing");
  if (config.batch_size == 0) raise(Errc::InvalidParameter, "batch_size must be > 0");
  if (!(config.label_smooth >= 0.0 && config.label_smooth < 1.0))
    raise(Errc::InvalidEpsilon, "label smoothing must satisfy 0 <= eps < 1");

  MtlModel model = init_model(spec, config.seed);
  detail::Rng rng(config.seed ^ 0x9e3779b9u);

  // One Adam state per parameter vector: encoder layers, then head layers,
  // then the loss weights.
  auto make_state = [](std::size_t n) {
    return AdamState{std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)};
  };
  std::vector<AdamState> enc_w_state, enc_b_state;
  for (const AffineLayer& l : model.encoder) {
    enc_w_state.push_back(make_state(l.w.v.size()));
    enc_b_state.push_back(make_state(l.b.size()));
  }
  std::map<TaskId, std::array<AdamState, 2>> head_w_state, head_b_state;
  for (const auto& [task, pair] : model.heads) {
    head_w_state[task] = {make_state(pair[0].w.v.size()),
                          make_state(pair[1].w.v.size())};
    head_b_state[task] = {make_state(pair[0].b.size()),
                          make_state(pair[1].b.size())};
  }
  AdamState w_state = make_state(3);
  const bool multi = spec.heads.size() > 1;

  std::vector<std::size_t> order(data.x.rows);
  std::iota(order.begin(), order.end(), 0);

  TrainResult result;
  long long step = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    double lr = lr_at_epoch(config, epoch);
    rng.shuffle(order);

    double epoch_loss = 0.0;
    std::size_t seen = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      std::size_t end = std::min(order.size(), start + config.batch_size);
      std::size_t bsz = end - start;

      Matrix batch(bsz, data.x.cols);
      std::vector<int> pain(bsz), age(bsz), gender(bsz);
      for (std::size_t r = 0; r < bsz; ++r) {
        std::size_t src = order[start + r];
        std::copy(data.x.row(src).begin(), data.x.row(src).end(),
                  batch.row(r).begin());
        pain[r] = data.pain[src];
        if (!data.age_class.empty()) age[r] = data.age_class[src];
        if (!data.gender.empty()) gender[r] = data.gender[src];
      }
      if (data.age_class.empty()) age.clear();
      if (data.gender.empty()) gender.clear();

      Gradients g = loss_and_gradients(model, batch, pain, age, gender, config);
      if (!std::isfinite(g.total))
        raise(Errc::NonFiniteLoss,
              "epoch " + std::to_string(epoch) + ", batch at sample " +
                  std::to_string(start) + ": loss = " + std::to_string(g.total));
      epoch_loss += g.total * static_cast<double>(bsz);
      seen += bsz;

      ++step;
      double bias1 = 1.0 - std::pow(kBeta1, static_cast<double>(step));
      double bias2 = 1.0 - std::pow(kBeta2, static_cast<double>(step));

      for (std::size_t l = 0; l < model.encoder.size(); ++l) {
        adam_step(model.encoder[l].w.v, g.encoder[l].w.v, enc_w_state[l], lr,
                  bias1, bias2);
        adam_step(model.encoder[l].b, g.encoder[l].b, enc_b_state[l], lr, bias1,
                  bias2);
        // Decoupled weight decay on weight matrices only.
        for (double& v : model.encoder[l].w.v) v -= lr * config.weight_decay * v;
      }
      for (auto& [task, pair] : model.heads) {
        for (int h = 0; h < 2; ++h) {
          adam_step(pair[h].w.v, g.heads.at(task)[h].w.v,
                    head_w_state.at(task)[h], lr, bias1, bias2);
          adam_step(pair[h].b, g.heads.at(task)[h].b, head_b_state.at(task)[h],
                    lr, bias1, bias2);
          for (double& v : pair[h].w.v) v -= lr * config.weight_decay * v;
        }
      }
      if (multi) {
        std::vector<double> w(model.loss_w.begin(), model.loss_w.end());
        std::vector<double> gw(g.loss_w.begin(), g.loss_w.end());
        adam_step(w, gw, w_state, lr, bias1, bias2);
        std::copy(w.begin(), w.end(), model.loss_w.begin());
      }

      if (config.ema) {
        for (std::size_t l = 0; l < model.encoder.size(); ++l) {
          ema_update(model.ema_encoder[l].w.v, model.encoder[l].w.v,
                     config.ema_decay);
          ema_update(model.ema_encoder[l].b, model.encoder[l].b, config.ema_decay);
        }
        for (auto& [task, pair] : model.heads) {
          for (int h = 0; h < 2; ++h) {
            ema_update(model.ema_heads.at(task)[h].w.v, pair[h].w.v,
                       config.ema_decay);
            ema_update(model.ema_heads.at(task)[h].b, pair[h].b, config.ema_decay);
          }
        }
      }
    }
    result.epoch_losses.push_back(epoch_loss / static_cast<double>(seen));
  }
  if (!config.ema) {
    model.ema_encoder = model.encoder;
    model.ema_heads = model.heads;
  }
  result.model = std::move(model);
  return result;
}

std::map<TaskId, int> predict(const MtlModel& model, std::span<const double> x,
                              bool use_ema) {
  if (x.size() != model.spec.input_dim)
    raise(Errc::ShapeMismatch, "input dim mismatch");
  Matrix batch(1, x.size());
  std::copy(x.begin(), x.end(), batch.v.begin());
  std::map<TaskId, Matrix> logits = forward(model, batch, use_ema);
  std::map<TaskId, int> out;
  for (const auto& [task, m] : logits) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < m.cols; ++k)
      if (m(0, k) > m(0, best)) best = k;
    out[task] = static_cast<int>(best);
  }
  return out;
}

// --- checkpoint JSON --------------------------------------------------------

namespace {

using nlohmann::json;

json layer_to_json(const AffineLayer& l) {
  return json{{"n_out", l.w.rows}, {"n_in", l.w.cols}, {"w", l.w.v}, {"b", l.b}};
}

AffineLayer layer_from_json(const json& j) {
  AffineLayer l;
  l.w = Matrix(j.at("n_out").get<std::size_t>(), j.at("n_in").get<std::size_t>());
  l.w.v = j.at("w").get<std::vector<double>>();
  l.b = j.at("b").get<std::vector<double>>();
  if (l.w.v.size() != l.w.rows * l.w.cols || l.b.size() != l.w.rows)
    raise(Errc::InvalidConfig, "layer shape mismatch in checkpoint");
  return l;
}

}  // namespace

std::string checkpoint_to_json(const MtlModel& model, const TrainConfig& config) {
  json heads = json::object();
  json head_params = json::object();
  json ema_head_params = json::object();
  for (const auto& [task, head] : model.spec.heads) {
    heads[to_string(task)] = json{{"hidden", head.hidden}, {"n_out", head.n_out}};
    head_params[to_string(task)] =
        json::array({layer_to_json(model.heads.at(task)[0]),
                     layer_to_json(model.heads.at(task)[1])});
    ema_head_params[to_string(task)] =
        json::array({layer_to_json(model.ema_heads.at(task)[0]),
                     layer_to_json(model.ema_heads.at(task)[1])});
  }
  json encoder = json::array();
  json ema_encoder = json::array();
  for (const AffineLayer& l : model.encoder) encoder.push_back(layer_to_json(l));
  for (const AffineLayer& l : model.ema_encoder)
    ema_encoder.push_back(layer_to_json(l));

  json j{{"schema_version", 1},
         {"kind", "mtl_checkpoint"},
         {"spec",
          json{{"input_dim", model.spec.input_dim},
               {"encoder_widths", model.spec.encoder_widths},
               {"heads", heads}}},
         {"loss_w", model.loss_w},
         {"encoder", encoder},
         {"heads", head_params},
         {"ema_encoder", ema_encoder},
         {"ema_heads", ema_head_params},
         {"config",
          json{{"epochs", config.epochs},
               {"warmup_epochs", config.warmup_epochs},
               {"lr", config.lr},
               {"weight_decay", config.weight_decay},
               {"label_smooth", config.label_smooth},
               {"ema", config.ema},
               {"ema_decay", config.ema_decay},
               {"batch_size", config.batch_size},
               {"seed", config.seed},
               {"coeffs", config.coeffs}}}};
  return j.dump(2);
}

MtlModel checkpoint_from_json(const std::string& text) {
  json j = json::parse(text);
  if (j.at("kind") != "mtl_checkpoint") raise(Errc::InvalidConfig, "wrong kind");
  MtlModel m;
  m.spec.input_dim = j.at("spec").at("input_dim").get<std::size_t>();
  m.spec.encoder_widths =
      j.at("spec").at("encoder_widths").get<std::vector<std::size_t>>();
  for (const auto& [name, head] : j.at("spec").at("heads").items()) {
    TaskId task;
    if (name == "pain") {
      task = TaskId::Pain;
    } else if (name == "age") {
      task = TaskId::Age;
    } else if (name == "gender") {
      task = TaskId::Gender;
    } else {
      raise(Errc::InvalidConfig, "unknown head '" + name + "'");
    }
    m.spec.heads[task] = {head.at("hidden").get<std::size_t>(),
                          head.at("n_out").get<std::size_t>()};
  }
  auto w = j.at("loss_w").get<std::vector<double>>();
  if (w.size() != 3) raise(Errc::InvalidConfig, "loss_w must have 3 entries");
  std::copy(w.begin(), w.end(), m.loss_w.begin());

  for (const json& l : j.at("encoder")) m.encoder.push_back(layer_from_json(l));
  for (const json& l : j.at("ema_encoder"))
    m.ema_encoder.push_back(layer_from_json(l));
  for (const auto& [task, head] : m.spec.heads) {
    const json& hp = j.at("heads").at(to_string(task));
    const json& ehp = j.at("ema_heads").at(to_string(task));
    m.heads[task] = {layer_from_json(hp.at(0)), layer_from_json(hp.at(1))};
    m.ema_heads[task] = {layer_from_json(ehp.at(0)), layer_from_json(ehp.at(1))};
  }
  return m;
}

}  // namespace painsig
