#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "painsig/la.hpp"

namespace painsig {

enum class TaskId { Pain = 0, Age = 1, Gender = 2 };

const char* to_string(TaskId task) noexcept;

struct HeadSpec {
  std::size_t hidden = 1024;
  std::size_t n_out = 0;
};

// Shared fully connected encoder (affine + ReLU per layer) with one two-layer
// affine head per task ("connected without nonlinearity").
struct MlpSpec {
  std::size_t input_dim = 0;
  std::vector<std::size_t> encoder_widths{256, 512, 1024, 1024};
  std::map<TaskId, HeadSpec> heads;  // must contain TaskId::Pain
};

struct AffineLayer {
  Matrix w;                // n_out x n_in
  std::vector<double> b;   // n_out
};

struct MtlModel {
  MlpSpec spec;
  std::vector<AffineLayer> encoder;
  std::map<TaskId, std::array<AffineLayer, 2>> heads;
  // Homoscedastic-uncertainty loss weights for (pain, age, gender); only the
  // entries of tasks present in spec.heads take part in the loss.
  std::array<double, 3> loss_w{0.0, 0.0, 0.0};
  // EMA shadow copies, same shapes as the live parameters.
  std::vector<AffineLayer> ema_encoder;
  std::map<TaskId, std::array<AffineLayer, 2>> ema_heads;
};

struct TrainConfig {
  int epochs = 300;
  int warmup_epochs = 50;
  double lr = 1e-3;
  double weight_decay = 0.1;
  double label_smooth = 0.1;
  bool ema = true;
  double ema_decay = 0.999;
  std::size_t batch_size = 64;
  std::uint32_t seed = 0;
  // Fixed loss coefficients (c1, c2, c3) for (pain, age, gender).
  std::array<double, 3> coeffs{1.0, 0.2, 0.2};
};

// Per-sample targets; age_class values index the distinct ages of the
// training split (mapping decided by the caller).
struct TrainingSet {
  Matrix x;
  std::vector<int> pain;
  std::vector<int> age_class;   // empty when the age task is absent
  std::vector<int> gender;      // empty when the gender task is absent
};

// Deterministic parameter initialization: uniform He-style scaled by fan-in.
MtlModel init_model(const MlpSpec& spec, std::uint32_t seed);

// Logits per task, one row per batch row. Raises ShapeMismatch.
std::map<TaskId, Matrix> forward(const MtlModel& model, const Matrix& batch,
                                 bool use_ema = false);

// Cross entropy against the smoothed target: 1 - eps on the true class,
// eps / (n_out - 1) elsewhere. Raises InvalidEpsilon unless 0 <= eps < 1.
double smoothed_cross_entropy(std::span<const double> logits, int true_class,
                              double eps);

// L_total = sum over present tasks j of [e^{w_j} L_j + w_j] c_j.
double mtl_loss(const std::map<TaskId, double>& task_losses,
                const std::array<double, 3>& w, const std::array<double, 3>& c);

// Analytic gradient of mtl_loss wrt w_j: c_j (e^{w_j} L_j + 1).
double mtl_loss_dw(double loss_j, double w_j, double c_j);

// Loss and full gradient for one batch; exposed so the gradients can be
// checked against finite differences.
struct Gradients {
  std::vector<AffineLayer> encoder;                       // same shapes as model
  std::map<TaskId, std::array<AffineLayer, 2>> heads;
  std::array<double, 3> loss_w{0.0, 0.0, 0.0};
  std::map<TaskId, double> task_losses;                   // mean CE per task
  double total = 0.0;
};

Gradients loss_and_gradients(const MtlModel& model, const Matrix& batch,
                             const std::vector<int>& pain,
                             const std::vector<int>& age_class,
                             const std::vector<int>& gender,
                             const TrainConfig& config);

// Learning rate at an epoch: linear warmup from 0 to lr over warmup_epochs
// (exactly lr at epoch == warmup_epochs), then cosine decay to 0 at epochs.
double lr_at_epoch(const TrainConfig& config, int epoch);

struct TrainResult {
  MtlModel model;
  std::vector<double> epoch_losses;
};

// Mini-batch training with decoupled weight decay (applied to weight
// matrices, not biases or the loss weights), the warmup+cosine schedule, and
// per-step EMA. Raises MissingTaskLabels or NonFiniteLoss.
TrainResult train(const MlpSpec& spec, const TrainConfig& config,
                  const TrainingSet& data);

// argmax per head (ties to the lowest class id); EMA weights when use_ema.
std::map<TaskId, int> predict(const MtlModel& model, std::span<const double> x,
                              bool use_ema);

// Versioned JSON checkpoint: spec + flat parameter arrays + EMA + config echo.
std::string checkpoint_to_json(const MtlModel& model, const TrainConfig& config);
MtlModel checkpoint_from_json(const std::string& text);

}  // namespace painsig
